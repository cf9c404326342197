use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use gridplan::cases;
use gridplan::network::{load_case, Network};
use gridplan::planner::{PipelineOptions, TuneGrid};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// DC base-case search only.
    Stage1,
    /// AC base-case plan (DC base, then AC base).
    Stage2,
    /// DC security-constrained search only.
    Stage3,
    /// Full staged pipeline; same as four-stage.
    Stage4,
    FourStage,
    /// Year-by-year planning with compensation.
    Sequential,
    /// Single AC secure search without reduction strategies.
    Rigorous,
    Screen,
    Verify,
    Tune,
}

/// Everything that determines a run; embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub case: String,
    pub mode: Mode,
    pub seed: u64,
    pub trials: usize,
    pub out: PathBuf,
    pub params: BTreeMap<String, String>,
    pub plan: Option<PathBuf>,
    pub grid: Option<String>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("--trials must be at least 1");
        }
        if matches!(self.mode, Mode::Screen | Mode::Verify) && self.plan.is_none() {
            bail!("mode {:?} needs --plan", self.mode);
        }
        if self.mode == Mode::Tune && self.grid.is_none() {
            bail!("tune needs --grid, e.g. --grid e_h=1,2,4,8");
        }
        self.options()?;
        if let Some(g) = &self.grid {
            parse_grid(g)?;
        }
        Ok(())
    }

    /// Bundled case name or path to a case file.
    pub fn network(&self) -> Result<Network> {
        if let Some(net) = cases::bundled(&self.case) {
            return Ok(net);
        }
        load_case(&self.case).with_context(|| format!("loading case {}", self.case))
    }

    /// Pipeline options with the `--param` overrides applied. MABC keys may
    /// be prefixed with `dc.` or `ac.`; unprefixed keys set both.
    pub fn options(&self) -> Result<PipelineOptions> {
        let mut o = PipelineOptions::default().with_seed(self.seed);
        for (k, v) in &self.params {
            let flag = || v.parse::<bool>().with_context(|| format!("{k} expects true or false"));
            let num = || v.parse::<f64>().with_context(|| format!("{k} expects a number"));
            match k.as_str() {
                "restrict_space" => o.strategies.restrict_space = flag()?,
                "fix_corridors" => o.strategies.fix_corridors = flag()?,
                "corridor_bounds" => o.strategies.corridor_bounds = flag()?,
                "cost_cap" => o.strategies.cost_cap = flag()?,
                "early_abort" => o.strategies.early_abort = flag()?,
                "year_cache" => o.strategies.year_cache = flag()?,
                "sequential_compensation" => o.strategies.sequential_compensation = flag()?,
                "bounds_lo" => o.bounds_pct.0 = num()?,
                "bounds_hi" => o.bounds_pct.1 = num()?,
                "compensation_max" => o.compensation_max = num()?,
                "seed" => bail!("use --seed instead of --param seed"),
                _ => {
                    if let Some(key) = k.strip_prefix("dc.") {
                        o.dc.set(key, v)?;
                    } else if let Some(key) = k.strip_prefix("ac.") {
                        o.ac.set(key, v)?;
                    } else {
                        o.dc.set(k, v)?;
                        o.ac.set(k, v)?;
                    }
                }
            }
        }
        o.dc.validate()?;
        o.ac.validate()?;
        if !(o.bounds_pct.0 >= 0.0 && o.bounds_pct.0 <= o.bounds_pct.1) {
            bail!("bounds_lo must lie in [0, bounds_hi]");
        }
        Ok(o)
    }

    pub fn tune_grid(&self) -> Result<TuneGrid> {
        parse_grid(self.grid.as_deref().unwrap_or_default())
    }
}

/// `e_h=1,2,4`, `lim=2,6,10` or `bounds=0.9:1.3,0.8:1.5`.
pub fn parse_grid(text: &str) -> Result<TuneGrid> {
    let (key, values) = text.split_once('=').context("grid must look like key=v1,v2,...")?;
    let items: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        bail!("grid {key} has no values");
    }
    let ints = || -> Result<Vec<usize>> {
        items
            .iter()
            .map(|s| s.parse().with_context(|| format!("bad grid value {s}")))
            .collect()
    };
    Ok(match key {
        "e_h" | "neighbours" => TuneGrid::Neighbours(ints()?),
        "lim" | "limit" => TuneGrid::Limit(ints()?),
        "bounds" | "corridor_bounds" => TuneGrid::CorridorBounds(
            items
                .iter()
                .map(|s| {
                    let (a, b) = s.split_once(':').with_context(|| format!("bound {s} must be lo:hi"))?;
                    Ok((a.parse()?, b.parse()?))
                })
                .collect::<Result<_>>()?,
        ),
        _ => bail!("unknown grid parameter {key}"),
    })
}

pub fn parse_param(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}
