use serde::{Deserialize, Serialize};

use super::pipeline::{rigorous, run_four_stage, PipelineError, PipelineOptions};
use crate::network::Network;

/// One parameter varied over a list of settings, the rest held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneGrid {
    Neighbours(Vec<usize>),
    Limit(Vec<usize>),
    /// Corridor-count windows as fractions of the DC security plan.
    CorridorBounds(Vec<(f64, f64)>),
}

impl TuneGrid {
    pub fn name(&self) -> &'static str {
        match self {
            TuneGrid::Neighbours(_) => "e_h",
            TuneGrid::Limit(_) => "lim",
            TuneGrid::CorridorBounds(_) => "corridor_bounds",
        }
    }

    fn len(&self) -> usize {
        match self {
            TuneGrid::Neighbours(v) | TuneGrid::Limit(v) => v.len(),
            TuneGrid::CorridorBounds(v) => v.len(),
        }
    }

    fn apply(&self, k: usize, opts: &mut PipelineOptions) -> String {
        match self {
            TuneGrid::Neighbours(v) => {
                opts.ac.neighbours = v[k];
                opts.dc.neighbours = v[k];
                v[k].to_string()
            }
            TuneGrid::Limit(v) => {
                opts.ac.limit = v[k];
                opts.dc.limit = v[k];
                v[k].to_string()
            }
            TuneGrid::CorridorBounds(v) => {
                opts.bounds_pct = v[k];
                format!("{:.0}-{:.0}%", v[k].0 * 100.0, v[k].1 * 100.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub setting: String,
    /// Fitness variance of the final population, one entry per trial.
    pub variance: Vec<f64>,
    /// Best fitness reached by each trial.
    pub costs: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTable {
    pub parameter: String,
    pub rows: Vec<TuneRow>,
}

impl TuneTable {
    /// Setting whose mean population variance is largest.
    pub fn best(&self) -> Option<&TuneRow> {
        let mean = |r: &TuneRow| r.variance.iter().sum::<f64>() / r.variance.len().max(1) as f64;
        self.rows.iter().max_by(|a, b| mean(a).total_cmp(&mean(b)))
    }

    /// Rows `setting,trial_1..trial_n,min,max,mean,stddev`.
    pub fn to_csv(&self) -> String {
        let trials = self.rows.first().map_or(0, |r| r.variance.len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec![self.parameter.clone()];
        head.extend((1..=trials).map(|t| format!("variance_trial_{t}")));
        head.extend(["min_cost", "max_cost", "mean_cost", "stddev_cost"].map(String::from));
        w.write_record(&head).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.setting.clone()];
            rec.extend(r.variance.iter().map(|v| format!("{v:.4}")));
            rec.extend([r.min, r.max, r.mean, r.stddev].map(|v| format!("{v:.3}")));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

/// Runs `trials` searches per setting (seeds `1..=trials` offset by the
/// configured seed) and tabulates the final population variance and the
/// spread of best costs. Neighbour and limit grids use the single-stage
/// search when `single_stage` is set; corridor windows always use the
/// staged pipeline.
pub fn tune_harness(
    net: &Network,
    grid: &TuneGrid,
    trials: usize,
    opts: &PipelineOptions,
    single_stage: bool,
) -> Result<TuneTable, PipelineError> {
    let mut rows = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let mut variance = Vec::with_capacity(trials);
        let mut costs = Vec::with_capacity(trials);
        let mut setting = String::new();
        for t in 0..trials {
            let mut o = opts.clone().with_seed(opts.ac.seed.wrapping_add(t as u64));
            setting = grid.apply(k, &mut o);
            let staged = matches!(grid, TuneGrid::CorridorBounds(_)) || !single_stage;
            let r = if staged { run_four_stage(net, &o)? } else { rigorous(net, &o)? };
            let last = r.stages.last().expect("at least one stage");
            variance.push(last.history.last().map_or(0.0, |h| h.variance));
            costs.push(last.fitness);
        }
        let n = costs.len().max(1) as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let stddev = (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n).sqrt();
        rows.push(TuneRow {
            setting,
            min: costs.iter().copied().fold(f64::INFINITY, f64::min),
            max: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            stddev,
            variance,
            costs,
        });
    }
    Ok(TuneTable {
        parameter: grid.name().to_string(),
        rows,
    })
}
