use anyhow::{Context, Result};
use gridplan::contingency::{n1_verify, security_screen};
use gridplan::mabc::{IterationRecord, SearchSpace};
use gridplan::network::{ExpansionPlan, Network};
use gridplan::planner::{
    rigorous, run_four_stage, run_stage, sequential_plan, tune_harness, FourStageReport, PipelineOptions,
    Problem, StageOutcome, Strategies, TuneTable, YearSummary,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};

/// One finished planning run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub plan: ExpansionPlan,
    pub cost: f64,
    pub feasible: bool,
    pub verified: bool,
    pub opf_calls: usize,
    pub years: Vec<YearSummary>,
    /// Full result with wall-clock fields moved to `seconds`.
    pub detail: Value,
    pub convergence: Vec<(usize, IterationRecord)>,
    pub seconds: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub cost: Option<f64>,
    pub feasible: bool,
    pub verified: bool,
    pub opf_calls: usize,
    pub error: Option<String>,
}

pub struct PlanningRun {
    pub trials: Vec<TrialSummary>,
    pub best: Option<(usize, Outcome)>,
}

/// Removes every `seconds` member from `v`, collecting it under its path.
fn take_seconds(v: &mut Value, path: &str, out: &mut Vec<(String, f64)>) {
    match v {
        Value::Object(map) => {
            if let Some(s) = map.remove("seconds") {
                out.push((if path.is_empty() { "total".into() } else { path.to_string() }, s.as_f64().unwrap_or(0.0)));
            }
            for (k, child) in map.iter_mut() {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                take_seconds(child, &p, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter_mut().enumerate() {
                take_seconds(child, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

fn detached(value: &impl Serialize) -> Result<(Value, Vec<(String, f64)>)> {
    let mut v = serde_json::to_value(value)?;
    let mut s = Vec::new();
    take_seconds(&mut v, "", &mut s);
    Ok((v, s))
}

fn from_pipeline(r: FourStageReport) -> Result<Outcome> {
    let convergence = r
        .stages
        .iter()
        .flat_map(|s| s.history.iter().map(move |h| (s.stage, h.clone())))
        .collect();
    let (detail, seconds) = detached(&r)?;
    Ok(Outcome {
        opf_calls: r.opf_calls(),
        plan: r.plan,
        cost: r.cost,
        feasible: r.feasible,
        verified: r.verified,
        years: r.years,
        detail,
        convergence,
        seconds,
    })
}

fn from_stage(net: &Network, s: StageOutcome) -> Result<Outcome> {
    let years = (1..=net.years())
        .map(|y| YearSummary {
            year: y,
            lines_added: s.plan.total_added(y),
            cost: gridplan::planner::year_cost(&s.plan, net, y),
            l_index: None,
        })
        .collect();
    let convergence = s.history.iter().map(|h| (s.stage, h.clone())).collect();
    let (detail, seconds) = detached(&s)?;
    Ok(Outcome {
        opf_calls: s.counters.opf_calls(),
        plan: s.plan,
        cost: s.cost,
        feasible: s.feasible,
        verified: s.feasible,
        years,
        detail,
        convergence,
        seconds,
    })
}

/// One trial of a planning mode.
pub fn plan_once(net: &Network, mode: Mode, opts: &PipelineOptions) -> Result<Outcome> {
    match mode {
        Mode::Stage1 | Mode::Stage3 => {
            let (stage, problem) = if mode == Mode::Stage1 { (1, Problem::DcBase) } else { (3, Problem::DcSecure) };
            let strategies = Strategies {
                early_abort: opts.strategies.early_abort,
                year_cache: opts.strategies.year_cache,
                ..Strategies::none()
            };
            let s = run_stage(net, stage, problem, &opts.dc, strategies, &SearchSpace::full(net), &[], None, None)?;
            from_stage(net, s)
        }
        Mode::Stage2 => {
            let mut o = opts.clone();
            o.last_stage = 2;
            from_pipeline(run_four_stage(net, &o)?)
        }
        Mode::Stage4 | Mode::FourStage => from_pipeline(run_four_stage(net, opts)?),
        Mode::Rigorous => from_pipeline(rigorous(net, opts)?),
        Mode::Sequential => {
            let s = sequential_plan(net, opts)?;
            let (detail, seconds) = detached(&s)?;
            Ok(Outcome {
                plan: s.plan,
                cost: s.cost,
                feasible: true,
                verified: true,
                opf_calls: s.opf_calls,
                years: s.years,
                detail,
                convergence: Vec::new(),
                seconds,
            })
        }
        Mode::Screen | Mode::Verify | Mode::Tune => unreachable!("not a planning mode"),
    }
}

/// Runs every trial (seeds `seed`, `seed + 1`, ...) in parallel and keeps
/// the best: verified before feasible before cheapest, earliest on ties.
pub fn plan_trials(net: &Network, cfg: &RunConfig) -> Result<PlanningRun> {
    let base = cfg.options()?;
    let results: Vec<(u64, Result<Outcome>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_add(t as u64);
            let opts = base.clone().with_seed(seed);
            (seed, plan_once(net, cfg.mode, &opts))
        })
        .collect();
    let mut trials = Vec::with_capacity(results.len());
    let mut best: Option<(usize, Outcome)> = None;
    for (t, (seed, r)) in results.into_iter().enumerate() {
        match r {
            Ok(o) => {
                trials.push(TrialSummary {
                    trial: t,
                    seed,
                    cost: Some(o.cost),
                    feasible: o.feasible,
                    verified: o.verified,
                    opf_calls: o.opf_calls,
                    error: None,
                });
                let key = |o: &Outcome| (!o.verified, !o.feasible, o.cost);
                let better = match &best {
                    None => true,
                    Some((_, b)) => key(&o).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less),
                };
                if better {
                    best = Some((t, o));
                }
            }
            Err(e) => trials.push(TrialSummary {
                trial: t,
                seed,
                cost: None,
                feasible: false,
                verified: false,
                opf_calls: 0,
                error: Some(format!("{e:#}")),
            }),
        }
    }
    Ok(PlanningRun { trials, best })
}

pub fn read_plan(net: &Network, cfg: &RunConfig) -> Result<ExpansionPlan> {
    let path = cfg.plan.as_ref().context("missing --plan")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(gridplan::planner::read_plan_csv(net, &text)?)
}

/// Screen or verify a stored plan; returns the report body and whether the
/// plan is N-1 secure.
pub fn check_plan(net: &Network, cfg: &RunConfig) -> Result<(Value, bool)> {
    let plan = read_plan(net, cfg)?;
    let (secure, report) = if cfg.mode == Mode::Verify {
        n1_verify(net, &plan, None)?
    } else {
        let r = security_screen(net, &plan, None)?;
        (r.secure, r)
    };
    let labels: Vec<String> = report.pc_viol.iter().map(|&l| net.corridor_label(l)).collect();
    let body = json!({
        "plan_cost": gridplan::planner::discounted_cost(&plan, net),
        "secure": secure,
        "pc_viol": report.pc_viol,
        "pc_viol_labels": labels,
        "screen": report,
    });
    Ok((body, secure))
}

pub fn tune(net: &Network, cfg: &RunConfig) -> Result<TuneTable> {
    let grid = cfg.tune_grid()?;
    Ok(tune_harness(net, &grid, cfg.trials, &cfg.options()?, false)?)
}
