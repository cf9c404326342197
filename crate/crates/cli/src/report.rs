use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use gridplan::network::Network;
use gridplan::planner::{write_plan_csv, TuneTable};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::run::{Outcome, PlanningRun};

/// Wall-clock data; the only part of a report that changes between
/// identical runs.
pub fn timestamp(started: Instant, seconds: &[(String, f64)]) -> Value {
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let stages: Map<String, Value> = seconds.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "unix_seconds": unix,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "parts": stages,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn envelope(cfg: &RunConfig, net: &Network, stamp: Value, body: Value) -> Value {
    json!({
        "timestamp": stamp,
        "config": cfg,
        "case": net.name,
        "result": body,
    })
}

pub fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn convergence_csv(o: &Outcome) -> String {
    let mut s = String::from("stage,iteration,best,mean,variance,evaluations\n");
    for (stage, h) in &o.convergence {
        s.push_str(&format!(
            "{stage},{},{:.6},{:.6},{:.6},{}\n",
            h.iteration, h.best, h.mean, h.variance, h.evaluations
        ));
    }
    s
}

/// `plan.csv`, `convergence.csv` and `report.json` of a planning run.
pub fn emit_planning(cfg: &RunConfig, net: &Network, run: &PlanningRun, started: Instant) -> Result<()> {
    let dir = &cfg.out;
    let (best_index, body, seconds) = match &run.best {
        Some((t, o)) => {
            write(dir, "plan.csv", &write_plan_csv(net, &o.plan))?;
            write(dir, "convergence.csv", &convergence_csv(o))?;
            let body = json!({
                "best_trial": t,
                "cost": o.cost,
                "feasible": o.feasible,
                "verified": o.verified,
                "opf_calls": o.opf_calls,
                "years": o.years,
                "plan": o.plan,
                "detail": o.detail,
            });
            (json!(t), body, o.seconds.clone())
        }
        None => (Value::Null, Value::Null, Vec::new()),
    };
    let body = json!({ "best_trial": best_index, "trials": run.trials, "best": body });
    let report = envelope(cfg, net, timestamp(started, &seconds), body);
    write(dir, "report.json", &serde_json::to_string_pretty(&report)?)
}

pub fn emit_check(cfg: &RunConfig, net: &Network, body: Value, started: Instant) -> Result<()> {
    let report = envelope(cfg, net, timestamp(started, &[]), body);
    write(&cfg.out, "report.json", &serde_json::to_string_pretty(&report)?)
}

pub fn emit_tuning(cfg: &RunConfig, net: &Network, table: &TuneTable, started: Instant) -> Result<()> {
    write(&cfg.out, "tuning.csv", &table.to_csv())?;
    let body = json!({
        "table": table,
        "best_setting": table.best().map(|r| r.setting.clone()),
    });
    let report = envelope(cfg, net, timestamp(started, &[]), body);
    write(&cfg.out, "report.json", &serde_json::to_string_pretty(&report)?)
}
