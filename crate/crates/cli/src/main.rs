mod config;
mod report;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::{parse_param, Mode, RunConfig};

/// Multi-year N-1 secure AC transmission expansion planning.
#[derive(Parser)]
#[command(name = "gridplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan with one of the planning modes (default four-stage).
    Solve(RunArgs),
    /// Independent N-1 check of a stored plan; exit 2 if insecure.
    Verify(RunArgs),
    /// Contingency screening of a stored plan.
    Screen(RunArgs),
    /// Parameter sweep reporting population variance and cost spread.
    Tune(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Bundled case (garver6, ieee24, ieee118) or path to a case file.
    #[arg(long)]
    case: String,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent searches; the best one is reported.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value = "gridplan-out")]
    out: PathBuf,
    /// Override, e.g. `iter=50`, `dc.cs_n=10`, `cost_cap=false`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, String)>,
    /// Plan CSV for verify and screen.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Tune grid, e.g. `e_h=1,2,4,8`, `lim=2,6,10`, `bounds=0.9:1.3,0.8:1.5`.
    #[arg(long)]
    grid: Option<String>,
}

fn config(command: Command) -> Result<RunConfig> {
    let (args, fixed) = match command {
        Command::Solve(a) => (a, None),
        Command::Verify(a) => (a, Some(Mode::Verify)),
        Command::Screen(a) => (a, Some(Mode::Screen)),
        Command::Tune(a) => (a, Some(Mode::Tune)),
    };
    let mode = match (fixed, args.mode) {
        (Some(f), Some(m)) if f != m => bail!("--mode {m:?} conflicts with the subcommand"),
        (Some(f), _) => f,
        (None, Some(m)) if matches!(m, Mode::Verify | Mode::Screen | Mode::Tune) => {
            bail!("use the {m:?} subcommand instead of solve --mode")
        }
        (None, m) => m.unwrap_or(Mode::FourStage),
    };
    let cfg = RunConfig {
        case: args.case,
        mode,
        seed: args.seed,
        trials: args.trials,
        out: args.out,
        params: args.params.into_iter().collect::<BTreeMap<_, _>>(),
        plan: args.plan,
        grid: args.grid,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<()> {
    if let Ok(v) = std::env::var("GRIDPLAN_THREADS") {
        let n: usize = v.parse().map_err(|_| anyhow::anyhow!("GRIDPLAN_THREADS must be a positive integer"))?;
        if n == 0 {
            bail!("GRIDPLAN_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Runs the configured mode; `Ok(false)` is an infeasible outcome.
fn execute(cfg: &RunConfig) -> Result<bool> {
    let started = Instant::now();
    let net = cfg.network()?;
    report::prepare(&cfg.out)?;
    match cfg.mode {
        Mode::Verify | Mode::Screen => {
            let (body, secure) = run::check_plan(&net, cfg)?;
            println!(
                "{}: plan is {}; violated corridors {:?}",
                net.name,
                if secure { "N-1 secure" } else { "not N-1 secure" },
                body["pc_viol_labels"]
            );
            report::emit_check(cfg, &net, body, started)?;
            Ok(secure || cfg.mode == Mode::Screen)
        }
        Mode::Tune => {
            let table = run::tune(&net, cfg)?;
            print!("{}", table.to_csv());
            report::emit_tuning(cfg, &net, &table, started)?;
            Ok(true)
        }
        _ => {
            let run = run::plan_trials(&net, cfg)?;
            for t in &run.trials {
                match (&t.error, t.cost) {
                    (Some(e), _) => println!("trial {} (seed {}): error: {e}", t.trial, t.seed),
                    (None, Some(c)) => println!(
                        "trial {} (seed {}): cost {c:.3} feasible {} verified {} opf calls {}",
                        t.trial, t.seed, t.feasible, t.verified, t.opf_calls
                    ),
                    (None, None) => {}
                }
            }
            report::emit_planning(cfg, &net, &run, started)?;
            match &run.best {
                Some((t, o)) => {
                    println!("best: trial {t}, cost {:.3}, written to {}", o.cost, cfg.out.display());
                    Ok(o.feasible && o.verified)
                }
                None => Ok(false),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = threads().and_then(|_| config(cli.command)).and_then(|cfg| execute(&cfg));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
