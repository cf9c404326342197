use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fitness::{Counters, PlanFitness, Problem, Strategies};
use super::{build_stage_context, discounted_cost, year_cost, ContextError, StageContext};
use crate::contingency::{n1_verify_with, security_screen_with, ScreenError, SecurityReport};
use crate::dispatch::{base_opf, BaseOpfOptions, DispatchError, OpfInput};
use crate::mabc::{run, IterationRecord, MabcError, MabcParams, SearchSpace};
use crate::network::{realize_topology, Contingency, ExpansionPlan, Network, NetworkError, ReactivePlan};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Search(#[from] MabcError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error("sequential planning found no feasible plan for year {year} (best fitness {fitness})")]
    Year { year: usize, fitness: f64 },
}

/// Switches for the search-reduction strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyFlags {
    /// Final search confined to violated and DC-secure corridors.
    pub restrict_space: bool,
    /// Corridors both violated and DC-secure forced into every candidate.
    pub fix_corridors: bool,
    /// Corridor-count window.
    pub corridor_bounds: bool,
    /// Adaptive cost cap.
    pub cost_cap: bool,
    /// Stop a plan at its first infeasible state.
    pub early_abort: bool,
    /// Per-year verdict reuse.
    pub year_cache: bool,
    /// Shunt compensation fixed from sequential planning.
    pub sequential_compensation: bool,
}

impl Default for StrategyFlags {
    fn default() -> Self {
        StrategyFlags {
            restrict_space: true,
            fix_corridors: true,
            corridor_bounds: true,
            cost_cap: true,
            early_abort: true,
            year_cache: true,
            sequential_compensation: true,
        }
    }
}

impl StrategyFlags {
    pub fn none() -> Self {
        StrategyFlags {
            restrict_space: false,
            fix_corridors: false,
            corridor_bounds: false,
            cost_cap: false,
            early_abort: false,
            year_cache: false,
            sequential_compensation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub dc: MabcParams,
    pub ac: MabcParams,
    pub strategies: StrategyFlags,
    /// Corridor-count window relative to the DC security plan.
    pub bounds_pct: (f64, f64),
    /// Fixed shunt compensation per year; computed by sequential planning
    /// when absent and `sequential_compensation` is on.
    pub q_rc: Option<ReactivePlan>,
    /// When set, the base-case dispatch may add up to this much shunt
    /// compensation per load bus (MVAr).
    pub compensation: Option<f64>,
    /// Last stage to run: 2 gives the base-case plan, 4 the secure one.
    pub last_stage: usize,
    /// Upper limit on compensation used by sequential planning, MVAr.
    pub compensation_max: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            dc: MabcParams::dc(),
            ac: MabcParams::ac(),
            strategies: StrategyFlags::default(),
            bounds_pct: (0.9, 1.3),
            q_rc: None,
            compensation: None,
            last_stage: 4,
            compensation_max: 100.0,
        }
    }
}

impl PipelineOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.dc.seed = seed;
        self.ac.seed = seed;
        self
    }

    fn base_opts(&self) -> BaseOpfOptions {
        match self.compensation {
            Some(max) => BaseOpfOptions {
                allow_compensation: true,
                compensation_max: max,
                ..BaseOpfOptions::default()
            },
            None => BaseOpfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: usize,
    pub problem: Problem,
    pub plan: ExpansionPlan,
    pub cost: f64,
    pub fitness: f64,
    pub feasible: bool,
    pub counters: Counters,
    pub u_lim_trace: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSummary {
    pub year: usize,
    pub lines_added: u32,
    /// Undiscounted cost of the lines built that year.
    pub cost: f64,
    pub l_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourStageReport {
    pub stages: Vec<StageOutcome>,
    pub context: Option<StageContext>,
    pub plan: ExpansionPlan,
    pub cost: f64,
    pub feasible: bool,
    /// Outcome of the independent check of the final plan.
    pub verified: bool,
    pub years: Vec<YearSummary>,
    pub q_rc: Option<ReactivePlan>,
    pub sequential: Option<SequentialReport>,
    pub seconds: f64,
}

impl FourStageReport {
    pub fn opf_calls(&self) -> usize {
        self.stages.iter().map(|s| s.counters.opf_calls()).sum()
    }

    pub fn stage(&self, stage: usize) -> Option<&StageOutcome> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

fn stage_seed(seed: u64, stage: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stage as u64)
}

/// One MABC search of `problem` over `space`.
#[allow(clippy::too_many_arguments)]
pub fn run_stage(
    net: &Network,
    stage: usize,
    problem: Problem,
    params: &MabcParams,
    strategies: Strategies,
    space: &SearchSpace,
    warm: &[ExpansionPlan],
    q_rc: Option<&ReactivePlan>,
    compensation: Option<f64>,
) -> Result<StageOutcome, PipelineError> {
    let t = Instant::now();
    let mut fit = PlanFitness::new(net, problem, strategies, q_rc)?;
    if let Some(max) = compensation {
        fit = fit.with_compensation(max);
    }
    let params = params.clone().with_seed(stage_seed(params.seed, stage));
    let res = run(&mut fit, space, &params, warm)?;
    let plan = res.best.plan;
    let cost = discounted_cost(&plan, net);
    let feasible = fit.is_feasible_value(&plan, res.best.fitness);
    Ok(StageOutcome {
        stage,
        problem,
        cost,
        fitness: res.best.fitness,
        feasible,
        counters: fit.counters(),
        u_lim_trace: fit.u_lim_trace().to_vec(),
        history: res.history,
        plan,
        seconds: t.elapsed().as_secs_f64(),
    })
}

fn summarize(net: &Network, plan: &ExpansionPlan, screen: Option<&SecurityReport>) -> Vec<YearSummary> {
    (1..=net.years())
        .map(|y| YearSummary {
            year: y,
            lines_added: plan.total_added(y),
            cost: year_cost(plan, net, y),
            l_index: screen.and_then(|s| s.years.get(y - 1)).and_then(|r| r.l_index),
        })
        .collect()
}

/// Staged planning: DC base, AC base, DC secure, then the AC secure search
/// confined and gated by what the earlier stages found. With
/// `last_stage = 2` the AC base plan is the result.
pub fn run_four_stage(net: &Network, opts: &PipelineOptions) -> Result<FourStageReport, PipelineError> {
    let t = Instant::now();
    let flags = &opts.strategies;
    let mut sequential = None;
    let q_rc = match (&opts.q_rc, flags.sequential_compensation && opts.compensation.is_none()) {
        (Some(q), _) => Some(q.clone()),
        (None, true) => {
            let s = sequential_plan(net, opts)?;
            let q = s.q_rc.clone();
            sequential = Some(s);
            Some(q)
        }
        (None, false) => None,
    };
    let q_ref = q_rc.as_ref();
    let full = SearchSpace::full(net);
    let cache = |s: Strategies| Strategies {
        year_cache: flags.year_cache,
        early_abort: flags.early_abort,
        ..s
    };

    // the year-by-year plan is a valid multi-year candidate under its own compensation
    let seq_plan: Vec<ExpansionPlan> = sequential.iter().map(|s: &SequentialReport| s.plan.clone()).collect();

    let s1 = run_stage(net, 1, Problem::DcBase, &opts.dc, cache(Strategies::none()), &full, &[], q_ref, None)?;
    let cap2 = (flags.cost_cap && s1.feasible && s1.cost > 0.0).then_some(2.0 * s1.cost);
    let s2 = run_stage(
        net,
        2,
        Problem::AcBase,
        &opts.ac,
        cache(Strategies {
            cost_cap: cap2,
            ..Strategies::none()
        }),
        &full,
        &[vec![s1.plan.clone()], seq_plan.clone()].concat(),
        q_ref,
        opts.compensation,
    )?;
    let base_opts = opts.base_opts();
    if opts.last_stage <= 2 {
        let (verified, screen) = verify_base(net, &s2.plan, q_ref, &base_opts)?;
        return Ok(FourStageReport {
            plan: s2.plan.clone(),
            cost: s2.cost,
            feasible: s2.feasible,
            verified,
            years: summarize(net, &s2.plan, Some(&screen)),
            stages: vec![s1, s2],
            context: None,
            q_rc,
            sequential,
            seconds: t.elapsed().as_secs_f64(),
        });
    }

    let s3 = run_stage(
        net,
        3,
        Problem::DcSecure,
        &opts.dc,
        cache(Strategies::none()),
        &full,
        &[s1.plan.clone(), s2.plan.clone()],
        q_ref,
        None,
    )?;
    let screen = security_screen_with(net, &s2.plan, q_ref, &base_opts)?;
    // an empty DC security plan leaves nothing to derive the gates from
    let (ctx, gated) = match build_stage_context(&s3.plan, &s2.plan, &screen, s3.cost, opts.bounds_pct, q_rc.clone()) {
        Ok(ctx) => (ctx, true),
        Err(ContextError::EmptyDcPlan) => (StageContext::ungated(&s2.plan, &screen, q_rc.clone()), false),
    };

    let fixed: &[usize] = if flags.fix_corridors { &ctx.pc_fix } else { &[] };
    let restricted = ctx.search_corridors();
    let space = if flags.restrict_space && !restricted.is_empty() {
        SearchSpace::restricted(net, &restricted, fixed)
    } else {
        SearchSpace::restricted(net, &full.corridors, fixed)
    };
    let strategies = cache(Strategies {
        corridor_bounds: (gated && flags.corridor_bounds).then_some(ctx.bounds),
        cost_cap: (gated && flags.cost_cap).then_some(ctx.u_lim),
        ..Strategies::none()
    });
    let warm = [ctx.warm.clone(), seq_plan].concat();
    let s4 = run_stage(net, 4, Problem::AcSecure, &opts.ac, strategies, &space, &warm, q_ref, opts.compensation)?;
    let (verified, check) = n1_verify_with(net, &s4.plan, q_ref, &base_opts)?;
    Ok(FourStageReport {
        plan: s4.plan.clone(),
        cost: s4.cost,
        feasible: s4.feasible,
        verified,
        years: summarize(net, &s4.plan, Some(&check)),
        stages: vec![s1, s2, s3, s4],
        context: Some(ctx),
        q_rc,
        sequential,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Base-case check of every year (no contingencies).
fn verify_base(
    net: &Network,
    plan: &ExpansionPlan,
    q_rc: Option<&ReactivePlan>,
    opts: &BaseOpfOptions,
) -> Result<(bool, SecurityReport), PipelineError> {
    let mut years = Vec::new();
    let mut ok = true;
    for y in 1..=net.years() {
        let inp = OpfInput::for_year(net, y, q_rc.map(|q| q.year(y)))?;
        let circuits = realize_topology(net, plan, y, Contingency::Base).map_err(ScreenError::from)?;
        let r = base_opf(&inp, &circuits, opts);
        ok &= r.feasible;
        years.push(crate::contingency::YearReport {
            year: y,
            base: crate::contingency::Verdict {
                contingency: Contingency::Base,
                feasible: r.feasible,
                status: r.status.clone(),
                penalty: r.penalty,
                overloaded: Vec::new(),
            },
            l_index: r.l_index,
            contingencies: Vec::new(),
        });
    }
    let calls = years.len();
    Ok((
        ok,
        SecurityReport {
            years,
            pc_viol: Vec::new(),
            secure: ok,
            opf_calls: calls,
        },
    ))
}

/// Single-stage search without any reduction strategy: the AC problem of
/// `last_stage` over the whole corridor catalog from a random colony.
pub fn rigorous(net: &Network, opts: &PipelineOptions) -> Result<FourStageReport, PipelineError> {
    let t = Instant::now();
    let mut sequential = None;
    let q_rc = match (&opts.q_rc, opts.strategies.sequential_compensation && opts.compensation.is_none()) {
        (Some(q), _) => Some(q.clone()),
        (None, true) => {
            let s = sequential_plan(net, opts)?;
            let q = s.q_rc.clone();
            sequential = Some(s);
            Some(q)
        }
        (None, false) => None,
    };
    let problem = if opts.last_stage <= 2 {
        Problem::AcBase
    } else {
        Problem::AcSecure
    };
    let space = SearchSpace::full(net);
    let s = run_stage(
        net,
        opts.last_stage.min(4),
        problem,
        &opts.ac,
        Strategies::none(),
        &space,
        &[],
        q_rc.as_ref(),
        opts.compensation,
    )?;
    let base_opts = opts.base_opts();
    let (verified, check) = if problem.is_secure() {
        n1_verify_with(net, &s.plan, q_rc.as_ref(), &base_opts)?
    } else {
        verify_base(net, &s.plan, q_rc.as_ref(), &base_opts)?
    };
    Ok(FourStageReport {
        plan: s.plan.clone(),
        cost: s.cost,
        feasible: s.feasible,
        verified,
        years: summarize(net, &s.plan, Some(&check)),
        stages: vec![s],
        context: None,
        q_rc,
        sequential,
        seconds: t.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialReport {
    pub plan: ExpansionPlan,
    pub cost: f64,
    /// Installed compensation per year (cumulative), MVAr per bus.
    pub q_rc: ReactivePlan,
    pub years: Vec<YearSummary>,
    pub opf_calls: usize,
}

/// Year-by-year planning: each year is a one-year problem on the network
/// left by the previous year, solved with the staged pipeline while the
/// base-case dispatch may add shunt compensation. The compensation found
/// stays installed in later years.
pub fn sequential_plan(net: &Network, opts: &PipelineOptions) -> Result<SequentialReport, PipelineError> {
    let years = net.years();
    let n_bus = net.n_bus();
    let mut built = vec![0u32; net.n_corridors()];
    let mut cumulative = vec![vec![0u32; years]; net.n_corridors()];
    let mut q_prev = vec![0.0; n_bus];
    let mut q_years = Vec::with_capacity(years);
    let mut summaries = Vec::with_capacity(years);
    let mut calls = 0;
    for y in 1..=years {
        let sub = net.single_year(y, &built)?;
        let mut o = opts.clone();
        o.q_rc = Some(ReactivePlan::from_years(vec![q_prev.clone()]));
        o.compensation = Some(opts.compensation_max);
        o.dc.seed = stage_seed(opts.dc.seed, 10 + y);
        o.ac.seed = stage_seed(opts.ac.seed, 10 + y);
        let r = run_four_stage(&sub, &o)?;
        calls += r.opf_calls();
        if !r.feasible {
            let fitness = r.stages.last().map_or(f64::INFINITY, |s| s.fitness);
            return Err(PipelineError::Year { year: y, fitness });
        }
        let col = r.plan.column(1);
        for (l, n) in col.iter().enumerate() {
            built[l] += n;
        }
        for (row, &b) in cumulative.iter_mut().zip(&built) {
            row[y - 1] = b;
        }
        // compensation added by the base dispatch of the chosen network
        let inp = OpfInput::for_year(&sub, 1, Some(&q_prev))?;
        let circuits = realize_topology(&sub, &r.plan, 1, Contingency::Base).map_err(ScreenError::from)?;
        let base = base_opf(&inp, &circuits, &o.base_opts());
        calls += 1;
        for (q, add) in q_prev.iter_mut().zip(&base.controls.q_comp) {
            *q += add.max(0.0);
        }
        q_years.push(q_prev.clone());
        summaries.push(YearSummary {
            year: y,
            lines_added: col.iter().sum(),
            cost: year_cost(&r.plan, &sub, 1),
            l_index: base.l_index,
        });
    }
    let plan = ExpansionPlan::from_cumulative(cumulative);
    let cost = discounted_cost(&plan, net);
    Ok(SequentialReport {
        plan,
        cost,
        q_rc: ReactivePlan::from_years(q_years),
        years: summaries,
        opf_calls: calls,
    })
}
