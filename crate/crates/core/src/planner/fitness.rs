use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{corridor_count, discounted_cost};
use crate::contingency::enumerate_contingencies;
use crate::dispatch::{base_opf, contingency_opf, dc_dispatch, BaseOpfOptions, DispatchError, OpfInput};
use crate::mabc::Fitness;
use crate::network::{realize_topology, without_one, Contingency, ExpansionPlan, Network, ReactivePlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    DcBase,
    DcSecure,
    AcBase,
    AcSecure,
}

impl Problem {
    pub fn is_ac(self) -> bool {
        matches!(self, Problem::AcBase | Problem::AcSecure)
    }

    pub fn is_secure(self) -> bool {
        matches!(self, Problem::DcSecure | Problem::AcSecure)
    }
}

/// Evaluation shortcuts. None of them changes the verdict on a plan that is
/// actually evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Strategies {
    /// Reject plans whose number of corridors with new lines is outside
    /// this window.
    pub corridor_bounds: Option<(usize, usize)>,
    /// Initial cost cap: plans costing at least the cap are rejected; the
    /// cap drops to every cheaper feasible plan found.
    pub cost_cap: Option<f64>,
    /// Stop at the first infeasible operating state of a plan.
    pub early_abort: bool,
    /// Reuse per-year verdicts for an unchanged year topology.
    pub year_cache: bool,
}

impl Strategies {
    pub fn none() -> Self {
        Strategies::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub evaluations: usize,
    pub base_opf: usize,
    pub contingency_opf: usize,
    pub dc_dispatch: usize,
    pub gate_rejections: usize,
    pub cache_hits: usize,
}

impl Counters {
    /// AC dispatch problems solved (base and contingency).
    pub fn opf_calls(&self) -> usize {
        self.base_opf + self.contingency_opf
    }
}

#[derive(Debug, Clone, Copy)]
struct YearOutcome {
    feasible: bool,
    penalty: f64,
    base_opf: usize,
    contingency_opf: usize,
    dc_dispatch: usize,
}

/// Fitness of expansion plans for one problem variant: discounted cost when
/// every evaluated state is feasible, otherwise cost plus a fixed offset
/// (above any admissible plan cost) plus the constraint penalty. Plans
/// stopped by a gate score cost plus ten times the initial cost cap.
pub struct PlanFitness<'a> {
    net: &'a Network,
    problem: Problem,
    strategies: Strategies,
    inputs: Vec<OpfInput>,
    base_opts: BaseOpfOptions,
    offset: f64,
    u_lim: Option<f64>,
    trace: Vec<f64>,
    cache: HashMap<(usize, Vec<u32>), YearOutcome>,
    counters: Counters,
    best_feasible: Option<(f64, ExpansionPlan)>,
}

impl<'a> PlanFitness<'a> {
    pub fn new(
        net: &'a Network,
        problem: Problem,
        strategies: Strategies,
        q_rc: Option<&ReactivePlan>,
    ) -> Result<Self, DispatchError> {
        let inputs = (1..=net.years())
            .map(|y| OpfInput::for_year(net, y, q_rc.map(|q| q.year(y))))
            .collect::<Result<Vec<_>, _>>()?;
        let u_lim = strategies.cost_cap;
        Ok(PlanFitness {
            net,
            problem,
            strategies,
            inputs,
            base_opts: BaseOpfOptions::default(),
            offset: net.max_plan_cost().max(1.0),
            u_lim,
            trace: u_lim.into_iter().collect(),
            cache: HashMap::new(),
            counters: Counters::default(),
            best_feasible: None,
        })
    }

    /// Lets the base-case dispatch add shunt compensation (sequential
    /// planning with reactive support).
    pub fn with_compensation(mut self, max_mvar: f64) -> Self {
        self.base_opts.allow_compensation = true;
        self.base_opts.compensation_max = max_mvar;
        self
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Current cost cap.
    pub fn u_lim(&self) -> Option<f64> {
        self.u_lim
    }

    /// Cap after every batch, starting with the initial value.
    pub fn u_lim_trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn base_options(&self) -> &BaseOpfOptions {
        &self.base_opts
    }

    /// Cheapest fully feasible plan evaluated so far.
    pub fn best_feasible(&self) -> Option<&(f64, ExpansionPlan)> {
        self.best_feasible.as_ref()
    }

    fn rejection(&self, cost: f64) -> f64 {
        let cap0 = self.strategies.cost_cap.unwrap_or(self.offset);
        cost + 10.0 * cap0
    }

    /// Gate check without any dispatch.
    fn gate(&self, plan: &ExpansionPlan, cost: f64) -> bool {
        if let Some((lo, hi)) = self.strategies.corridor_bounds {
            let n = corridor_count(plan);
            if n < lo || n > hi {
                return false;
            }
        }
        match self.u_lim {
            Some(cap) => cost < cap,
            None => true,
        }
    }

    fn year_outcome(&self, plan: &ExpansionPlan, year: usize) -> YearOutcome {
        let inp = &self.inputs[year - 1];
        let circuits = realize_topology(self.net, plan, year, Contingency::Base).expect("valid plan");
        let mut out = YearOutcome {
            feasible: true,
            penalty: 0.0,
            base_opf: 0,
            contingency_opf: 0,
            dc_dispatch: 0,
        };
        let states = if self.problem.is_secure() {
            enumerate_contingencies(&circuits)
        } else {
            Vec::new()
        };
        if self.problem.is_ac() {
            let base = base_opf(inp, &circuits, &self.base_opts);
            out.base_opf += 1;
            out.penalty += base.penalty;
            if !base.feasible {
                out.feasible = false;
                return out;
            }
            for k in states {
                let Contingency::Outage(l) = k else { continue };
                let r = contingency_opf(inp, &without_one(&circuits, l), &base.controls);
                out.contingency_opf += 1;
                if !r.feasible {
                    out.feasible = false;
                    out.penalty += r.penalty;
                    if self.strategies.early_abort {
                        break;
                    }
                }
            }
        } else {
            let base = dc_dispatch(inp, &circuits, None);
            out.dc_dispatch += 1;
            out.penalty += base.penalty;
            if !base.feasible {
                out.feasible = false;
                if self.strategies.early_abort {
                    return out;
                }
            }
            for k in states {
                let Contingency::Outage(l) = k else { continue };
                let r = dc_dispatch(inp, &without_one(&circuits, l), Some(&base.p_gen));
                out.dc_dispatch += 1;
                if !r.feasible {
                    out.feasible = false;
                    out.penalty += r.penalty;
                    if self.strategies.early_abort {
                        break;
                    }
                }
            }
        }
        out
    }

    /// Fitness of a batch; dispatch problems run in parallel.
    pub fn evaluate_batch(&mut self, plans: &[ExpansionPlan]) -> Vec<f64> {
        let n = plans.len();
        self.counters.evaluations += n;
        let costs: Vec<f64> = plans.iter().map(|p| discounted_cost(p, self.net)).collect();
        let alive: Vec<bool> = plans.iter().zip(&costs).map(|(p, &c)| self.gate(p, c)).collect();
        self.counters.gate_rejections += alive.iter().filter(|a| !**a).count();
        let mut active = alive.clone();
        let mut feasible = alive.clone();
        let mut pen = vec![0.0; n];

        for year in 1..=self.net.years() {
            let todo: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
            if todo.is_empty() {
                break;
            }
            let outcomes: Vec<YearOutcome> = if self.strategies.year_cache {
                let mut keys: Vec<Vec<u32>> = Vec::new();
                let mut owner: Vec<usize> = Vec::new();
                for &i in &todo {
                    let col = plans[i].column(year);
                    if self.cache.contains_key(&(year, col.clone())) || keys.contains(&col) {
                        self.counters.cache_hits += 1;
                    } else {
                        keys.push(col);
                        owner.push(i);
                    }
                }
                let fresh: Vec<YearOutcome> = owner
                    .par_iter()
                    .map(|&i| self.year_outcome(&plans[i], year))
                    .collect();
                for (col, o) in keys.into_iter().zip(fresh) {
                    self.tally(&o);
                    self.cache.insert((year, col), o);
                }
                todo.iter()
                    .map(|&i| self.cache[&(year, plans[i].column(year))])
                    .collect()
            } else {
                let fresh: Vec<YearOutcome> = todo
                    .par_iter()
                    .map(|&i| self.year_outcome(&plans[i], year))
                    .collect();
                for o in &fresh {
                    self.tally(o);
                }
                fresh
            };
            for (&i, o) in todo.iter().zip(outcomes) {
                pen[i] += o.penalty;
                if !o.feasible {
                    feasible[i] = false;
                    if self.strategies.early_abort {
                        active[i] = false;
                    }
                }
            }
        }

        let mut values = Vec::with_capacity(n);
        let mut batch_best: Option<usize> = None;
        for i in 0..n {
            let v = if !alive[i] {
                self.rejection(costs[i])
            } else if feasible[i] {
                if batch_best.is_none_or(|b| costs[i] < costs[b]) {
                    batch_best = Some(i);
                }
                costs[i]
            } else {
                costs[i] + self.offset + pen[i]
            };
            values.push(v);
        }
        if let Some(b) = batch_best {
            if self.best_feasible.as_ref().is_none_or(|(c, _)| costs[b] < *c) {
                self.best_feasible = Some((costs[b], plans[b].clone()));
            }
            if let Some(cap) = self.u_lim {
                if costs[b] < cap {
                    self.u_lim = Some(costs[b]);
                }
            }
        }
        if let Some(cap) = self.u_lim {
            self.trace.push(cap);
        }
        values
    }

    fn tally(&mut self, o: &YearOutcome) {
        self.counters.base_opf += o.base_opf;
        self.counters.contingency_opf += o.contingency_opf;
        self.counters.dc_dispatch += o.dc_dispatch;
    }

    /// Fitness of a single plan.
    pub fn value(&mut self, plan: &ExpansionPlan) -> f64 {
        self.evaluate_batch(std::slice::from_ref(plan))[0]
    }

    /// Whether `value` denotes a fully feasible, evaluated plan.
    pub fn is_feasible_value(&self, plan: &ExpansionPlan, value: f64) -> bool {
        (value - discounted_cost(plan, self.net)).abs() < 1e-9 * (1.0 + value.abs())
    }
}

impl Fitness for PlanFitness<'_> {
    fn evaluate(&mut self, plans: &[ExpansionPlan]) -> Vec<f64> {
        self.evaluate_batch(plans)
    }
}
