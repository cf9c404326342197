//! Discounted objective, fitness functions of the four problem variants,
//! the search-reduction gates and the staged planning pipeline.

mod fitness;
mod io;
mod pipeline;
mod tune;

pub use fitness::{Counters, PlanFitness, Problem, Strategies};
pub use io::{read_plan_csv, write_plan_csv, PlanCsvError};
pub use pipeline::{
    rigorous, run_four_stage, run_stage, sequential_plan, FourStageReport, PipelineError, PipelineOptions,
    SequentialReport, StageOutcome, StrategyFlags, YearSummary,
};
pub use tune::{tune_harness, TuneGrid, TuneRow, TuneTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contingency::SecurityReport;
use crate::network::{ExpansionPlan, Network, ReactivePlan};

/// Discounted line investment: every line is paid once, in its build year,
/// at that year's discount factor.
pub fn discounted_cost(plan: &ExpansionPlan, net: &Network) -> f64 {
    (1..=plan.years())
        .map(|y| net.horizon.discount[y - 1] * year_cost(plan, net, y))
        .sum()
}

/// Undiscounted cost of the lines built in `year`.
pub fn year_cost(plan: &ExpansionPlan, net: &Network, year: usize) -> f64 {
    net.corridors
        .iter()
        .map(|c| c.cost * plan.added_in(c.id, year) as f64)
        .sum()
}

/// Number of corridors receiving new lines over the horizon.
pub fn corridor_count(plan: &ExpansionPlan) -> usize {
    plan.used_corridors().len()
}

/// Corridor-count window `[floor(lo * n), ceil(hi * n)]`.
pub fn count_bounds(n: usize, lo: f64, hi: f64) -> (usize, usize) {
    let a = (lo * n as f64 + 1e-9).floor() as usize;
    let b = (hi * n as f64 - 1e-9).ceil() as usize;
    (a, b.max(a))
}

/// What the final security-constrained search inherits from the earlier
/// stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageContext {
    /// Corridors with new lines in the DC security plan.
    pub dc_cont: Vec<usize>,
    /// Corridors overloaded when screening the AC base plan.
    pub pc_viol: Vec<usize>,
    /// `pc_viol ∩ dc_cont`: forced into every candidate.
    pub pc_fix: Vec<usize>,
    /// Allowed number of corridors with new lines.
    pub bounds: (usize, usize),
    /// Initial cost cap.
    pub u_lim: f64,
    pub q_rc: Option<ReactivePlan>,
    /// Warm starts for the final search.
    pub warm: Vec<ExpansionPlan>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ContextError {
    #[error("the DC security plan adds no line")]
    EmptyDcPlan,
}

/// Builds the final-stage context. `bounds_pct` is the corridor-count
/// window relative to the DC security plan (0.9 and 1.3 by default).
pub fn build_stage_context(
    dc_sec_plan: &ExpansionPlan,
    ac_base_plan: &ExpansionPlan,
    screen: &SecurityReport,
    dc_sec_cost: f64,
    bounds_pct: (f64, f64),
    q_rc: Option<ReactivePlan>,
) -> Result<StageContext, ContextError> {
    let dc_cont = dc_sec_plan.used_corridors();
    if dc_cont.is_empty() {
        return Err(ContextError::EmptyDcPlan);
    }
    let pc_viol = screen.pc_viol.clone();
    let pc_fix: Vec<usize> = pc_viol.iter().copied().filter(|l| dc_cont.contains(l)).collect();
    let bounds = count_bounds(dc_cont.len(), bounds_pct.0, bounds_pct.1);
    Ok(StageContext {
        dc_cont,
        pc_viol,
        pc_fix,
        bounds,
        u_lim: 2.0 * dc_sec_cost,
        q_rc,
        warm: vec![dc_sec_plan.clone(), ac_base_plan.clone()],
    })
}

impl StageContext {
    /// Context when the DC security plan adds nothing: no fixed corridors,
    /// no count window and no cost cap.
    pub fn ungated(ac_base_plan: &ExpansionPlan, screen: &SecurityReport, q_rc: Option<ReactivePlan>) -> Self {
        StageContext {
            dc_cont: Vec::new(),
            pc_viol: screen.pc_viol.clone(),
            pc_fix: Vec::new(),
            bounds: (0, usize::MAX),
            u_lim: f64::MAX,
            q_rc,
            warm: vec![ac_base_plan.clone()],
        }
    }

    /// Searchable corridors of the final stage: `pc_viol ∪ dc_cont`.
    pub fn search_corridors(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.pc_viol.iter().chain(&self.dc_cont).copied().collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn empty_plan_costs_nothing() {
        let net = cases::garver6();
        assert_eq!(discounted_cost(&ExpansionPlan::for_network(&net), &net), 0.0);
    }

    #[test]
    fn reference_plan_costs() {
        let net = cases::garver6();
        let base = cases::garver_base_plan(&net);
        let secure = cases::garver_secure_plan(&net);
        let per_year = |p: &ExpansionPlan| (1..=3).map(|y| year_cost(p, &net, y)).collect::<Vec<_>>();
        assert_eq!(per_year(&base), vec![200.0, 0.0, 50.0]);
        assert_eq!(per_year(&secure), vec![329.0, 90.0, 40.0]);
        assert!((discounted_cost(&base, &net) - 223.9).abs() < 1e-9);
        assert!((discounted_cost(&secure, &net) - 413.73).abs() < 1e-9);
    }

    #[test]
    fn line_built_in_year_two_is_discounted_once() {
        let mut net = cases::garver6();
        net.horizon.discount = vec![1.0, 1.0 / 1.1, 1.0 / 1.21];
        let l = net.find_corridor(1, 2).unwrap();
        net.corridors[l].cost = 100.0;
        let mut plan = ExpansionPlan::for_network(&net);
        plan.set(l, 2, 1);
        plan.set(l, 3, 1);
        assert!((discounted_cost(&plan, &net) - 90.909_090_909).abs() < 1e-6);
    }

    #[test]
    fn bounds_rounding() {
        assert_eq!(count_bounds(9, 0.9, 1.3), (8, 12));
        assert_eq!(count_bounds(10, 0.9, 1.3), (9, 13));
        assert_eq!(count_bounds(1, 0.9, 1.3), (0, 2));
    }
}
