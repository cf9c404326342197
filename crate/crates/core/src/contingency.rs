//! N-1 enumeration, security screening of plans and the violated-corridor
//! set used to confine the final search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{
    base_opf, contingency_opf_screened, BaseOpfOptions, DispatchError, DispatchResult, DispatchStatus,
    OpfInput, ViolationClass,
};
use crate::network::{
    realize_topology, without_one, Circuit, Contingency, ExpansionPlan, Network, PlanError,
    ReactivePlan, TopologyError,
};

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

/// One single-circuit outage per corridor in service (sub-corridors count
/// separately).
pub fn enumerate_contingencies(circuits: &[Circuit]) -> Vec<Contingency> {
    let mut out: Vec<usize> = circuits.iter().filter(|c| c.count > 0).map(|c| c.corridor).collect();
    out.sort_unstable();
    out.dedup();
    out.into_iter().map(Contingency::Outage).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub contingency: Contingency,
    pub feasible: bool,
    pub status: DispatchStatus,
    pub penalty: f64,
    /// Corridors above rating before any redispatch.
    pub overloaded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearReport {
    pub year: usize,
    pub base: Verdict,
    pub l_index: Option<f64>,
    pub contingencies: Vec<Verdict>,
}

impl YearReport {
    /// Number of contingency states screened (ω_cont).
    pub fn omega(&self) -> usize {
        self.contingencies.len()
    }

    pub fn secure(&self) -> bool {
        self.base.feasible && self.contingencies.iter().all(|v| v.feasible)
    }

    pub fn verdicts(&self) -> usize {
        self.omega() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub years: Vec<YearReport>,
    /// Corridors overloaded in any screened state of any year.
    pub pc_viol: Vec<usize>,
    pub secure: bool,
    /// Dispatch problems solved while screening.
    pub opf_calls: usize,
}

fn base_verdict(r: &DispatchResult) -> Verdict {
    let mut overloaded: Vec<usize> = r
        .violations
        .violated()
        .filter(|v| v.class == ViolationClass::Flow)
        .map(|v| v.element)
        .collect();
    overloaded.sort_unstable();
    overloaded.dedup();
    Verdict {
        contingency: Contingency::Base,
        feasible: r.feasible,
        status: r.status.clone(),
        penalty: r.penalty,
        overloaded,
    }
}

/// Screens one year of `plan`: base-case OPF, then every single-circuit
/// outage starting from the base dispatch.
pub fn screen_year(
    net: &Network,
    plan: &ExpansionPlan,
    year: usize,
    q_rc: Option<&[f64]>,
    opts: &BaseOpfOptions,
) -> Result<YearReport, ScreenError> {
    let inp = OpfInput::for_year(net, year, q_rc)?;
    let circuits = realize_topology(net, plan, year, Contingency::Base)?;
    let base = base_opf(&inp, &circuits, opts);
    let states = enumerate_contingencies(&circuits);
    let contingencies: Vec<Verdict> = states
        .par_iter()
        .map(|&k| {
            let Contingency::Outage(l) = k else { unreachable!() };
            let topo = without_one(&circuits, l);
            let (r, overloaded) = contingency_opf_screened(&inp, &topo, &base.controls);
            Verdict {
                contingency: k,
                feasible: r.feasible,
                status: r.status,
                penalty: r.penalty,
                overloaded,
            }
        })
        .collect();
    Ok(YearReport {
        year,
        base: base_verdict(&base),
        l_index: base.l_index,
        contingencies,
    })
}

/// Screens every year of the horizon; the violated set is the union over
/// years.
pub fn security_screen(
    net: &Network,
    plan: &ExpansionPlan,
    q_rc: Option<&ReactivePlan>,
) -> Result<SecurityReport, ScreenError> {
    security_screen_with(net, plan, q_rc, &BaseOpfOptions::default())
}

/// [`security_screen`] with explicit base-case dispatch options.
pub fn security_screen_with(
    net: &Network,
    plan: &ExpansionPlan,
    q_rc: Option<&ReactivePlan>,
    opts: &BaseOpfOptions,
) -> Result<SecurityReport, ScreenError> {
    plan.validate(net)?;
    let mut years = Vec::with_capacity(net.years());
    for y in 1..=net.years() {
        years.push(screen_year(net, plan, y, q_rc.map(|q| q.year(y)), opts)?);
    }
    let mut pc_viol: Vec<usize> = years
        .iter()
        .flat_map(|y| {
            std::iter::once(&y.base)
                .chain(&y.contingencies)
                .flat_map(|v| v.overloaded.iter().copied())
        })
        .collect();
    pc_viol.sort_unstable();
    pc_viol.dedup();
    let secure = years.iter().all(|y| y.secure());
    let opf_calls = years.iter().map(|y| y.verdicts()).sum();
    Ok(SecurityReport {
        years,
        pc_viol,
        secure,
        opf_calls,
    })
}

/// Independent N-1 check of a full plan: every year's base case and every
/// single-circuit outage must be feasible.
pub fn n1_verify(
    net: &Network,
    plan: &ExpansionPlan,
    q_rc: Option<&ReactivePlan>,
) -> Result<(bool, SecurityReport), ScreenError> {
    n1_verify_with(net, plan, q_rc, &BaseOpfOptions::default())
}

pub fn n1_verify_with(
    net: &Network,
    plan: &ExpansionPlan,
    q_rc: Option<&ReactivePlan>,
    opts: &BaseOpfOptions,
) -> Result<(bool, SecurityReport), ScreenError> {
    let report = security_screen_with(net, plan, q_rc, opts)?;
    Ok((report.secure, report))
}
