//! Feasibility-seeking dispatch: nonlinear base-case OPF, linearized
//! contingency OPF and the DC redispatch used by the screening stages.

mod base;
mod contingency;
mod dc;
mod linear;
mod subnet;

pub use base::{base_opf, BaseOpfOptions};
pub use contingency::{contingency_opf, contingency_opf_screened};
pub use dc::{dc_dispatch, DcDispatch};
pub use linear::{LinearModel, LinearState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{BusKind, Network, NetworkError};

/// Absolute tolerance on electrical constraints, pu.
pub const TOL_PU: f64 = 1e-4;
/// Absolute tolerance on the L-index bound.
pub const TOL_L: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationClass {
    /// Bus voltage magnitude bound.
    Voltage,
    /// Generator reactive output bound.
    ReactiveGen,
    /// Generator active output bound.
    ActiveGen,
    /// Circuit apparent power rating.
    Flow,
    /// Voltage stability bound.
    LIndex,
    /// Demand that cannot be supplied (DC screening only).
    Unserved,
}

impl ViolationClass {
    /// Penalty weight of the class.
    pub fn weight(self) -> f64 {
        match self {
            ViolationClass::Unserved => 1e5,
            _ => 1e4,
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            ViolationClass::LIndex => TOL_L,
            _ => TOL_PU,
        }
    }
}

/// Signed slack of one constraint: positive means violated by that amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub class: ViolationClass,
    /// Bus, generator bus or corridor index, depending on the class.
    pub element: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub entries: Vec<Violation>,
}

impl ViolationReport {
    pub fn push(&mut self, class: ViolationClass, element: usize, slack: f64) {
        self.entries.push(Violation {
            class,
            element,
            slack,
        });
    }

    pub fn is_feasible(&self) -> bool {
        self.entries.iter().all(|v| v.slack <= v.class.tolerance())
    }

    /// Constraints violated beyond tolerance.
    pub fn violated(&self) -> impl Iterator<Item = &Violation> {
        self.entries.iter().filter(|v| v.slack > v.class.tolerance())
    }

    pub fn worst(&self, class: ViolationClass) -> f64 {
        self.entries
            .iter()
            .filter(|v| v.class == class)
            .map(|v| v.slack)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sum w_c max(0, s_c)^2` over constraints violated beyond tolerance.
pub fn penalty(report: &ViolationReport) -> f64 {
    report
        .violated()
        .map(|v| v.class.weight() * v.slack * v.slack)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DispatchStatus {
    Feasible,
    Violating,
    /// No converged power flow at any trial point.
    Diverged,
    /// Buses carrying demand are cut off from the slack bus.
    Islanded { buses: Vec<usize> },
}

/// Generator-bus controls. Entries follow [`OpfInput::gens`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    /// Active output per generator bus, MW. The slack entry is the
    /// attained value.
    pub p_gen: Vec<f64>,
    /// Voltage setpoint per generator bus, pu.
    pub v_set: Vec<f64>,
    /// Shunt compensation added by the dispatch per bus, MVAr (only when
    /// compensation is allowed; on top of the fixed plan).
    #[serde(default)]
    pub q_comp: Vec<f64>,
}

/// Attained operating point of a dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Per-circuit apparent power at the sending and receiving ends, MVA,
    /// aligned with the circuit list of the topology.
    pub s_from: Vec<f64>,
    pub s_to: Vec<f64>,
    /// Reactive output per generator bus, MVAr.
    pub q_gen: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub controls: Controls,
    pub state: Option<OperatingState>,
    pub feasible: bool,
    pub status: DispatchStatus,
    pub violations: ViolationReport,
    pub penalty: f64,
    /// Base case only.
    pub l_index: Option<f64>,
    /// Outer iterations (base) or LP rounds (contingency).
    pub iterations: usize,
}

impl DispatchResult {
    pub(crate) fn failed(controls: Controls, status: DispatchStatus, penalty: f64) -> Self {
        DispatchResult {
            controls,
            state: None,
            feasible: false,
            status,
            violations: ViolationReport::default(),
            penalty,
            l_index: None,
            iterations: 0,
        }
    }
}

/// Penalty charged when no operating point could be evaluated at all.
pub const FAILED_PENALTY: f64 = 1e6;

/// Result for a topology that cuts demand off the slack bus.
pub(crate) fn islanded_result(inp: &OpfInput, base: &Controls, status: DispatchStatus) -> DispatchResult {
    let mut report = ViolationReport::default();
    if let DispatchStatus::Islanded { buses } = &status {
        for &b in buses {
            let cut = inp.p_load[b].hypot(inp.q_load[b]) / inp.base_mva;
            report.push(ViolationClass::Unserved, b, cut);
        }
    }
    let pen = penalty(&report).max(FAILED_PENALTY);
    let mut r = DispatchResult::failed(base.clone(), status, pen);
    r.violations = report;
    r
}

#[derive(Debug, Error, PartialEq)]
pub enum DispatchError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("reactive plan covers {got} buses, network has {want}")]
    ReactiveShape { got: usize, want: usize },
}

/// Aggregated generation at one voltage-controlled bus, MW / MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenBus {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// Everything a dispatch needs for one year except the topology.
#[derive(Debug, Clone, PartialEq)]
pub struct OpfInput {
    pub n_bus: usize,
    pub slack: usize,
    pub base_mva: f64,
    pub kinds: Vec<BusKind>,
    pub gens: Vec<GenBus>,
    /// Index into `gens` of the slack bus.
    pub slack_gen: usize,
    /// Demand per bus, MW / MVAr.
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    /// Fixed shunt compensation per bus, MVAr.
    pub q_rc: Vec<f64>,
    pub v_base_band: f64,
    pub v_cont_band: f64,
    pub l_max: f64,
}

impl OpfInput {
    pub fn for_year(net: &Network, year: usize, q_rc: Option<&[f64]>) -> Result<Self, DispatchError> {
        let demand = net.demand_for_year(year)?;
        let scale = net.gen_scale(year)?;
        let mut gens: Vec<GenBus> = Vec::new();
        for g in &net.generators {
            match gens.iter_mut().find(|x| x.bus == g.bus) {
                Some(x) => {
                    x.p_min += g.p_min * scale;
                    x.p_max += g.p_max * scale;
                    x.q_min += g.q_min * scale;
                    x.q_max += g.q_max * scale;
                }
                None => gens.push(GenBus {
                    bus: g.bus,
                    p_min: g.p_min * scale,
                    p_max: g.p_max * scale,
                    q_min: g.q_min * scale,
                    q_max: g.q_max * scale,
                }),
            }
        }
        gens.sort_by_key(|g| g.bus);
        let n = net.n_bus();
        let q_rc = match q_rc {
            Some(q) if q.len() != n => {
                return Err(DispatchError::ReactiveShape {
                    got: q.len(),
                    want: n,
                })
            }
            Some(q) => q.to_vec(),
            None => vec![0.0; n],
        };
        let slack_gen = gens.iter().position(|g| g.bus == net.slack).expect("slack has a generator");
        Ok(OpfInput {
            n_bus: n,
            slack: net.slack,
            base_mva: net.base_mva,
            kinds: net.buses.iter().map(|b| b.kind).collect(),
            gens,
            slack_gen,
            p_load: demand.p,
            q_load: demand.q,
            q_rc,
            v_base_band: net.limits.v_base_pct / 100.0,
            v_cont_band: net.limits.v_cont_pct / 100.0,
            l_max: net.limits.l_max,
        })
    }

    /// Generator-bus index of every bus, if it hosts generation.
    pub fn gen_of_bus(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_bus];
        for (k, g) in self.gens.iter().enumerate() {
            out[g.bus] = Some(k);
        }
        out
    }

    pub fn carries_load(&self, bus: usize) -> bool {
        self.p_load[bus] > 0.0 || self.q_load[bus] > 0.0
    }

    /// Generation at its lower limits and setpoints at nominal voltage.
    pub fn default_controls(&self) -> Controls {
        Controls {
            p_gen: self.gens.iter().map(|g| g.p_min).collect(),
            v_set: vec![1.0; self.gens.len()],
            q_comp: vec![0.0; self.n_bus],
        }
    }

    /// Copy with `q` MVAr of extra compensation per bus.
    pub fn with_compensation(&self, q: &[f64]) -> OpfInput {
        let mut out = self.clone();
        for (a, b) in out.q_rc.iter_mut().zip(q) {
            *a += b;
        }
        out
    }
}
