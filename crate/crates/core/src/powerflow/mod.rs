//! Network solvers: nodal admittance, AC Newton-Raphson, DC, the
//! small-angle linear branch model and the L-index stability indicator.

mod ac;
mod admittance;
mod dc;
mod lindex;
mod linear;

pub use ac::{polar_jacobian, solve_ac_pf, PfBus, PfOptions, PfProblem, PfSolution};
pub use admittance::{build_admittance, Admittance};
pub use dc::{solve_dc_pf, DcSolution};
pub use lindex::{l_index, LIndex};
pub use linear::{linearized_flows, LinearBranch};

use num_complex::Complex64;
use thiserror::Error;

use crate::network::Circuit;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("no circuits in service")]
    NoCircuits,
    #[error("bus {bus} has no circuit connected")]
    IsolatedBus { bus: usize },
    #[error("network is split; buses {buses:?} are not connected to the slack bus")]
    Island { buses: Vec<usize> },
    #[error("Jacobian is singular")]
    SingularJacobian,
    #[error("load-bus admittance partition is singular")]
    SingularLoadPartition,
    #[error("L-index needs at least one generator bus and one load bus")]
    NoLoadOrGeneratorBus,
}

/// Buses reachable from `root` through in-service circuits.
pub fn reachable(n_bus: usize, circuits: &[Circuit], root: usize) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n_bus];
    for c in circuits.iter().filter(|c| c.count > 0) {
        adj[c.from].push(c.to);
        adj[c.to].push(c.from);
    }
    let mut seen = vec![false; n_bus];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// AC flow of one circuit between complex bus voltages, pu, from each end.
pub(crate) fn branch_flow(c: &Circuit, vf: Complex64, vt: Complex64) -> (Complex64, Complex64) {
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(c.r, c.x);
    let ysh = Complex64::new(0.0, c.b);
    let i_f = (vf - vt) * ys + vf * ysh;
    let i_t = (vt - vf) * ys + vt * ysh;
    (vf * i_f.conj(), vt * i_t.conj())
}

/// Sending-end flow of one circuit and its partial derivatives with respect
/// to `(|V_f|, |V_t|, theta_f, theta_t)`, pu.
pub(crate) fn branch_flow_grad(c: &Circuit, vf: Complex64, vt: Complex64) -> (Complex64, [Complex64; 4]) {
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(c.r, c.x);
    let yff = ys + Complex64::new(0.0, c.b);
    let j = Complex64::new(0.0, 1.0);
    let s = vf * (yff * vf - ys * vt).conj();
    let cross = vf * (ys * vt).conj();
    let d_vf = s / vf.norm() + yff.conj() * vf.norm();
    let d_vt = -cross / vt.norm();
    (s, [d_vf, d_vt, -j * cross, j * cross])
}
