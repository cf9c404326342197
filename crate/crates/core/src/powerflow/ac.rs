use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{branch_flow, Admittance, PowerFlowError};
use crate::network::{BusKind, Circuit};

/// Bus specification for one AC power flow, pu on the system base.
#[derive(Debug, Clone, PartialEq)]
pub struct PfBus {
    pub kind: BusKind,
    /// Specified net active injection. At the slack bus this is the fixed
    /// (non-generator) part only.
    pub p_spec: f64,
    /// Specified net reactive injection excluding generator output:
    /// `-Q_load + q_rc`.
    pub q_spec: f64,
    /// Voltage magnitude setpoint at slack and PV buses.
    pub v_set: f64,
    pub q_gen_min: f64,
    pub q_gen_max: f64,
}

#[derive(Debug, Clone)]
pub struct PfProblem<'a> {
    pub buses: &'a [PfBus],
    pub circuits: &'a [Circuit],
    pub slack: usize,
    pub base_mva: f64,
}

#[derive(Debug, Clone)]
pub struct PfOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Switch PV buses whose reactive output leaves its limits to PQ.
    pub enforce_q_limits: bool,
    /// Warm start `(V, theta)`; flat start otherwise.
    pub start: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions {
            tol: 1e-6,
            max_iter: 30,
            enforce_q_limits: true,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PfSolution {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// Sending-end flow of one circuit of each group, MVA.
    pub s_from: Vec<Complex64>,
    /// Receiving-end flow of one circuit of each group, MVA.
    pub s_to: Vec<Complex64>,
    /// Generator reactive output at slack and PV buses, MVAr (zero at PQ
    /// buses, the limit value at switched buses).
    pub q_gen: Vec<f64>,
    pub slack_p: f64,
    pub slack_q: f64,
    /// Bus classification after limit switching.
    pub kinds: Vec<BusKind>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest power mismatch at exit, pu.
    pub max_residual: f64,
}

impl PfSolution {
    pub fn voltages(&self) -> Vec<Complex64> {
        self.v
            .iter()
            .zip(&self.theta)
            .map(|(&m, &a)| Complex64::from_polar(m, a))
            .collect()
    }

    /// Total active losses, MW.
    pub fn losses_mw(&self, circuits: &[Circuit]) -> f64 {
        circuits
            .iter()
            .zip(self.s_from.iter().zip(&self.s_to))
            .map(|(c, (f, t))| c.count as f64 * (f.re + t.re))
            .sum()
    }
}

/// Bus power injections `S = V conj(Y V)`.
pub(crate) fn injections(y: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += y[(i, k)] * v[k];
            }
            v[i] * acc.conj()
        })
        .collect()
}

/// Partial derivatives of bus injections in polar coordinates: rows are
/// active injections at `p_rows` followed by reactive injections at
/// `q_rows`; columns are angles at `a_cols` followed by magnitudes at
/// `m_cols`.
pub fn polar_jacobian(
    y: &DMatrix<Complex64>,
    v: &[Complex64],
    p_rows: &[usize],
    q_rows: &[usize],
    a_cols: &[usize],
    m_cols: &[usize],
) -> DMatrix<f64> {
    let n = v.len();
    let current: Vec<Complex64> = (0..n)
        .map(|i| (0..n).map(|k| y[(i, k)] * v[k]).sum())
        .collect();
    let unit: Vec<Complex64> = v.iter().map(|x| x / x.norm()).collect();
    let j = Complex64::new(0.0, 1.0);
    let ds_da = |i: usize, k: usize| -> Complex64 {
        let diag = if i == k { current[i] } else { Complex64::new(0.0, 0.0) };
        j * v[i] * (diag - y[(i, k)] * v[k]).conj()
    };
    let ds_dm = |i: usize, k: usize| -> Complex64 {
        let mut d = v[i] * (y[(i, k)] * unit[k]).conj();
        if i == k {
            d += current[i].conj() * unit[i];
        }
        d
    };
    let rows = p_rows.len() + q_rows.len();
    let cols = a_cols.len() + m_cols.len();
    let mut jac = DMatrix::zeros(rows, cols);
    for (r, &i) in p_rows.iter().enumerate() {
        for (c, &k) in a_cols.iter().enumerate() {
            jac[(r, c)] = ds_da(i, k).re;
        }
        for (c, &k) in m_cols.iter().enumerate() {
            jac[(r, a_cols.len() + c)] = ds_dm(i, k).re;
        }
    }
    for (r, &i) in q_rows.iter().enumerate() {
        let r = r + p_rows.len();
        for (c, &k) in a_cols.iter().enumerate() {
            jac[(r, c)] = ds_da(i, k).im;
        }
        for (c, &k) in m_cols.iter().enumerate() {
            jac[(r, a_cols.len() + c)] = ds_dm(i, k).im;
        }
    }
    jac
}

struct NewtonOutcome {
    converged: bool,
    iterations: usize,
    residual: f64,
}

fn newton(
    y: &DMatrix<Complex64>,
    kinds: &[BusKind],
    p_spec: &[f64],
    q_spec: &[f64],
    vm: &mut [f64],
    va: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome, PowerFlowError> {
    let n = kinds.len();
    let pvpq: Vec<usize> = (0..n).filter(|&i| kinds[i] != BusKind::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&i| kinds[i] == BusKind::Pq).collect();
    let mismatch = |vm: &[f64], va: &[f64]| -> (Vec<Complex64>, DVector<f64>, f64) {
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
        let s = injections(y, &v);
        let mut f = DVector::zeros(pvpq.len() + pq.len());
        for (r, &i) in pvpq.iter().enumerate() {
            f[r] = s[i].re - p_spec[i];
        }
        for (r, &i) in pq.iter().enumerate() {
            f[pvpq.len() + r] = s[i].im - q_spec[i];
        }
        let norm = f.amax();
        (v, f, norm)
    };

    let (mut v, mut f, mut norm) = mismatch(vm, va);
    let mut it = 0;
    while norm > tol {
        if it >= max_iter || !norm.is_finite() {
            return Ok(NewtonOutcome {
                converged: false,
                iterations: it,
                residual: norm,
            });
        }
        it += 1;
        let jac = polar_jacobian(y, &v, &pvpq, &pq, &pvpq, &pq);
        let dx = jac.lu().solve(&f).ok_or(PowerFlowError::SingularJacobian)?;
        for (r, &i) in pvpq.iter().enumerate() {
            va[i] -= dx[r];
        }
        for (r, &i) in pq.iter().enumerate() {
            vm[i] -= dx[pvpq.len() + r];
        }
        if vm.iter().any(|m| !(*m > 0.05 && *m < 5.0)) {
            return Ok(NewtonOutcome {
                converged: false,
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        (v, f, norm) = mismatch(vm, va);
    }
    Ok(NewtonOutcome {
        converged: true,
        iterations: it,
        residual: norm,
    })
}

/// Full AC Newton-Raphson power flow in polar form.
///
/// Divergence is reported through `converged == false`; a singular Jacobian
/// is an error.
pub fn solve_ac_pf(
    y: &Admittance,
    problem: &PfProblem<'_>,
    opts: &PfOptions,
) -> Result<PfSolution, PowerFlowError> {
    let buses = problem.buses;
    let n = buses.len();
    let mut kinds: Vec<BusKind> = buses.iter().map(|b| b.kind).collect();
    kinds[problem.slack] = BusKind::Slack;
    let p_spec: Vec<f64> = buses.iter().map(|b| b.p_spec).collect();
    let mut q_spec: Vec<f64> = buses.iter().map(|b| b.q_spec).collect();
    let (mut vm, mut va) = match &opts.start {
        Some((m, a)) => (m.clone(), a.clone()),
        None => (vec![1.0; n], vec![0.0; n]),
    };
    for i in 0..n {
        if kinds[i] != BusKind::Pq {
            vm[i] = buses[i].v_set;
        }
    }
    va[problem.slack] = 0.0;

    let mut fixed_q = vec![None::<f64>; n];
    let mut total_iter = 0;
    let outcome = loop {
        let out = newton(&y.y, &kinds, &p_spec, &q_spec, &mut vm, &mut va, opts.tol, opts.max_iter)?;
        total_iter += out.iterations;
        if !out.converged || !opts.enforce_q_limits {
            break out;
        }
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
        let s = injections(&y.y, &v);
        let mut switched = false;
        for i in 0..n {
            if kinds[i] != BusKind::Pv {
                continue;
            }
            let qg = s[i].im - buses[i].q_spec;
            let limit = if qg > buses[i].q_gen_max + 1e-9 {
                Some(buses[i].q_gen_max)
            } else if qg < buses[i].q_gen_min - 1e-9 {
                Some(buses[i].q_gen_min)
            } else {
                None
            };
            if let Some(q) = limit {
                kinds[i] = BusKind::Pq;
                q_spec[i] = buses[i].q_spec + q;
                fixed_q[i] = Some(q);
                switched = true;
            }
        }
        if !switched {
            break out;
        }
    };

    let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(vm[i], va[i])).collect();
    let s = injections(&y.y, &v);
    let base = problem.base_mva;
    let mut q_gen = vec![0.0; n];
    for i in 0..n {
        q_gen[i] = match (buses[i].kind, fixed_q[i]) {
            (_, Some(q)) => q * base,
            (BusKind::Pq, None) => 0.0,
            _ => (s[i].im - buses[i].q_spec) * base,
        };
    }
    let (s_from, s_to): (Vec<_>, Vec<_>) = problem
        .circuits
        .iter()
        .map(|c| {
            let (f, t) = branch_flow(c, v[c.from], v[c.to]);
            (f * base, t * base)
        })
        .unzip();
    let sl = problem.slack;
    Ok(PfSolution {
        slack_p: (s[sl].re - buses[sl].p_spec) * base,
        slack_q: q_gen[sl],
        v: vm,
        theta: va,
        s_from,
        s_to,
        q_gen,
        kinds,
        converged: outcome.converged,
        iterations: total_iter,
        max_residual: outcome.residual,
    })
}
