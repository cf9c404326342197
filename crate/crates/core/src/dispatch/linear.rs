use nalgebra::{DMatrix, DVector};

use super::subnet::Subnet;
use super::OpfInput;
use crate::powerflow::LinearBranch;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    State(usize),
    Control(usize),
    Zero,
}

/// Affine function `c + g . du` of the control deviations.
#[derive(Debug, Clone)]
pub(crate) struct Affine {
    pub c: f64,
    pub g: Vec<f64>,
}

impl Affine {
    fn zero(n: usize) -> Self {
        Affine {
            c: 0.0,
            g: vec![0.0; n],
        }
    }

    fn axpy(&mut self, a: f64, other: &Affine) {
        self.c += a * other.c;
        for (x, y) in self.g.iter_mut().zip(&other.g) {
            *x += a * y;
        }
    }

    #[cfg(test)]
    pub fn at(&self, du: &[f64]) -> f64 {
        self.c + self.g.iter().zip(du).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Linear power flow of a connected subnet, written in affine form
/// `x = x0 + S du` around reference controls `u0`.
///
/// States are angles at non-slack buses and magnitudes at buses without
/// voltage control; controls are the active outputs of non-slack generator
/// buses followed by the voltage setpoints of all connected generator
/// buses (pu).
#[derive(Debug, Clone)]
pub struct LinearModel {
    sub: Subnet,
    slack: usize,
    theta_slot: Vec<Slot>,
    v_slot: Vec<Slot>,
    branches: Vec<LinearBranch>,
    /// Per subnet generator: local bus and P-control index.
    gen_bus: Vec<usize>,
    p_ctrl: Vec<Option<usize>>,
    v_ctrl: Vec<usize>,
    u0: Vec<f64>,
    x0: DVector<f64>,
    sens: DMatrix<f64>,
    p_load: Vec<f64>,
    q_net: Vec<f64>,
}

/// Linear-model operating point, pu, local bus numbering.
#[derive(Debug, Clone)]
pub struct LinearState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    /// `(P_from, Q_from, P_to, Q_to)` of one circuit per group.
    pub flows: Vec<[f64; 4]>,
    /// Active and reactive output per subnet generator.
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
}

impl LinearModel {
    /// `p_gen` (MW) and `v_set` (pu) are indexed like `inp.gens`.
    pub(crate) fn new(inp: &OpfInput, sub: Subnet, p_gen: &[f64], v_set: &[f64]) -> Option<Self> {
        let n = sub.n();
        let base = inp.base_mva;
        let slack = sub.local[inp.slack].expect("slack in subnet");
        let mut gen_bus = Vec::new();
        let mut p_ctrl = Vec::new();
        let mut v_ctrl = Vec::new();
        let mut u0 = Vec::new();
        for &g in &sub.gens {
            let lb = sub.local[inp.gens[g].bus].unwrap();
            gen_bus.push(lb);
            if lb == slack {
                p_ctrl.push(None);
            } else {
                p_ctrl.push(Some(u0.len()));
                u0.push(p_gen[g] / base);
            }
        }
        for (k, &g) in sub.gens.iter().enumerate() {
            v_ctrl.push(u0.len());
            let _ = k;
            u0.push(v_set[g]);
        }
        let n_u = u0.len();

        let mut theta_slot = vec![Slot::Zero; n];
        let mut v_slot = vec![Slot::Zero; n];
        let mut n_x = 0;
        for i in 0..n {
            if i != slack {
                theta_slot[i] = Slot::State(n_x);
                n_x += 1;
            }
        }
        for (k, &lb) in gen_bus.iter().enumerate() {
            v_slot[lb] = Slot::Control(v_ctrl[k]);
        }
        for slot in v_slot.iter_mut() {
            if *slot == Slot::Zero {
                *slot = Slot::State(n_x);
                n_x += 1;
            }
        }

        let p_load: Vec<f64> = sub.buses.iter().map(|&i| inp.p_load[i] / base).collect();
        let q_net: Vec<f64> = sub
            .buses
            .iter()
            .map(|&i| (inp.q_rc[i] - inp.q_load[i]) / base)
            .collect();

        // Balance rows share the index of the state they pair with:
        // P at bus i <-> theta_i, Q at bus i <-> V_i.
        let mut m = DMatrix::<f64>::zeros(n_x, n_x);
        let mut b = DMatrix::<f64>::zeros(n_x, n_u);
        let mut r = DVector::<f64>::zeros(n_x);
        let branches: Vec<LinearBranch> = sub.circuits.iter().map(LinearBranch::of).collect();
        let put = |row: usize, slot: Slot, coef: f64, m: &mut DMatrix<f64>, b: &mut DMatrix<f64>| match slot {
            Slot::State(k) => m[(row, k)] += coef,
            Slot::Control(j) => b[(row, j)] -= coef,
            Slot::Zero => {}
        };
        for (c, lb) in sub.circuits.iter().zip(&branches) {
            let k = c.count as f64;
            for (i, j) in [(c.from, c.to), (c.to, c.from)] {
                let slots = [v_slot[i], v_slot[j], theta_slot[i], theta_slot[j]];
                if let Slot::State(row) = theta_slot[i] {
                    for (s, a) in slots.iter().zip(lb.p_coeffs()) {
                        put(row, *s, k * a, &mut m, &mut b);
                    }
                }
                if let Slot::State(row) = v_slot[i] {
                    let (qc, q0) = lb.q_coeffs();
                    for (s, a) in slots.iter().zip(qc) {
                        put(row, *s, k * a, &mut m, &mut b);
                    }
                    r[row] -= k * q0;
                }
            }
        }
        for i in 0..n {
            if let Slot::State(row) = theta_slot[i] {
                r[row] -= p_load[i];
            }
            if let Slot::State(row) = v_slot[i] {
                r[row] += q_net[i];
            }
        }
        for (k, &lb) in gen_bus.iter().enumerate() {
            if let (Some(j), Slot::State(row)) = (p_ctrl[k], theta_slot[lb]) {
                b[(row, j)] += 1.0;
            }
        }
        let lu = m.lu();
        let sens = lu.solve(&b)?;
        let u = DVector::from_vec(u0.clone());
        let x0 = lu.solve(&(r + &b * u))?;
        if !x0.iter().all(|x| x.is_finite()) {
            return None;
        }
        Some(LinearModel {
            sub,
            slack,
            theta_slot,
            v_slot,
            branches,
            gen_bus,
            p_ctrl,
            v_ctrl,
            u0,
            x0,
            sens,
            p_load,
            q_net,
        })
    }

    pub(crate) fn subnet(&self) -> &Subnet {
        &self.sub
    }

    pub fn n_controls(&self) -> usize {
        self.u0.len()
    }

    pub(crate) fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub(crate) fn p_ctrl(&self) -> &[Option<usize>] {
        &self.p_ctrl
    }

    pub(crate) fn v_ctrl(&self) -> &[usize] {
        &self.v_ctrl
    }

    pub(crate) fn gen_bus(&self) -> &[usize] {
        &self.gen_bus
    }

    fn slot_affine(&self, s: Slot) -> Affine {
        let n_u = self.n_controls();
        match s {
            Slot::State(k) => Affine {
                c: self.x0[k],
                g: self.sens.row(k).iter().copied().collect(),
            },
            Slot::Control(j) => {
                let mut a = Affine::zero(n_u);
                a.c = self.u0[j];
                a.g[j] = 1.0;
                a
            }
            Slot::Zero => Affine::zero(n_u),
        }
    }

    pub(crate) fn v_affine(&self, bus: usize) -> Affine {
        self.slot_affine(self.v_slot[bus])
    }

    /// `(P, Q)` leaving `i` on one circuit of group `c`; `reverse` for the
    /// receiving end.
    pub(crate) fn flow_affine(&self, c: usize, reverse: bool) -> (Affine, Affine) {
        let cir = &self.sub.circuits[c];
        let (i, j) = if reverse { (cir.to, cir.from) } else { (cir.from, cir.to) };
        let lb = &self.branches[c];
        let slots = [self.v_slot[i], self.v_slot[j], self.theta_slot[i], self.theta_slot[j]];
        let n_u = self.n_controls();
        let mut p = Affine::zero(n_u);
        let mut q = Affine::zero(n_u);
        let (qc, q0) = lb.q_coeffs();
        for (k, s) in slots.iter().enumerate() {
            let a = self.slot_affine(*s);
            p.axpy(lb.p_coeffs()[k], &a);
            q.axpy(qc[k], &a);
        }
        q.c += q0;
        (p, q)
    }

    /// Reactive output of subnet generator `k`.
    pub(crate) fn q_gen_affine(&self, k: usize) -> Affine {
        let bus = self.gen_bus[k];
        let mut out = Affine::zero(self.n_controls());
        for (c, cir) in self.sub.circuits.iter().enumerate() {
            let n = cir.count as f64;
            if cir.from == bus {
                out.axpy(n, &self.flow_affine(c, false).1);
            } else if cir.to == bus {
                out.axpy(n, &self.flow_affine(c, true).1);
            }
        }
        out.c -= self.q_net[bus];
        out
    }

    /// Active output of the slack generator.
    pub(crate) fn p_slack_affine(&self) -> Affine {
        let mut out = Affine::zero(self.n_controls());
        for (c, cir) in self.sub.circuits.iter().enumerate() {
            let n = cir.count as f64;
            if cir.from == self.slack {
                out.axpy(n, &self.flow_affine(c, false).0);
            } else if cir.to == self.slack {
                out.axpy(n, &self.flow_affine(c, true).0);
            }
        }
        out.c += self.p_load[self.slack];
        out
    }

    /// Operating point at control deviation `du`.
    pub fn state_at(&self, du: &[f64]) -> LinearState {
        let n = self.sub.n();
        let u: Vec<f64> = self.u0.iter().zip(du).map(|(a, b)| a + b).collect();
        let x = &self.x0 + &self.sens * DVector::from_column_slice(du);
        let get = |s: Slot| match s {
            Slot::State(k) => x[k],
            Slot::Control(j) => u[j],
            Slot::Zero => 0.0,
        };
        let v: Vec<f64> = (0..n).map(|i| get(self.v_slot[i])).collect();
        let theta: Vec<f64> = (0..n).map(|i| get(self.theta_slot[i])).collect();
        let flows: Vec<[f64; 4]> = self
            .sub
            .circuits
            .iter()
            .zip(&self.branches)
            .map(|(c, lb)| {
                let (pf, qf) = lb.flow(v[c.from], v[c.to], theta[c.from], theta[c.to]);
                let (pt, qt) = lb.flow(v[c.to], v[c.from], theta[c.to], theta[c.from]);
                [pf, qf, pt, qt]
            })
            .collect();
        let mut p_inj = vec![0.0; n];
        let mut q_inj = vec![0.0; n];
        for (c, f) in self.sub.circuits.iter().zip(&flows) {
            let k = c.count as f64;
            p_inj[c.from] += k * f[0];
            q_inj[c.from] += k * f[1];
            p_inj[c.to] += k * f[2];
            q_inj[c.to] += k * f[3];
        }
        let p_gen = self
            .gen_bus
            .iter()
            .zip(&self.p_ctrl)
            .map(|(&b, pc)| match pc {
                Some(j) => u[*j],
                None => p_inj[b] + self.p_load[b],
            })
            .collect();
        let q_gen = self
            .gen_bus
            .iter()
            .map(|&b| q_inj[b] - self.q_net[b])
            .collect();
        LinearState {
            v,
            theta,
            flows,
            p_gen,
            q_gen,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{realize_topology, Circuit, Contingency};

    fn garver_model() -> (OpfInput, LinearModel) {
        let net = crate::cases::garver6();
        let plan = crate::cases::garver_secure_plan(&net);
        let inp = OpfInput::for_year(&net, 1, None).unwrap();
        let c = realize_topology(&net, &plan, 1, Contingency::Base).unwrap();
        let sub = Subnet::build(&inp, &c).unwrap();
        let p = vec![80.0, 250.0, 430.0];
        let v = vec![1.02, 1.03, 1.04];
        let m = LinearModel::new(&inp, sub, &p, &v).unwrap();
        (inp, m)
    }

    #[test]
    fn nodal_balance_holds_at_reference() {
        let (inp, m) = garver_model();
        let s = m.state_at(&vec![0.0; m.n_controls()]);
        // generation equals demand: the linear model is lossless in P
        let gen: f64 = s.p_gen.iter().sum();
        assert!((gen * 100.0 - 760.0).abs() < 1e-6, "{gen}");
        // P balance at every bus
        let sub = m.subnet();
        for (li, &i) in sub.buses.iter().enumerate() {
            let mut out = 0.0;
            for (c, f) in sub.circuits.iter().zip(&s.flows) {
                if c.from == li {
                    out += c.count as f64 * f[0];
                } else if c.to == li {
                    out += c.count as f64 * f[2];
                }
            }
            let g = m
                .gen_bus()
                .iter()
                .position(|&b| b == li)
                .map(|k| s.p_gen[k])
                .unwrap_or(0.0);
            assert!((out - (g - inp.p_load[i] / 100.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn affine_outputs_match_state() {
        let (_, m) = garver_model();
        let n_u = m.n_controls();
        let du: Vec<f64> = (0..n_u).map(|j| 0.01 * ((j as f64) - 1.5)).collect();
        let s = m.state_at(&du);
        for c in 0..m.subnet().circuits.len() {
            let (p, q) = m.flow_affine(c, false);
            assert!((p.at(&du) - s.flows[c][0]).abs() < 1e-9);
            assert!((q.at(&du) - s.flows[c][1]).abs() < 1e-9);
            let (p, q) = m.flow_affine(c, true);
            assert!((p.at(&du) - s.flows[c][2]).abs() < 1e-9);
            assert!((q.at(&du) - s.flows[c][3]).abs() < 1e-9);
        }
        for k in 0..m.gen_bus().len() {
            assert!((m.q_gen_affine(k).at(&du) - s.q_gen[k]).abs() < 1e-9);
        }
        let slack_k = m.p_ctrl().iter().position(|p| p.is_none()).unwrap();
        assert!((m.p_slack_affine().at(&du) - s.p_gen[slack_k]).abs() < 1e-9);
    }

    #[test]
    fn lossless_chain_matches_dc_flow() {
        // r = 0, b = 0 and flat voltages: active flows equal the B-theta flows
        let net = crate::cases::garver6();
        let mut inp = OpfInput::for_year(&net, 1, None).unwrap();
        inp.q_load = vec![0.0; 6];
        let c: Vec<Circuit> = [(0usize, 1usize, 0.4), (1, 5, 0.3), (1, 2, 0.2), (0, 3, 0.6), (3, 4, 0.2)]
            .iter()
            .map(|&(f, t, x)| Circuit { corridor: 0, from: f, to: t, r: 0.0, x, b: 0.0, rating: 100.0, count: 1 })
            .collect();
        let sub = Subnet::build(&inp, &c).unwrap();
        let p = vec![100.0, 300.0, 360.0];
        let m = LinearModel::new(&inp, sub, &p, &[1.0; 3]).unwrap();
        let s = m.state_at(&vec![0.0; m.n_controls()]);
        let mut inj = vec![0.0; 6];
        for (k, g) in inp.gens.iter().enumerate() {
            inj[g.bus] += p[k];
        }
        for i in 0..6 {
            inj[i] -= inp.p_load[i];
        }
        let dc = crate::powerflow::solve_dc_pf(6, &c, &inj, 0, 100.0).unwrap();
        for (k, f) in s.flows.iter().enumerate() {
            assert!((f[0] * 100.0 - dc.flow[k]).abs() < 1e-6, "{k}: {} vs {}", f[0] * 100.0, dc.flow[k]);
        }
    }
}
