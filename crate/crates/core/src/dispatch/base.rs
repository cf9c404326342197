use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::subnet::Subnet;
use super::{
    dc_dispatch, islanded_result, penalty, Controls, DispatchResult, DispatchStatus, OperatingState,
    OpfInput, ViolationClass, ViolationReport, FAILED_PENALTY,
};
use crate::lp::{Lp, Var};
use crate::network::{BusKind, Circuit};
use crate::powerflow::{
    branch_flow_grad, build_admittance, l_index, polar_jacobian, solve_ac_pf, Admittance, PfBus,
    PfOptions, PfProblem, PfSolution,
};

#[derive(Debug, Clone)]
pub struct BaseOpfOptions {
    /// Outer linearization iterations.
    pub max_outer: usize,
    /// Let the dispatch add shunt compensation at load buses.
    pub allow_compensation: bool,
    /// Upper limit of added compensation per bus, MVAr.
    pub compensation_max: f64,
    /// Starting controls; a DC dispatch otherwise.
    pub start: Option<Controls>,
}

impl Default for BaseOpfOptions {
    fn default() -> Self {
        BaseOpfOptions {
            max_outer: 15,
            allow_compensation: false,
            compensation_max: 0.0,
            start: None,
        }
    }
}

const ELASTIC: f64 = 1e3;
const STEP_COST: f64 = 1e-2;
const COMP_COST: f64 = 1.0;
const V_MARGIN: f64 = 2e-3;
const Q_MARGIN: f64 = 2e-3;
const P_MARGIN: f64 = 2e-3;
const S_MARGIN: f64 = 5e-3;
const V_TRUST: f64 = 0.03;
const L_STEP: f64 = 0.01;

/// Nonlinear base-case OPF by successive linear programming.
///
/// Each outer iteration solves a Newton-Raphson power flow at the current
/// controls (voltage-controlled buses held), linearizes voltages, generator
/// outputs and circuit flows with respect to the controls through the power
/// flow Jacobian, and takes an elastic LP step inside a trust region. A
/// violated L-index bound pushes voltage setpoints upwards. A feasible point
/// is confirmed by an independent power flow with reactive limits enforced.
pub fn base_opf(inp: &OpfInput, circuits: &[Circuit], opts: &BaseOpfOptions) -> DispatchResult {
    let fallback = opts.start.clone().unwrap_or_else(|| inp.default_controls());
    let sub = match Subnet::build(inp, circuits) {
        Ok(s) => s,
        Err(status) => return islanded_result(inp, &fallback, status),
    };
    let y = match build_admittance(sub.n(), &sub.circuits) {
        Ok(y) => y,
        Err(_) => return DispatchResult::failed(fallback, DispatchStatus::Diverged, FAILED_PENALTY),
    };
    let ctx = Ctx::new(inp, &sub, &y, opts);
    ctx.run(opts, circuits)
}

struct Ctx<'a> {
    inp: &'a OpfInput,
    sub: &'a Subnet,
    y: &'a Admittance,
    slack: usize,
    /// Local bus per subnet generator.
    gen_bus: Vec<usize>,
    p_ctrl: Vec<Option<usize>>,
    v_ctrl: Vec<usize>,
    /// Local load buses and their compensation control, if any.
    pq: Vec<usize>,
    q_ctrl: Vec<Option<usize>>,
    ns: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    band: f64,
}

struct Point {
    u: Vec<f64>,
    pf: PfSolution,
    report: ViolationReport,
    l: Option<f64>,
    pen: f64,
}

impl<'a> Ctx<'a> {
    fn new(inp: &'a OpfInput, sub: &'a Subnet, y: &'a Admittance, opts: &BaseOpfOptions) -> Self {
        let base = inp.base_mva;
        let band = inp.v_base_band;
        let slack = sub.local[inp.slack].unwrap();
        let mut gen_bus = Vec::new();
        let mut p_ctrl = Vec::new();
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for &g in &sub.gens {
            let lb = sub.local[inp.gens[g].bus].unwrap();
            gen_bus.push(lb);
            if lb == slack {
                p_ctrl.push(None);
            } else {
                p_ctrl.push(Some(lo.len()));
                lo.push(inp.gens[g].p_min / base);
                hi.push(inp.gens[g].p_max / base);
            }
        }
        let mut v_ctrl = Vec::new();
        for _ in &sub.gens {
            v_ctrl.push(lo.len());
            lo.push(1.0 - band);
            hi.push(1.0 + band);
        }
        let pq: Vec<usize> = (0..sub.n()).filter(|i| !gen_bus.contains(i)).collect();
        let mut q_ctrl = Vec::new();
        for &i in &pq {
            if opts.allow_compensation && inp.carries_load(sub.buses[i]) {
                q_ctrl.push(Some(lo.len()));
                lo.push(0.0);
                hi.push(opts.compensation_max / base);
            } else {
                q_ctrl.push(None);
            }
        }
        let ns = (0..sub.n()).filter(|&i| i != slack).collect();
        Ctx {
            inp,
            sub,
            y,
            slack,
            gen_bus,
            p_ctrl,
            v_ctrl,
            pq,
            q_ctrl,
            ns,
            lo,
            hi,
            band,
        }
    }

    fn n_u(&self) -> usize {
        self.lo.len()
    }

    fn initial(&self, opts: &BaseOpfOptions, circuits: &[Circuit]) -> Vec<f64> {
        let base = self.inp.base_mva;
        let mut u = vec![0.0; self.n_u()];
        let (p, v) = match &opts.start {
            Some(c) => (c.p_gen.clone(), c.v_set.clone()),
            None => {
                let d = dc_dispatch(self.inp, circuits, None);
                (d.p_gen, vec![1.0 + 0.5 * self.band; self.inp.gens.len()])
            }
        };
        for (k, &g) in self.sub.gens.iter().enumerate() {
            if let Some(j) = self.p_ctrl[k] {
                u[j] = p[g] / base;
            }
            u[self.v_ctrl[k]] = v[g];
        }
        if let Some(c) = &opts.start {
            for (k, &i) in self.pq.iter().enumerate() {
                if let (Some(j), Some(q)) = (self.q_ctrl[k], c.q_comp.get(self.sub.buses[i])) {
                    u[j] = q / base;
                }
            }
        }
        for j in 0..u.len() {
            u[j] = u[j].clamp(self.lo[j], self.hi[j]);
        }
        u
    }

    fn pf_buses(&self, u: &[f64]) -> Vec<PfBus> {
        let inp = self.inp;
        let base = inp.base_mva;
        let mut buses: Vec<PfBus> = self
            .sub
            .buses
            .iter()
            .map(|&i| PfBus {
                kind: BusKind::Pq,
                p_spec: -inp.p_load[i] / base,
                q_spec: (inp.q_rc[i] - inp.q_load[i]) / base,
                v_set: 1.0,
                q_gen_min: 0.0,
                q_gen_max: 0.0,
            })
            .collect();
        for (k, &g) in self.sub.gens.iter().enumerate() {
            let b = &mut buses[self.gen_bus[k]];
            b.kind = if self.gen_bus[k] == self.slack {
                BusKind::Slack
            } else {
                BusKind::Pv
            };
            if let Some(j) = self.p_ctrl[k] {
                b.p_spec += u[j];
            }
            b.v_set = u[self.v_ctrl[k]];
            b.q_gen_min = inp.gens[g].q_min / base;
            b.q_gen_max = inp.gens[g].q_max / base;
        }
        for (k, &i) in self.pq.iter().enumerate() {
            if let Some(j) = self.q_ctrl[k] {
                buses[i].q_spec += u[j];
            }
        }
        buses
    }

    fn power_flow(&self, u: &[f64], enforce: bool, start: Option<&PfSolution>) -> Option<PfSolution> {
        let buses = self.pf_buses(u);
        let problem = PfProblem {
            buses: &buses,
            circuits: &self.sub.circuits,
            slack: self.slack,
            base_mva: self.inp.base_mva,
        };
        let opts = PfOptions {
            enforce_q_limits: enforce,
            start: start.map(|s| (s.v.clone(), s.theta.clone())),
            ..PfOptions::default()
        };
        let sol = solve_ac_pf(self.y, &problem, &opts).ok()?;
        if sol.converged {
            Some(sol)
        } else {
            None
        }
    }

    fn evaluate(&self, u: &[f64], pf: &PfSolution) -> (ViolationReport, Option<f64>) {
        let inp = self.inp;
        let base = inp.base_mva;
        let mut rep = ViolationReport::default();
        for (li, &i) in self.sub.buses.iter().enumerate() {
            let v = pf.v[li];
            rep.push(ViolationClass::Voltage, i, (v - 1.0 - self.band).max(1.0 - self.band - v));
        }
        for (k, &g) in self.sub.gens.iter().enumerate() {
            let gb = &inp.gens[g];
            let q = pf.q_gen[self.gen_bus[k]];
            rep.push(ViolationClass::ReactiveGen, gb.bus, (q - gb.q_max).max(gb.q_min - q) / base);
            let p = match self.p_ctrl[k] {
                Some(j) => u[j] * base,
                None => pf.slack_p,
            };
            rep.push(ViolationClass::ActiveGen, gb.bus, (p - gb.p_max).max(gb.p_min - p) / base);
        }
        for ((c, sf), st) in self.sub.circuits.iter().zip(&pf.s_from).zip(&pf.s_to) {
            rep.push(ViolationClass::Flow, c.corridor, (sf.norm().max(st.norm()) - c.rating) / base);
        }
        let l = l_index(pf, self.y).ok().map(|l| l.value);
        if let Some(l) = l {
            rep.push(ViolationClass::LIndex, 0, l - inp.l_max);
        }
        (rep, l)
    }

    fn point(&self, u: Vec<f64>, start: Option<&PfSolution>) -> Option<Point> {
        let pf = self
            .power_flow(&u, false, start)
            .or_else(|| start.and_then(|_| self.power_flow(&u, false, None)))?;
        let (report, l) = self.evaluate(&u, &pf);
        let pen = penalty(&report);
        Some(Point {
            u,
            pf,
            report,
            l,
            pen,
        })
    }

    fn run(&self, opts: &BaseOpfOptions, circuits: &[Circuit]) -> DispatchResult {
        let mut u = self.initial(opts, circuits);
        let mut best = self.point(u.clone(), None);
        if best.is_none() {
            // flat setpoints are the most forgiving start for Newton-Raphson
            for (k, _) in self.sub.gens.iter().enumerate() {
                u[self.v_ctrl[k]] = 1.0;
            }
            best = self.point(u, None);
        }
        let Some(mut best) = best else {
            let mut c = opts.start.clone().unwrap_or_else(|| self.inp.default_controls());
            c.q_comp.resize(self.inp.n_bus, 0.0);
            return DispatchResult::failed(c, DispatchStatus::Diverged, FAILED_PENALTY);
        };
        let mut trust = 1.0;
        let mut iterations = 1;
        while iterations < opts.max_outer && !best.report.is_feasible() && trust > 1e-3 {
            iterations += 1;
            let Some(du) = self.step(&best, trust) else {
                break;
            };
            if du.iter().all(|d| d.abs() < 1e-8) {
                break;
            }
            let u: Vec<f64> = best
                .u
                .iter()
                .zip(&du)
                .enumerate()
                .map(|(j, (a, b))| (a + b).clamp(self.lo[j], self.hi[j]))
                .collect();
            match self.point(u, Some(&best.pf)) {
                Some(p) if p.pen < best.pen => {
                    best = p;
                    trust = (trust * 2.0).min(1.0);
                }
                _ => trust *= 0.5,
            }
        }
        if best.report.is_feasible() {
            // independent confirmation with reactive limits enforced
            let checked = self.power_flow(&best.u, true, None).map(|pf| {
                let (report, l) = self.evaluate(&best.u, &pf);
                let pen = penalty(&report);
                Point {
                    u: best.u.clone(),
                    pf,
                    report,
                    l,
                    pen,
                }
            });
            match checked {
                Some(p) => best = p,
                None => {
                    best.report.push(ViolationClass::Voltage, self.inp.slack, f64::INFINITY);
                    best.pen = FAILED_PENALTY;
                }
            }
        }
        self.result(best, iterations, circuits)
    }

    /// LP step from `at` inside a trust region scaled by `trust`.
    fn step(&self, at: &Point, trust: f64) -> Option<Vec<f64>> {
        let inp = self.inp;
        let base = inp.base_mva;
        let n_u = self.n_u();
        let v = at.pf.voltages();
        let y = &self.y.y;
        let ns = &self.ns;
        let pq = &self.pq;
        let gl = &self.gen_bus;
        let n_x = ns.len() + pq.len();

        let jx = polar_jacobian(y, &v, ns, pq, ns, pq);
        let jv = polar_jacobian(y, &v, ns, pq, &[], gl);
        let mut ju = DMatrix::<f64>::zeros(n_x, n_u);
        let p_row = |bus: usize| ns.iter().position(|&i| i == bus);
        for (k, &b) in gl.iter().enumerate() {
            if let (Some(j), Some(r)) = (self.p_ctrl[k], p_row(b)) {
                ju[(r, j)] = -1.0;
            }
            for r in 0..n_x {
                ju[(r, self.v_ctrl[k])] = jv[(r, k)];
            }
        }
        for (k, _) in pq.iter().enumerate() {
            if let Some(j) = self.q_ctrl[k] {
                ju[(ns.len() + k, j)] = -1.0;
            }
        }
        let sx = -jx.lu().solve(&ju)?;

        // gradient over u of a function with partials hx over states and hu
        let through = |hx: &[f64], hu: &[f64]| -> Vec<f64> {
            let hx = DVector::from_column_slice(hx);
            let mut g: Vec<f64> = (sx.transpose() * hx).iter().copied().collect();
            for (a, b) in g.iter_mut().zip(hu) {
                *a += b;
            }
            g
        };
        let u_of_v = |bus: usize| gl.iter().position(|&b| b == bus).map(|k| self.v_ctrl[k]);
        let x_of_v = |bus: usize| pq.iter().position(|&b| b == bus).map(|k| ns.len() + k);
        let x_of_a = |bus: usize| ns.iter().position(|&b| b == bus);

        let mut lp = Lp::new();
        let mut up = Vec::with_capacity(n_u);
        let mut dn = Vec::with_capacity(n_u);
        let l_low = at.l.is_some_and(|l| l > inp.l_max + super::TOL_L);
        for j in 0..n_u {
            let width = self.hi[j] - self.lo[j];
            let radius = if self.v_ctrl.contains(&j) {
                V_TRUST
            } else {
                (0.3 * width).max(0.05)
            } * trust;
            let mut lo = (self.lo[j] - at.u[j]).max(-radius);
            let hi = (self.hi[j] - at.u[j]).min(radius);
            if l_low && self.v_ctrl.contains(&j) {
                lo = lo.max((L_STEP * trust).min(self.hi[j] - V_MARGIN - at.u[j]).min(hi));
            }
            let cost = if self.q_ctrl.contains(&Some(j)) { COMP_COST } else { STEP_COST };
            // up - dn with up in [max(lo,0), max(hi,0)], dn in [max(-hi,0), max(-lo,0)]
            up.push(lp.var(cost, lo.max(0.0), hi.max(0.0)));
            dn.push(lp.var(cost, (-hi).max(0.0), (-lo).max(0.0)));
        }
        let row = |lp: &mut Lp, g: &[f64], value: f64, limit: f64, upper: bool| {
            let s = lp.var(ELASTIC, 0.0, f64::INFINITY);
            let mut t: Vec<(Var, f64)> = Vec::with_capacity(2 * n_u + 1);
            for j in 0..n_u {
                if g[j] != 0.0 {
                    t.push((up[j], g[j]));
                    t.push((dn[j], -g[j]));
                }
            }
            if upper {
                t.push((s, -1.0));
                lp.le(&t, limit - value);
            } else {
                t.push((s, 1.0));
                lp.ge(&t, limit - value);
            }
        };

        // load-bus voltages
        for (k, &b) in pq.iter().enumerate() {
            let g: Vec<f64> = sx.row(ns.len() + k).iter().copied().collect();
            row(&mut lp, &g, at.pf.v[b], 1.0 + self.band - V_MARGIN, true);
            row(&mut lp, &g, at.pf.v[b], 1.0 - self.band + V_MARGIN, false);
        }
        // generator reactive output and slack active output
        let qx = polar_jacobian(y, &v, &[], gl, ns, pq);
        let qv = polar_jacobian(y, &v, &[], gl, &[], gl);
        for (k, &g) in self.sub.gens.iter().enumerate() {
            let gb = &inp.gens[g];
            let mut hu = vec![0.0; n_u];
            for (kk, _) in gl.iter().enumerate() {
                hu[self.v_ctrl[kk]] = qv[(k, kk)];
            }
            let hx: Vec<f64> = qx.row(k).iter().copied().collect();
            let grad = through(&hx, &hu);
            let q = at.pf.q_gen[gl[k]] / base;
            row(&mut lp, &grad, q, gb.q_max / base - Q_MARGIN, true);
            row(&mut lp, &grad, q, gb.q_min / base + Q_MARGIN, false);
            if self.p_ctrl[k].is_none() {
                let px = polar_jacobian(y, &v, &[self.slack], &[], ns, pq);
                let pv = polar_jacobian(y, &v, &[self.slack], &[], &[], gl);
                let mut hu = vec![0.0; n_u];
                for (kk, _) in gl.iter().enumerate() {
                    hu[self.v_ctrl[kk]] = pv[(0, kk)];
                }
                let hx: Vec<f64> = px.row(0).iter().copied().collect();
                let grad = through(&hx, &hu);
                let p = at.pf.slack_p / base;
                row(&mut lp, &grad, p, gb.p_max / base - P_MARGIN, true);
                row(&mut lp, &grad, p, gb.p_min / base + P_MARGIN, false);
            }
        }
        // loaded circuit ends
        for cir in &self.sub.circuits {
            let rating = cir.rating / base;
            for reverse in [false, true] {
                let (i, j) = if reverse { (cir.to, cir.from) } else { (cir.from, cir.to) };
                let (s, d) = branch_flow_grad(cir, v[i], v[j]);
                let mag = s.norm();
                if mag < 0.7 * rating {
                    continue;
                }
                let dmag = |z: Complex64| (s.conj() * z).re / mag;
                let mut hx = vec![0.0; n_x];
                let mut hu = vec![0.0; n_u];
                for (bus, dv, da) in [(i, d[0], d[2]), (j, d[1], d[3])] {
                    if let Some(x) = x_of_v(bus) {
                        hx[x] += dmag(dv);
                    } else if let Some(uj) = u_of_v(bus) {
                        hu[uj] += dmag(dv);
                    }
                    if let Some(x) = x_of_a(bus) {
                        hx[x] += dmag(da);
                    }
                }
                let grad = through(&hx, &hu);
                row(&mut lp, &grad, mag, rating * (1.0 - S_MARGIN), true);
            }
        }
        let sol = lp.solve().ok()?;
        Some((0..n_u).map(|j| sol.value(up[j]) - sol.value(dn[j])).collect())
    }

    fn result(&self, p: Point, iterations: usize, circuits: &[Circuit]) -> DispatchResult {
        let inp = self.inp;
        let base = inp.base_mva;
        let mut controls = inp.default_controls();
        for g in 0..inp.gens.len() {
            controls.p_gen[g] = 0.0;
        }
        for (k, &g) in self.sub.gens.iter().enumerate() {
            controls.p_gen[g] = match self.p_ctrl[k] {
                Some(j) => p.u[j] * base,
                None => p.pf.slack_p,
            };
            controls.v_set[g] = p.u[self.v_ctrl[k]];
        }
        for (k, &i) in self.pq.iter().enumerate() {
            if let Some(j) = self.q_ctrl[k] {
                controls.q_comp[self.sub.buses[i]] = p.u[j] * base;
            }
        }
        let mut v = vec![0.0; inp.n_bus];
        let mut theta = vec![0.0; inp.n_bus];
        for (li, &i) in self.sub.buses.iter().enumerate() {
            v[i] = p.pf.v[li];
            theta[i] = p.pf.theta[li];
        }
        let mut s_from = vec![0.0; circuits.len()];
        let mut s_to = vec![0.0; circuits.len()];
        for (lc, &oc) in self.sub.circuit_ids.iter().enumerate() {
            s_from[oc] = p.pf.s_from[lc].norm();
            s_to[oc] = p.pf.s_to[lc].norm();
        }
        let mut q_gen = vec![0.0; inp.gens.len()];
        for (k, &g) in self.sub.gens.iter().enumerate() {
            q_gen[g] = p.pf.q_gen[self.gen_bus[k]];
        }
        let feasible = p.report.is_feasible();
        DispatchResult {
            controls,
            state: Some(OperatingState {
                v,
                theta,
                s_from,
                s_to,
                q_gen,
            }),
            feasible,
            status: if feasible {
                DispatchStatus::Feasible
            } else {
                DispatchStatus::Violating
            },
            penalty: p.pen,
            violations: p.report,
            l_index: p.l,
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{realize_topology, Contingency, ExpansionPlan};

    fn garver_year(plan: &ExpansionPlan, year: usize) -> (OpfInput, Vec<Circuit>) {
        let net = crate::cases::garver6();
        let inp = OpfInput::for_year(&net, year, None).unwrap();
        let c = realize_topology(&net, plan, year, Contingency::Base).unwrap();
        (inp, c)
    }

    #[test]
    fn zero_demand_is_feasible_at_lower_limits() {
        let net = crate::cases::garver6();
        let plan = crate::cases::garver_secure_plan(&net);
        let (mut inp, c) = garver_year(&plan, 1);
        inp.p_load = vec![0.0; 6];
        inp.q_load = vec![0.0; 6];
        let r = base_opf(&inp, &c, &BaseOpfOptions::default());
        assert!(r.feasible, "{:?}", r.violations.violated().collect::<Vec<_>>());
        for (k, g) in inp.gens.iter().enumerate() {
            if k != inp.slack_gen {
                assert!((r.controls.p_gen[k] - g.p_min).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn green_field_without_lines_is_infeasible() {
        let net = crate::cases::garver6();
        let (inp, c) = garver_year(&ExpansionPlan::for_network(&net), 1);
        let r = base_opf(&inp, &c, &BaseOpfOptions::default());
        assert!(!r.feasible);
        assert!(r.penalty > 0.0);
    }

    #[test]
    fn feasible_result_survives_independent_power_flow() {
        let net = crate::cases::garver6();
        let plan = crate::cases::garver_secure_plan(&net);
        let (inp, c) = garver_year(&plan, 1);
        let r = base_opf(&inp, &c, &BaseOpfOptions::default());
        assert!(r.feasible, "{:?}", r.violations.violated().collect::<Vec<_>>());
        // rebuild the power flow from the returned controls only
        let y = build_admittance(6, &c).unwrap();
        let buses: Vec<PfBus> = (0..6)
            .map(|i| {
                let g = inp.gens.iter().position(|g| g.bus == i);
                PfBus {
                    kind: inp.kinds[i],
                    p_spec: (g.map_or(0.0, |k| r.controls.p_gen[k]) - inp.p_load[i]) / 100.0,
                    q_spec: -inp.q_load[i] / 100.0,
                    v_set: g.map_or(1.0, |k| r.controls.v_set[k]),
                    q_gen_min: g.map_or(0.0, |k| inp.gens[k].q_min / 100.0),
                    q_gen_max: g.map_or(0.0, |k| inp.gens[k].q_max / 100.0),
                }
            })
            .collect();
        let pf = solve_ac_pf(
            &y,
            &PfProblem { buses: &buses, circuits: &c, slack: 0, base_mva: 100.0 },
            &PfOptions::default(),
        )
        .unwrap();
        assert!(pf.converged);
        for v in &pf.v {
            assert!(*v >= 0.95 - 1e-4 && *v <= 1.05 + 1e-4);
        }
        for ((cir, f), t) in c.iter().zip(&pf.s_from).zip(&pf.s_to) {
            assert!(f.norm().max(t.norm()) <= cir.rating + 1e-2);
        }
        let l = l_index(&pf, &y).unwrap().value;
        assert!(l <= 0.4 + 1e-3);
    }
}
