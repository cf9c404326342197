use std::f64::consts::PI;

use super::linear::{Affine, LinearModel, LinearState};
use super::subnet::Subnet;
use super::{
    penalty, Controls, DispatchResult, DispatchStatus, OperatingState, OpfInput, ViolationClass,
    ViolationReport, FAILED_PENALTY,
};
use crate::lp::{Lp, LpSolution, Var};
use crate::network::Circuit;

const FACES: usize = 16;
const ELASTIC: f64 = 1e6;
const MAX_ROUNDS: usize = 40;

/// Linearized OPF for a contingency topology. The base-case controls are
/// the warm start; if they already satisfy every constraint no LP is solved.
/// Otherwise the L1 norm of the control deviation is minimised subject to
/// the linear power flow, the contingency voltage band, generator limits and
/// circuit ratings (inner polygon of the MVA circle, cut in on demand).
pub fn contingency_opf(inp: &OpfInput, circuits: &[Circuit], base: &Controls) -> DispatchResult {
    contingency_opf_screened(inp, circuits, base).0
}

/// [`contingency_opf`] together with the corridors whose rating is exceeded
/// at the warm start, before any redispatch.
pub fn contingency_opf_screened(
    inp: &OpfInput,
    circuits: &[Circuit],
    base: &Controls,
) -> (DispatchResult, Vec<usize>) {
    let adjusted;
    let inp = if base.q_comp.iter().any(|&q| q != 0.0) {
        adjusted = inp.with_compensation(&base.q_comp);
        &adjusted
    } else {
        inp
    };
    let sub = match Subnet::build(inp, circuits) {
        Ok(s) => s,
        Err(status) => return (super::islanded_result(inp, base, status), Vec::new()),
    };
    let model = match LinearModel::new(inp, sub, &base.p_gen, &base.v_set) {
        Some(m) => m,
        None => {
            return (
                DispatchResult::failed(base.clone(), DispatchStatus::Diverged, FAILED_PENALTY),
                Vec::new(),
            )
        }
    };
    let band = inp.v_cont_band;
    let zero = vec![0.0; model.n_controls()];
    let s0 = model.state_at(&zero);
    let r0 = evaluate(inp, &model, &s0, band);
    let mut overloaded: Vec<usize> = r0
        .violated()
        .filter(|v| v.class == ViolationClass::Flow)
        .map(|v| v.element)
        .collect();
    overloaded.sort_unstable();
    overloaded.dedup();
    if r0.is_feasible() {
        return (finish(inp, circuits, &model, &s0, r0, base, 0), overloaded);
    }

    let (du, rounds) = match redispatch(inp, &model, &s0, band) {
        Some(x) => x,
        None => return (finish(inp, circuits, &model, &s0, r0, base, 0), overloaded),
    };
    let s = model.state_at(&du);
    let r = evaluate(inp, &model, &s, band);
    (finish(inp, circuits, &model, &s, r, base, rounds), overloaded)
}

/// Violation report of a linear operating point.
pub(crate) fn evaluate(inp: &OpfInput, model: &LinearModel, s: &LinearState, band: f64) -> ViolationReport {
    let sub = model.subnet();
    let base = inp.base_mva;
    let mut rep = ViolationReport::default();
    for (li, &i) in sub.buses.iter().enumerate() {
        let v = s.v[li];
        rep.push(ViolationClass::Voltage, i, (v - 1.0 - band).max(1.0 - band - v));
    }
    for (k, &g) in sub.gens.iter().enumerate() {
        let gb = &inp.gens[g];
        let q = s.q_gen[k] * base;
        rep.push(ViolationClass::ReactiveGen, gb.bus, (q - gb.q_max).max(gb.q_min - q) / base);
        let p = s.p_gen[k] * base;
        rep.push(ViolationClass::ActiveGen, gb.bus, (p - gb.p_max).max(gb.p_min - p) / base);
    }
    for (c, f) in sub.circuits.iter().zip(&s.flows) {
        let sf = f[0].hypot(f[1]);
        let st = f[2].hypot(f[3]);
        rep.push(ViolationClass::Flow, c.corridor, sf.max(st) - c.rating / base);
    }
    rep
}

fn face(k: usize) -> (f64, f64) {
    let a = 2.0 * PI * k as f64 / FACES as f64;
    (a.cos(), a.sin())
}

fn nearest_face(p: f64, q: f64) -> usize {
    let a = q.atan2(p).rem_euclid(2.0 * PI);
    ((a / (2.0 * PI / FACES as f64)).round() as usize) % FACES
}

struct EndCut {
    p: Affine,
    q: Affine,
    limit: f64,
    slack: Var,
    faces: Vec<bool>,
}

/// Minimal L1 redispatch; returns the control deviation and LP rounds.
fn redispatch(inp: &OpfInput, model: &LinearModel, s0: &LinearState, band: f64) -> Option<(Vec<f64>, usize)> {
    let base = inp.base_mva;
    let sub = model.subnet();
    let n_u = model.n_controls();
    let u0 = model.u0();
    let mut lp = Lp::new();

    // du = up - dn, each direction bounded by the control box
    let mut bounds = vec![(0.0, 0.0); n_u];
    for (k, &g) in sub.gens.iter().enumerate() {
        let gb = &inp.gens[g];
        if let Some(j) = model.p_ctrl()[k] {
            bounds[j] = (gb.p_min / base, gb.p_max / base);
        }
        bounds[model.v_ctrl()[k]] = (1.0 - band, 1.0 + band);
    }
    let mut up = Vec::with_capacity(n_u);
    let mut dn = Vec::with_capacity(n_u);
    for j in 0..n_u {
        let (lo, hi) = bounds[j];
        let room_up = hi - u0[j];
        let room_dn = u0[j] - lo;
        up.push(lp.var(1.0, (-room_dn).max(0.0), room_up.max(0.0)));
        dn.push(lp.var(1.0, (-room_up).max(0.0), room_dn.max(0.0)));
    }
    let terms = |a: &Affine, extra: &[(Var, f64)]| -> Vec<(Var, f64)> {
        let mut t: Vec<(Var, f64)> = Vec::with_capacity(2 * n_u + extra.len());
        for j in 0..n_u {
            if a.g[j] != 0.0 {
                t.push((up[j], a.g[j]));
                t.push((dn[j], -a.g[j]));
            }
        }
        t.extend_from_slice(extra);
        t
    };
    let bound_row = |lp: &mut Lp, a: &Affine, lo: f64, hi: f64| {
        let s = lp.var(ELASTIC, 0.0, f64::INFINITY);
        lp.le(&terms(a, &[(s, -1.0)]), hi - a.c);
        lp.ge(&terms(a, &[(s, 1.0)]), lo - a.c);
    };
    let gen_buses = model.gen_bus();
    for li in 0..sub.n() {
        if !gen_buses.contains(&li) {
            bound_row(&mut lp, &model.v_affine(li), 1.0 - band, 1.0 + band);
        }
    }
    for (k, &g) in sub.gens.iter().enumerate() {
        let gb = &inp.gens[g];
        bound_row(&mut lp, &model.q_gen_affine(k), gb.q_min / base, gb.q_max / base);
        if model.p_ctrl()[k].is_none() {
            bound_row(&mut lp, &model.p_slack_affine(), gb.p_min / base, gb.p_max / base);
        }
    }

    let mut cuts: Vec<EndCut> = Vec::new();
    for (c, cir) in sub.circuits.iter().enumerate() {
        for reverse in [false, true] {
            let (p, q) = model.flow_affine(c, reverse);
            cuts.push(EndCut {
                p,
                q,
                limit: cir.rating / base * (PI / FACES as f64).cos(),
                slack: lp.var(ELASTIC, 0.0, f64::INFINITY),
                faces: vec![false; FACES],
            });
        }
    }
    let mut pending: Vec<(usize, usize)> = Vec::new();
    for (c, f) in s0.flows.iter().enumerate() {
        for (e, (p, q)) in [(f[0], f[1]), (f[2], f[3])].into_iter().enumerate() {
            let cut = &cuts[2 * c + e];
            if p.hypot(q) >= 0.8 * cut.limit {
                pending.push((2 * c + e, nearest_face(p, q)));
            }
        }
    }
    let row = |cut: &EndCut, k: usize| -> (Vec<(Var, f64)>, f64) {
        let (cs, sn) = face(k);
        let mut a = cut.p.clone();
        for (x, y) in a.g.iter_mut().zip(&cut.q.g) {
            *x = cs * *x + sn * y;
        }
        a.c = cs * cut.p.c + sn * cut.q.c;
        (terms(&a, &[(cut.slack, -1.0)]), cut.limit - a.c)
    };
    for &(e, k) in &pending {
        cuts[e].faces[k] = true;
        let (t, rhs) = row(&cuts[e], k);
        lp.le(&t, rhs);
    }
    let mut sol: LpSolution = lp.solve().ok()?;
    let mut rounds = 1;
    loop {
        let du: Vec<f64> = (0..n_u).map(|j| sol.value(up[j]) - sol.value(dn[j])).collect();
        let mut added = false;
        if rounds < MAX_ROUNDS {
            let s = model.state_at(&du);
            for (c, f) in s.flows.iter().enumerate() {
                let rating = sub.circuits[c].rating / base;
                for (e, (p, q)) in [(f[0], f[1]), (f[2], f[3])].into_iter().enumerate() {
                    if p.hypot(q) <= rating {
                        continue;
                    }
                    let idx = 2 * c + e;
                    let k = nearest_face(p, q);
                    if cuts[idx].faces[k] {
                        continue;
                    }
                    cuts[idx].faces[k] = true;
                    let (t, rhs) = row(&cuts[idx], k);
                    sol = sol.add_le(&t, rhs).ok()?;
                    added = true;
                }
            }
        }
        if !added {
            return Some((du, rounds));
        }
        rounds += 1;
    }
}

fn finish(
    inp: &OpfInput,
    circuits: &[Circuit],
    model: &LinearModel,
    s: &LinearState,
    report: ViolationReport,
    base: &Controls,
    rounds: usize,
) -> DispatchResult {
    let sub = model.subnet();
    let mva = inp.base_mva;
    let mut controls = base.clone();
    for (k, &g) in sub.gens.iter().enumerate() {
        controls.p_gen[g] = s.p_gen[k] * mva;
        controls.v_set[g] = s.v[model.gen_bus()[k]];
    }
    for g in 0..inp.gens.len() {
        if !sub.gens.contains(&g) {
            controls.p_gen[g] = 0.0;
        }
    }
    let mut v = vec![0.0; inp.n_bus];
    let mut theta = vec![0.0; inp.n_bus];
    for (li, &i) in sub.buses.iter().enumerate() {
        v[i] = s.v[li];
        theta[i] = s.theta[li];
    }
    let mut s_from = vec![0.0; circuits.len()];
    let mut s_to = vec![0.0; circuits.len()];
    for (lc, &oc) in sub.circuit_ids.iter().enumerate() {
        let f = s.flows[lc];
        s_from[oc] = f[0].hypot(f[1]) * mva;
        s_to[oc] = f[2].hypot(f[3]) * mva;
    }
    let mut q_gen = vec![0.0; inp.gens.len()];
    for (k, &g) in sub.gens.iter().enumerate() {
        q_gen[g] = s.q_gen[k] * mva;
    }
    let feasible = report.is_feasible();
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
        penalty: penalty(&report),
        violations: report,
        l_index: None,
        iterations: rounds,
    }
}
