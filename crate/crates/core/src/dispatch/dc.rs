use serde::{Deserialize, Serialize};

use super::{penalty, OpfInput, ViolationClass, ViolationReport};
use crate::lp::Lp;
use crate::network::Circuit;
use crate::powerflow::{reachable, solve_dc_pf};

/// Outcome of a lossless MW-only dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcDispatch {
    /// Output per generator bus, MW.
    pub p_gen: Vec<f64>,
    /// Total flow of each circuit group, MW.
    pub flow: Vec<f64>,
    /// Demand left unserved per bus, MW.
    pub unserved: Vec<f64>,
    pub violations: ViolationReport,
    pub penalty: f64,
    pub feasible: bool,
    /// Whether the warm-start dispatch was accepted without an LP.
    pub warm: bool,
}

/// DC dispatch of one topology: generation is rescheduled within its limits
/// to minimise circuit overloads and, at a higher price, unserved demand.
/// When `warm` is given and every bus is connected, that dispatch is tried
/// first and kept if it is already feasible.
pub fn dc_dispatch(inp: &OpfInput, circuits: &[Circuit], warm: Option<&[f64]>) -> DcDispatch {
    if let Some(p) = warm {
        if let Some(d) = try_warm(inp, circuits, p) {
            return d;
        }
    }
    solve_lp(inp, circuits)
}

fn try_warm(inp: &OpfInput, circuits: &[Circuit], p_gen: &[f64]) -> Option<DcDispatch> {
    let mut inj: Vec<f64> = inp.p_load.iter().map(|p| -p).collect();
    for (g, p) in inp.gens.iter().zip(p_gen) {
        inj[g.bus] += p;
    }
    let mismatch: f64 = inj.iter().sum();
    // the slack absorbs the mismatch; reject if that breaks its limits
    let slack = &inp.gens[inp.slack_gen];
    let ps = p_gen[inp.slack_gen] - mismatch;
    if ps < slack.p_min - 1e-9 || ps > slack.p_max + 1e-9 {
        return None;
    }
    let sol = solve_dc_pf(inp.n_bus, circuits, &inj, inp.slack, inp.base_mva).ok()?;
    let mut p = p_gen.to_vec();
    p[inp.slack_gen] = ps;
    let unserved = vec![0.0; inp.n_bus];
    let report = report(inp, circuits, &sol.flow, &unserved);
    if !report.is_feasible() {
        return None;
    }
    Some(DcDispatch {
        p_gen: p,
        flow: sol.flow,
        unserved,
        violations: report,
        penalty: 0.0,
        feasible: true,
        warm: true,
    })
}

fn report(inp: &OpfInput, circuits: &[Circuit], flow: &[f64], unserved: &[f64]) -> ViolationReport {
    let base = inp.base_mva;
    let mut r = ViolationReport::default();
    for (c, f) in circuits.iter().zip(flow) {
        if c.count == 0 {
            continue;
        }
        let per = f.abs() / c.count as f64;
        r.push(ViolationClass::Flow, c.corridor, (per - c.rating) / base);
    }
    for (i, u) in unserved.iter().enumerate() {
        if inp.p_load[i] > 0.0 {
            r.push(ViolationClass::Unserved, i, u / base);
        }
    }
    r
}

fn solve_lp(inp: &OpfInput, circuits: &[Circuit]) -> DcDispatch {
    let n = inp.n_bus;
    let base = inp.base_mva;
    // one angle reference per connected component
    let mut is_ref = vec![false; n];
    let mut seen = vec![false; n];
    for root in std::iter::once(inp.slack).chain(0..n) {
        if seen[root] {
            continue;
        }
        is_ref[root] = true;
        for (i, s) in reachable(n, circuits, root).into_iter().enumerate() {
            seen[i] |= s;
        }
    }
    let mut lp = Lp::new();
    let theta: Vec<_> = (0..n)
        .map(|i| {
            if is_ref[i] {
                lp.var(0.0, 0.0, 0.0)
            } else {
                lp.var(0.0, f64::NEG_INFINITY, f64::INFINITY)
            }
        })
        .collect();
    let pg: Vec<_> = inp.gens.iter().map(|g| lp.var(0.0, g.p_min / base, g.p_max / base)).collect();
    let shed: Vec<_> = (0..n).map(|i| lp.var(10.0, 0.0, inp.p_load[i] / base)).collect();
    // balance: gen + shed - load = sum of outgoing flows
    let mut rows: Vec<Vec<(crate::lp::Var, f64)>> = vec![Vec::new(); n];
    for (k, g) in inp.gens.iter().enumerate() {
        rows[g.bus].push((pg[k], 1.0));
    }
    for i in 0..n {
        rows[i].push((shed[i], 1.0));
    }
    let mut over = Vec::new();
    for c in circuits {
        if c.count == 0 {
            over.push(None);
            continue;
        }
        let s = c.count as f64 / c.x;
        rows[c.from].push((theta[c.from], -s));
        rows[c.from].push((theta[c.to], s));
        rows[c.to].push((theta[c.to], -s));
        rows[c.to].push((theta[c.from], s));
        let o = lp.var(1.0, 0.0, f64::INFINITY);
        let cap = c.count as f64 * c.rating / base;
        lp.le(&[(theta[c.from], s), (theta[c.to], -s), (o, -1.0)], cap);
        lp.ge(&[(theta[c.from], s), (theta[c.to], -s), (o, 1.0)], -cap);
        over.push(Some(o));
    }
    for i in 0..n {
        lp.eq(&rows[i], inp.p_load[i] / base);
    }
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(_) => {
            let unserved = inp.p_load.clone();
            let violations = report(inp, circuits, &vec![0.0; circuits.len()], &unserved);
            return DcDispatch {
                p_gen: vec![0.0; inp.gens.len()],
                flow: vec![0.0; circuits.len()],
                penalty: penalty(&violations),
                unserved,
                violations,
                feasible: false,
                warm: false,
            };
        }
    };
    let flow: Vec<f64> = circuits
        .iter()
        .map(|c| c.count as f64 / c.x * (sol.value(theta[c.from]) - sol.value(theta[c.to])) * base)
        .collect();
    let unserved: Vec<f64> = shed.iter().map(|&v| sol.value(v).max(0.0) * base).collect();
    let p_gen = pg.iter().map(|&v| sol.value(v) * base).collect();
    let violations = report(inp, circuits, &flow, &unserved);
    DcDispatch {
        p_gen,
        flow,
        unserved,
        penalty: penalty(&violations),
        feasible: violations.is_feasible(),
        violations,
        warm: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{realize_topology, Contingency, ExpansionPlan};

    fn garver(plan: &ExpansionPlan, k: Contingency) -> (OpfInput, Vec<Circuit>) {
        let net = crate::cases::garver6();
        let inp = OpfInput::for_year(&net, 1, None).unwrap();
        let c = realize_topology(&net, plan, 1, k).unwrap();
        (inp, c)
    }

    #[test]
    fn green_field_garver_sheds_load() {
        let net = crate::cases::garver6();
        let (inp, c) = garver(&ExpansionPlan::for_network(&net), Contingency::Base);
        let d = dc_dispatch(&inp, &c, None);
        assert!(!d.feasible);
        // bus 6 is cut off: 150 + 360 MW cannot cover 760 MW
        let shed: f64 = d.unserved.iter().sum();
        assert!(shed >= 250.0 - 1e-6, "{shed}");
    }

    #[test]
    fn secure_plan_dispatch_balances() {
        let net = crate::cases::garver6();
        let (inp, c) = garver(&crate::cases::garver_secure_plan(&net), Contingency::Base);
        let d = dc_dispatch(&inp, &c, None);
        assert!(d.feasible, "{:?}", d.violations.violated().collect::<Vec<_>>());
        let gen: f64 = d.p_gen.iter().sum();
        assert!((gen - 760.0).abs() < 1e-6);
        for (cir, f) in c.iter().zip(&d.flow) {
            assert!(f.abs() <= cir.count as f64 * cir.rating + 1e-6);
        }
    }

    #[test]
    fn warm_start_kept_when_feasible() {
        let net = crate::cases::garver6();
        let (inp, c) = garver(&crate::cases::garver_secure_plan(&net), Contingency::Base);
        let cold = dc_dispatch(&inp, &c, None);
        let warm = dc_dispatch(&inp, &c, Some(&cold.p_gen));
        assert!(warm.warm && warm.feasible);
        for (a, b) in warm.p_gen.iter().zip(&cold.p_gen) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
