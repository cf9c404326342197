use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Admittance, PfSolution, PowerFlowError};
use crate::network::BusKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LIndex {
    /// System L-index: the largest load-bus indicator.
    pub value: f64,
    /// Bus index attaining it.
    pub bus: usize,
    /// Indicator for every load bus.
    pub per_bus: Vec<(usize, f64)>,
}

/// Kessel-Glavitch stability indicator at a converged operating point.
///
/// Buses still voltage-controlled at the solution (slack and PV) form the
/// generator set; all others are load buses. With `F = -Y_LL^-1 Y_LG`,
/// `L_j = |1 - sum_i F_ji V_i / V_j|`.
pub fn l_index(sol: &PfSolution, y: &Admittance) -> Result<LIndex, PowerFlowError> {
    let gens: Vec<usize> = (0..sol.kinds.len())
        .filter(|&i| sol.kinds[i] != BusKind::Pq)
        .collect();
    let loads: Vec<usize> = (0..sol.kinds.len())
        .filter(|&i| sol.kinds[i] == BusKind::Pq)
        .collect();
    if gens.is_empty() || loads.is_empty() {
        return Err(PowerFlowError::NoLoadOrGeneratorBus);
    }
    let yll = DMatrix::from_fn(loads.len(), loads.len(), |r, c| y.y[(loads[r], loads[c])]);
    let ylg = DMatrix::from_fn(loads.len(), gens.len(), |r, c| y.y[(loads[r], gens[c])]);
    let f = yll
        .lu()
        .solve(&ylg)
        .ok_or(PowerFlowError::SingularLoadPartition)?
        .map(|z| -z);
    let v = sol.voltages();
    let mut per_bus = Vec::with_capacity(loads.len());
    for (r, &j) in loads.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, &i) in gens.iter().enumerate() {
            acc += f[(r, c)] * v[i];
        }
        per_bus.push((j, (Complex64::new(1.0, 0.0) - acc / v[j]).norm()));
    }
    let (bus, value) = per_bus
        .iter()
        .copied()
        .fold((loads[0], f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Ok(LIndex {
        value,
        bus,
        per_bus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Circuit;
    use crate::powerflow::{build_admittance, solve_ac_pf, PfBus, PfOptions, PfProblem};

    fn two_bus(x: f64, p: f64, q: f64) -> (PfSolution, Admittance) {
        let circuits = [Circuit {
            corridor: 0,
            from: 0,
            to: 1,
            r: 0.0,
            x,
            b: 0.0,
            rating: 100.0,
            count: 1,
        }];
        let y = build_admittance(2, &circuits).unwrap();
        let buses = [
            PfBus {
                kind: BusKind::Slack,
                p_spec: 0.0,
                q_spec: 0.0,
                v_set: 1.0,
                q_gen_min: -99.0,
                q_gen_max: 99.0,
            },
            PfBus {
                kind: BusKind::Pq,
                p_spec: -p,
                q_spec: -q,
                v_set: 1.0,
                q_gen_min: 0.0,
                q_gen_max: 0.0,
            },
        ];
        let sol = solve_ac_pf(
            &y,
            &PfProblem { buses: &buses, circuits: &circuits, slack: 0, base_mva: 100.0 },
            &PfOptions::default(),
        )
        .unwrap();
        assert!(sol.converged);
        (sol, y)
    }

    #[test]
    fn zero_at_no_load() {
        let (sol, y) = two_bus(0.2, 0.0, 0.0);
        let l = l_index(&sol, &y).unwrap();
        assert!(l.value.abs() < 1e-9);
        assert_eq!(l.bus, 1);
    }

    #[test]
    fn two_bus_half_max_power_matches_closed_form() {
        // unity power factor, V1 = 1: P_max = 1 / (2x)
        let x: f64 = 0.25;
        let p = 0.5 / (2.0 * x);
        // closed form for the receiving voltage: V2^4 - V2^2 + (P x)^2 = 0
        let px = p * x;
        let v2 = ((1.0 + (1.0 - 4.0 * px * px).sqrt()) / 2.0).sqrt();
        let delta = (px / v2).asin();
        let v2c = Complex64::from_polar(v2, -delta);
        let oracle = (Complex64::new(1.0, 0.0) - Complex64::new(1.0, 0.0) / v2c).norm();
        // same value from the power form |S| / (|Y_LL| V^2)
        let alt = p / ((1.0 / x) * v2 * v2);
        assert!((oracle - alt).abs() < 1e-12);

        let (sol, y) = two_bus(x, p, 0.0);
        let l = l_index(&sol, &y).unwrap();
        assert!((l.value - oracle).abs() < 1e-6, "{} vs {oracle}", l.value);
        assert!(l.value > 0.0 && l.value < 1.0);
    }

    #[test]
    fn monotone_under_load_sweep() {
        let x = 0.25;
        let p_max = 1.0 / (2.0 * x);
        let mut last = -1.0;
        for k in 0..19 {
            let p = 0.6 * p_max * k as f64 / 18.0;
            let (sol, y) = two_bus(x, p, 0.2 * p);
            let l = l_index(&sol, &y).unwrap().value;
            assert!(l > last, "step {k}: {l} <= {last}");
            assert!((0.0..=1.0).contains(&l));
            last = l;
        }
    }

    #[test]
    fn needs_both_bus_classes() {
        let (mut sol, y) = two_bus(0.2, 0.1, 0.0);
        sol.kinds[1] = BusKind::Pv;
        assert_eq!(l_index(&sol, &y).unwrap_err(), PowerFlowError::NoLoadOrGeneratorBus);
    }
}
