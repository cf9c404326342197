use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{reachable, PowerFlowError};
use crate::network::Circuit;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcSolution {
    pub theta: Vec<f64>,
    /// Total MW flow of each circuit group, from -> to.
    pub flow: Vec<f64>,
    /// Injection picked up by the slack bus, MW.
    pub slack_injection: f64,
}

/// Lossless B-theta power flow. `p_inj` is the net injection per bus in MW;
/// the slack bus absorbs any imbalance.
pub fn solve_dc_pf(
    n_bus: usize,
    circuits: &[Circuit],
    p_inj: &[f64],
    slack: usize,
    base_mva: f64,
) -> Result<DcSolution, PowerFlowError> {
    let seen = reachable(n_bus, circuits, slack);
    let island: Vec<usize> = (0..n_bus).filter(|&i| !seen[i]).collect();
    if !island.is_empty() {
        return Err(PowerFlowError::Island { buses: island });
    }
    let order: Vec<usize> = (0..n_bus).filter(|&i| i != slack).collect();
    let mut pos = vec![usize::MAX; n_bus];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }
    let m = order.len();
    let mut b = DMatrix::<f64>::zeros(m, m);
    for c in circuits.iter().filter(|c| c.count > 0) {
        let s = c.count as f64 / c.x;
        let (f, t) = (pos[c.from], pos[c.to]);
        if f != usize::MAX {
            b[(f, f)] += s;
        }
        if t != usize::MAX {
            b[(t, t)] += s;
        }
        if f != usize::MAX && t != usize::MAX {
            b[(f, t)] -= s;
            b[(t, f)] -= s;
        }
    }
    let rhs = DVector::from_iterator(m, order.iter().map(|&i| p_inj[i] / base_mva));
    let sol = if m == 0 {
        DVector::zeros(0)
    } else {
        b.lu().solve(&rhs).ok_or(PowerFlowError::SingularJacobian)?
    };
    let mut theta = vec![0.0; n_bus];
    for (k, &i) in order.iter().enumerate() {
        theta[i] = sol[k];
    }
    let flow = circuits
        .iter()
        .map(|c| c.count as f64 * (theta[c.from] - theta[c.to]) / c.x * base_mva)
        .collect();
    let slack_injection = -order.iter().map(|&i| p_inj[i]).sum::<f64>();
    Ok(DcSolution {
        theta,
        flow,
        slack_injection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(from: usize, to: usize, x: f64, count: u32) -> Circuit {
        Circuit {
            corridor: 0,
            from,
            to,
            r: 0.0,
            x,
            b: 0.0,
            rating: 100.0,
            count,
        }
    }

    #[test]
    fn zero_injection_zero_flow() {
        let c = [line(0, 1, 0.2, 1), line(1, 2, 0.3, 1), line(0, 2, 0.1, 1)];
        let s = solve_dc_pf(3, &c, &[0.0; 3], 0, 100.0).unwrap();
        assert!(s.flow.iter().all(|f| f.abs() < 1e-12));
    }

    #[test]
    fn two_bus_transfer() {
        let c = [line(0, 1, 0.2, 1)];
        let s = solve_dc_pf(2, &c, &[50.0, -50.0], 0, 100.0).unwrap();
        assert!((s.theta[0] - s.theta[1] - 0.1).abs() < 1e-12);
        assert!((s.flow[0] - 50.0).abs() < 1e-9);
        assert!((s.slack_injection - 50.0).abs() < 1e-12);
    }

    #[test]
    fn radial_chain_carries_downstream_demand() {
        let c = [line(0, 1, 0.2, 1), line(1, 2, 0.3, 2)];
        let s = solve_dc_pf(3, &c, &[0.0, -30.0, -20.0], 0, 100.0).unwrap();
        assert!((s.flow[0] - 50.0).abs() < 1e-9);
        assert!((s.flow[1] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn island_is_named() {
        let c = [line(0, 1, 0.2, 1)];
        let err = solve_dc_pf(4, &c, &[0.0; 4], 0, 100.0).unwrap_err();
        assert_eq!(err, PowerFlowError::Island { buses: vec![2, 3] });
    }

    #[test]
    fn nodal_balance_holds() {
        let c = [line(0, 1, 0.2, 1), line(1, 2, 0.3, 1), line(0, 2, 0.1, 3), line(2, 3, 0.25, 1)];
        let p = [0.0, -40.0, 25.0, -60.0];
        let s = solve_dc_pf(4, &c, &p, 0, 100.0).unwrap();
        for bus in 1..4 {
            let out: f64 = c
                .iter()
                .zip(&s.flow)
                .map(|(c, f)| if c.from == bus { *f } else if c.to == bus { -*f } else { 0.0 })
                .sum();
            assert!((out - p[bus]).abs() < 1e-9);
        }
    }
}
