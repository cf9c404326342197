use num_complex::Complex64;

use crate::network::Circuit;

/// First-order expansion of one circuit's AC flow around `V = 1`,
/// `theta = 0` (`sin t ~ t`, `cos t ~ 1`, products of deviations dropped):
///
/// ```text
/// P_ij = g (V_i - V_j) - b theta_ij
/// Q_ij = -b (V_i - V_j) - g theta_ij - bc (2 V_i - 1)
/// ```
///
/// with `g + jb` the series admittance and `bc` the half charging of one
/// circuit.
#[derive(Debug, Clone, Copy)]
pub struct LinearBranch {
    pub g: f64,
    pub b: f64,
    pub bc: f64,
}

impl LinearBranch {
    pub fn of(c: &Circuit) -> Self {
        let (g, b) = c.series();
        LinearBranch { g, b, bc: c.b }
    }

    /// `(P, Q)` leaving bus `i` towards `j`, pu, one circuit.
    pub fn flow(&self, vi: f64, vj: f64, ti: f64, tj: f64) -> (f64, f64) {
        let dv = vi - vj;
        let dt = ti - tj;
        (
            self.g * dv - self.b * dt,
            -self.b * dv - self.g * dt - self.bc * (2.0 * vi - 1.0),
        )
    }

    /// Coefficients of `(P, Q)` from `i` with respect to
    /// `(V_i, V_j, theta_i, theta_j)`, plus the constant term of `Q`.
    pub fn p_coeffs(&self) -> [f64; 4] {
        [self.g, -self.g, -self.b, self.b]
    }

    pub fn q_coeffs(&self) -> ([f64; 4], f64) {
        ([-self.b - 2.0 * self.bc, self.b, -self.g, self.g], self.bc)
    }
}

/// Linear-model sending and receiving flows of one circuit per group, MVA.
pub fn linearized_flows(
    circuits: &[Circuit],
    v: &[f64],
    theta: &[f64],
    base_mva: f64,
) -> Vec<(Complex64, Complex64)> {
    circuits
        .iter()
        .map(|c| {
            let lb = LinearBranch::of(c);
            let (pf, qf) = lb.flow(v[c.from], v[c.to], theta[c.from], theta[c.to]);
            let (pt, qt) = lb.flow(v[c.to], v[c.from], theta[c.to], theta[c.from]);
            (
                Complex64::new(pf, qf) * base_mva,
                Complex64::new(pt, qt) * base_mva,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powerflow::branch_flow;

    fn line(r: f64, x: f64, b: f64) -> Circuit {
        Circuit {
            corridor: 0,
            from: 0,
            to: 1,
            r,
            x,
            b,
            rating: 100.0,
            count: 1,
        }
    }

    fn ac(c: &Circuit, v: &[f64], t: &[f64]) -> (Complex64, Complex64) {
        let (f, to) = branch_flow(
            c,
            Complex64::from_polar(v[0], t[0]),
            Complex64::from_polar(v[1], t[1]),
        );
        (f * 100.0, to * 100.0)
    }

    #[test]
    fn flat_point_gives_zero_flow() {
        let c = line(0.05, 0.2, 0.0);
        let f = linearized_flows(&[c], &[1.0, 1.0], &[0.0, 0.0], 100.0);
        assert!(f[0].0.norm() < 1e-12 && f[0].1.norm() < 1e-12);
    }

    #[test]
    fn small_angle_active_flow_within_hundredth_percent() {
        let c = line(0.0, 0.2, 0.0);
        let (v, t) = ([1.0, 1.0], [0.01, 0.0]);
        let lin = linearized_flows(std::slice::from_ref(&c), &v, &t, 100.0)[0].0.re;
        let exact = ac(&c, &v, &t).0.re;
        assert!(((lin - exact) / exact).abs() < 1e-4, "{lin} vs {exact}");
    }

    #[test]
    fn stress_angle_divergence_is_pinned() {
        // at 0.5 rad the linear model overstates the lossless AC flow by
        // 0.5 / sin(0.5) - 1 = 4.29 %
        let c = line(0.0, 0.2, 0.0);
        let (v, t) = ([1.0, 1.0], [0.5, 0.0]);
        let lin = linearized_flows(std::slice::from_ref(&c), &v, &t, 100.0)[0].0.re;
        let exact = ac(&c, &v, &t).0.re;
        let rel = lin / exact - 1.0;
        assert!((rel - (0.5 / 0.5f64.sin() - 1.0)).abs() < 1e-12);
        assert!((rel - 0.042915).abs() < 1e-5, "{rel}");
    }

    #[test]
    fn coefficient_form_matches_flow() {
        let c = line(0.03, 0.25, 0.04);
        let lb = LinearBranch::of(&c);
        let (vi, vj, ti, tj) = (1.02, 0.97, 0.03, -0.05);
        let (p, q) = lb.flow(vi, vj, ti, tj);
        let x = [vi, vj, ti, tj];
        let pc = lb.p_coeffs();
        let (qc, q0) = lb.q_coeffs();
        let p2: f64 = pc.iter().zip(&x).map(|(a, b)| a * b).sum();
        let q2: f64 = qc.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + q0;
        assert!((p - p2).abs() < 1e-12);
        assert!((q - q2).abs() < 1e-12);
    }

    #[test]
    fn first_order_exact_near_flat_point() {
        // the linear model is the tangent of the AC flow at V = 1, theta = 0
        let c = line(0.04, 0.3, 0.03);
        for &h in &[1e-3, 1e-4] {
            let v = [1.0 + h, 1.0 - h];
            let t = [h, -h];
            let lin = linearized_flows(std::slice::from_ref(&c), &v, &t, 1.0)[0];
            let exact = ac(&c, &v, &t);
            let e = (lin.0 - exact.0 / 100.0).norm().max((lin.1 - exact.1 / 100.0).norm());
            assert!(e < 50.0 * h * h, "h={h} err={e}");
        }
    }
}
