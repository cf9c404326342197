use nalgebra::DMatrix;
use num_complex::Complex64;

use super::PowerFlowError;
use crate::network::Circuit;

/// Dense complex nodal admittance matrix, pu.
#[derive(Debug, Clone)]
pub struct Admittance {
    pub y: DMatrix<Complex64>,
}

impl Admittance {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }
}

/// Parallel circuits add their series and shunt admittances.
pub fn build_admittance(n_bus: usize, circuits: &[Circuit]) -> Result<Admittance, PowerFlowError> {
    if circuits.iter().all(|c| c.count == 0) {
        return Err(PowerFlowError::NoCircuits);
    }
    let mut y = DMatrix::<Complex64>::zeros(n_bus, n_bus);
    let mut touched = vec![false; n_bus];
    for c in circuits.iter().filter(|c| c.count > 0) {
        let k = c.count as f64;
        let ys = Complex64::new(k, 0.0) / Complex64::new(c.r, c.x);
        let ysh = Complex64::new(0.0, k * c.b);
        y[(c.from, c.from)] += ys + ysh;
        y[(c.to, c.to)] += ys + ysh;
        y[(c.from, c.to)] -= ys;
        y[(c.to, c.from)] -= ys;
        touched[c.from] = true;
        touched[c.to] = true;
    }
    if let Some(bus) = touched.iter().position(|t| !t) {
        return Err(PowerFlowError::IsolatedBus { bus });
    }
    Ok(Admittance { y })
}
