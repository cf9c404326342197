//! Thin wrapper over the `minilp` simplex solver.

use std::panic::{catch_unwind, AssertUnwindSafe};

use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex solver failed")]
    Numerical,
}

impl From<minilp::Error> for LpError {
    fn from(e: minilp::Error) -> Self {
        match e {
            minilp::Error::Infeasible => LpError::Infeasible,
            minilp::Error::Unbounded => LpError::Unbounded,
        }
    }
}

pub type Var = Variable;

/// Minimisation problem under construction.
pub struct Lp {
    problem: Problem,
    n_vars: usize,
}

impl Default for Lp {
    fn default() -> Self {
        Self::new()
    }
}

impl Lp {
    pub fn new() -> Self {
        Lp {
            problem: Problem::new(OptimizationDirection::Minimize),
            n_vars: 0,
        }
    }

    pub fn var(&mut self, cost: f64, lo: f64, hi: f64) -> Var {
        self.n_vars += 1;
        self.problem.add_var(cost, (lo, hi))
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn le(&mut self, terms: &[(Var, f64)], rhs: f64) {
        self.problem.add_constraint(clean(terms), ComparisonOp::Le, rhs);
    }

    pub fn ge(&mut self, terms: &[(Var, f64)], rhs: f64) {
        self.problem.add_constraint(clean(terms), ComparisonOp::Ge, rhs);
    }

    pub fn eq(&mut self, terms: &[(Var, f64)], rhs: f64) {
        self.problem.add_constraint(clean(terms), ComparisonOp::Eq, rhs);
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let out = catch_unwind(AssertUnwindSafe(|| self.problem.solve()))
            .map_err(|_| LpError::Numerical)?;
        let sol = out?;
        check(sol)
    }
}

/// Solved problem; constraints may be appended and re-solved warm.
pub struct LpSolution {
    sol: Solution,
}

impl LpSolution {
    pub fn value(&self, v: Var) -> f64 {
        *self.sol.var_value(v)
    }

    pub fn objective(&self) -> f64 {
        self.sol.objective()
    }

    pub fn add_le(self, terms: &[(Var, f64)], rhs: f64) -> Result<LpSolution, LpError> {
        let sol = self.sol;
        let terms = clean(terms);
        let out = catch_unwind(AssertUnwindSafe(move || {
            sol.add_constraint(terms, ComparisonOp::Le, rhs)
        }))
        .map_err(|_| LpError::Numerical)?;
        check(out?)
    }
}

fn clean(terms: &[(Var, f64)]) -> Vec<(Var, f64)> {
    let mut out: Vec<(Var, f64)> = Vec::with_capacity(terms.len());
    for &(v, c) in terms {
        if c == 0.0 {
            continue;
        }
        match out.iter_mut().find(|(w, _)| *w == v) {
            Some(t) => t.1 += c,
            None => out.push((v, c)),
        }
    }
    out
}

fn check(sol: Solution) -> Result<LpSolution, LpError> {
    if sol.objective().is_finite() {
        Ok(LpSolution { sol })
    } else {
        Err(LpError::Numerical)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_problem() {
        // min x + 2y  s.t. x + y >= 3, x <= 2
        let mut lp = Lp::new();
        let x = lp.var(1.0, 0.0, 2.0);
        let y = lp.var(2.0, 0.0, f64::INFINITY);
        lp.ge(&[(x, 1.0), (y, 1.0)], 3.0);
        let s = lp.solve().unwrap();
        assert!((s.value(x) - 2.0).abs() < 1e-9);
        assert!((s.value(y) - 1.0).abs() < 1e-9);
        assert!((s.objective() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reported() {
        let mut lp = Lp::new();
        let x = lp.var(1.0, 0.0, 1.0);
        lp.ge(&[(x, 1.0)], 2.0);
        assert_eq!(lp.solve().err(), Some(LpError::Infeasible));
    }

    #[test]
    fn warm_cut() {
        let mut lp = Lp::new();
        let x = lp.var(-1.0, 0.0, 10.0);
        let s = lp.solve().unwrap();
        assert!((s.value(x) - 10.0).abs() < 1e-9);
        let s = s.add_le(&[(x, 1.0)], 4.0).unwrap();
        assert!((s.value(x) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_terms_merge() {
        let mut lp = Lp::new();
        let x = lp.var(-1.0, 0.0, 10.0);
        lp.le(&[(x, 1.0), (x, 1.0)], 4.0);
        assert!((lp.solve().unwrap().value(x) - 2.0).abs() < 1e-9);
    }
}
