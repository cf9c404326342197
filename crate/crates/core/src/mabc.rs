//! Modified artificial bee colony search over integer line-addition plans.
//!
//! Food sources are cumulative expansion plans. Employed and onlooker bees
//! move coordinates towards or away from a peer and towards the best plan
//! found so far (weight `w_g`); the result is repaired so that every plan
//! handed to the evaluator is monotone over the years and within the
//! per-corridor caps. Sources that fail to improve more than `limit` times
//! are abandoned and re-drawn by scouts.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ExpansionPlan, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabcParams {
    /// Colony size (number of food sources; as many onlookers).
    pub colony: usize,
    /// Number of colony members drawn when picking a peer.
    pub neighbours: usize,
    /// Abandonment limit.
    pub limit: usize,
    pub iterations: usize,
    /// Weight of the best-solution guidance term.
    pub w_g: f64,
    pub seed: u64,
}

impl MabcParams {
    /// Setting used for DC problems.
    pub fn dc() -> Self {
        MabcParams {
            colony: 5,
            neighbours: 2,
            limit: 6,
            iterations: 15,
            w_g: 1.5,
            seed: 1,
        }
    }

    /// Setting used for AC problems.
    pub fn ac() -> Self {
        MabcParams {
            colony: 20,
            neighbours: 2,
            limit: 6,
            iterations: 30,
            w_g: 1.5,
            seed: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), MabcError> {
        if self.colony == 0 || self.neighbours == 0 || self.limit == 0 {
            return Err(MabcError::Params("colony, neighbours and limit must be at least 1".into()));
        }
        if !(self.w_g >= 0.0) {
            return Err(MabcError::Params("w_g must be non-negative".into()));
        }
        Ok(())
    }

    /// Applies a `key=value` override (`cs_n`, `e_h`, `lim`, `iter`,
    /// `w_g`, `seed` or the long field names).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), MabcError> {
        let bad = || MabcError::Params(format!("bad value {value:?} for {key}"));
        match key {
            "cs_n" | "colony" => self.colony = value.parse().map_err(|_| bad())?,
            "e_h" | "neighbours" => self.neighbours = value.parse().map_err(|_| bad())?,
            "lim" | "limit" => self.limit = value.parse().map_err(|_| bad())?,
            "iter" | "iterations" => self.iterations = value.parse().map_err(|_| bad())?,
            "w_g" => self.w_g = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(MabcError::Params(format!("unknown parameter {key}"))),
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MabcError {
    #[error("search space has no free coordinate")]
    EmptySpace,
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("search space shape does not match the warm-start plan")]
    Shape,
}

/// Corridors the search may touch, their caps, and corridors that must
/// carry at least one new line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_corridors: usize,
    pub years: usize,
    /// Searchable corridors, sorted.
    pub corridors: Vec<usize>,
    /// Cap per corridor (indexed by corridor id, full length).
    pub caps: Vec<u32>,
    /// Corridors forced to hold at least one new line.
    pub fixed: Vec<usize>,
    /// Probability that a corridor is used by a freshly drawn plan.
    pub density: f64,
}

impl SearchSpace {
    pub fn full(net: &Network) -> Self {
        let corridors: Vec<usize> = (0..net.n_corridors()).filter(|&l| net.corridors[l].max_new > 0).collect();
        // about five corridors per fresh plan on large catalogs
        let density = (5.0 / corridors.len().max(1) as f64).min(0.3);
        SearchSpace {
            n_corridors: net.n_corridors(),
            years: net.years(),
            corridors,
            caps: net.corridors.iter().map(|c| c.max_new).collect(),
            fixed: Vec::new(),
            density,
        }
    }

    /// Space restricted to `corridors` with `fixed` forced in.
    pub fn restricted(net: &Network, corridors: &[usize], fixed: &[usize]) -> Self {
        let mut s = Self::full(net);
        let mut c: Vec<usize> = corridors.iter().chain(fixed).copied().collect();
        c.sort_unstable();
        c.dedup();
        s.corridors = c.into_iter().filter(|&l| s.caps[l] > 0).collect();
        s.fixed = fixed.iter().copied().filter(|&l| s.caps[l] > 0).collect();
        s.fixed.sort_unstable();
        s.fixed.dedup();
        s
    }

    pub fn with_caps(mut self, cap: u32) -> Self {
        for c in &mut self.caps {
            *c = (*c).min(cap);
        }
        self.corridors.retain(|&l| self.caps[l] > 0);
        self
    }

    fn dims(&self) -> usize {
        self.corridors.len() * self.years
    }

    /// Brings `plan` into the space: zero outside it, capped, monotone over
    /// the years, fixed corridors holding at least one line.
    pub fn repair(&self, plan: &mut ExpansionPlan) {
        let mut inside = vec![false; self.n_corridors];
        for &l in &self.corridors {
            inside[l] = true;
        }
        for l in 0..self.n_corridors {
            let row = plan.row_mut(l);
            if !inside[l] {
                row.iter_mut().for_each(|x| *x = 0);
                continue;
            }
            let cap = self.caps[l];
            let mut prev = 0;
            for x in row.iter_mut() {
                *x = (*x).clamp(prev, cap);
                prev = *x;
            }
        }
        for &l in &self.fixed {
            let row = plan.row_mut(l);
            let last = row.len() - 1;
            if row[last] == 0 {
                row[last] = 1;
            }
        }
    }

    /// Sparse random plan: each corridor is used with probability
    /// `density`, with a random final count and random build years.
    pub fn random_plan(&self, rng: &mut impl Rng) -> ExpansionPlan {
        let mut plan = ExpansionPlan::empty(self.n_corridors, self.years);
        for &l in &self.corridors {
            let forced = self.fixed.binary_search(&l).is_ok();
            if !forced && !rng.gen_bool(self.density.clamp(0.0, 1.0)) {
                continue;
            }
            let total = rng.gen_range(1..=self.caps[l]);
            let mut steps: Vec<u32> = (1..self.years).map(|_| rng.gen_range(0..=total)).collect();
            steps.sort_unstable();
            steps.push(total);
            if forced {
                steps[0] = steps[0].max(1);
            }
            plan.row_mut(l).copy_from_slice(&steps);
        }
        self.repair(&mut plan);
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodSource {
    pub plan: ExpansionPlan,
    pub fitness: f64,
    /// Failed improvement attempts since the source was last improved.
    pub trials: usize,
}

/// Plan evaluator. Plans of one batch are independent; an implementation
/// may solve them in parallel.
pub trait Fitness {
    fn evaluate(&mut self, plans: &[ExpansionPlan]) -> Vec<f64>;
}

impl<F: FnMut(&ExpansionPlan) -> f64> Fitness for F {
    fn evaluate(&mut self, plans: &[ExpansionPlan]) -> Vec<f64> {
        plans.iter().map(self).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best: f64,
    pub mean: f64,
    pub variance: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: FoodSource,
    pub history: Vec<IterationRecord>,
    pub colony: Vec<FoodSource>,
    pub evaluations: usize,
}

/// Population variance of the colony's fitness values.
pub fn variance(colony: &[FoodSource]) -> f64 {
    if colony.is_empty() {
        return 0.0;
    }
    let n = colony.len() as f64;
    let mean = colony.iter().map(|f| f.fitness).sum::<f64>() / n;
    colony.iter().map(|f| (f.fitness - mean).powi(2)).sum::<f64>() / n
}

fn record(iteration: usize, colony: &[FoodSource], best: &FoodSource, evaluations: usize) -> IterationRecord {
    let n = colony.len() as f64;
    IterationRecord {
        iteration,
        best: best.fitness,
        mean: colony.iter().map(|f| f.fitness).sum::<f64>() / n,
        variance: variance(colony),
        evaluations,
    }
}

/// Candidate derived from `colony[src]`: a few coordinates move by
/// `round(x + phi (x - x_peer) + w_g psi (x_best - x))` with
/// `phi ~ U(-1, 1)`, `psi ~ U(0, 1)`; the peer is the fittest of
/// `neighbours` members drawn at random. The result is repaired and always
/// differs from the source when the space allows it.
pub fn neighbor(
    src: usize,
    colony: &[FoodSource],
    best: &ExpansionPlan,
    space: &SearchSpace,
    params: &MabcParams,
    rng: &mut impl Rng,
) -> ExpansionPlan {
    let x = &colony[src].plan;
    let peer = pick_peer(src, colony, params.neighbours, rng);
    let p = &colony[peer].plan;
    let dims = space.dims();
    if dims == 0 {
        return x.clone();
    }
    for _ in 0..8 {
        let mut cand = x.clone();
        let moves = rng.gen_range(1..=dims.min(3));
        for d in sample(rng, dims, moves) {
            let l = space.corridors[d / space.years];
            let y = d % space.years + 1;
            let xv = x.get(l, y) as f64;
            let phi: f64 = rng.gen_range(-1.0..=1.0);
            let psi: f64 = rng.gen_range(0.0..=1.0);
            let v = xv + phi * (xv - p.get(l, y) as f64) + params.w_g * psi * (best.get(l, y) as f64 - xv);
            let v = v.round().clamp(0.0, space.caps[l] as f64) as u32;
            cand.set(l, y, v);
            // keep the moved coordinate when repairing the rest of the row
            let row = cand.row_mut(l);
            for k in 0..y - 1 {
                row[k] = row[k].min(v);
            }
        }
        space.repair(&mut cand);
        if cand != *x {
            return cand;
        }
    }
    // no move left the source: step one coordinate by one line
    for _ in 0..4 * dims {
        let d = rng.gen_range(0..dims);
        let l = space.corridors[d / space.years];
        let y = d % space.years + 1;
        let mut cand = x.clone();
        let v = x.get(l, y);
        let up = v < space.caps[l] && (v == 0 || rng.gen_bool(0.5));
        cand.set(l, y, if up { v + 1 } else { v.saturating_sub(1) });
        let row = cand.row_mut(l);
        for k in 0..y - 1 {
            row[k] = row[k].min(row[y - 1]);
        }
        space.repair(&mut cand);
        if cand != *x {
            return cand;
        }
    }
    x.clone()
}

fn pick_peer(src: usize, colony: &[FoodSource], neighbours: usize, rng: &mut impl Rng) -> usize {
    let n = colony.len();
    if n == 1 {
        return src;
    }
    let draws = neighbours.min(n - 1);
    let mut peer: Option<usize> = None;
    for k in sample(rng, n - 1, draws) {
        let k = if k >= src { k + 1 } else { k };
        peer = match peer {
            Some(p) if colony[p].fitness <= colony[k].fitness => Some(p),
            _ => Some(k),
        };
    }
    peer.unwrap()
}

/// Minimises `fitness` over `space`. `warm` plans (repaired into the
/// space) seed the first colony members.
pub fn run(
    fitness: &mut dyn Fitness,
    space: &SearchSpace,
    params: &MabcParams,
    warm: &[ExpansionPlan],
) -> Result<RunResult, MabcError> {
    params.validate()?;
    if space.dims() == 0 {
        return Err(MabcError::EmptySpace);
    }
    for w in warm {
        if w.corridors() != space.n_corridors || w.years() != space.years {
            return Err(MabcError::Shape);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut plans: Vec<ExpansionPlan> = warm
        .iter()
        .take(params.colony)
        .map(|w| {
            let mut p = w.clone();
            space.repair(&mut p);
            p
        })
        .collect();
    while plans.len() < params.colony {
        plans.push(space.random_plan(&mut rng));
    }
    let values = fitness.evaluate(&plans);
    let mut evaluations = plans.len();
    let mut colony: Vec<FoodSource> = plans
        .into_iter()
        .zip(values)
        .map(|(plan, fitness)| FoodSource {
            plan,
            fitness,
            trials: 0,
        })
        .collect();
    let mut best = colony[0].clone();
    for f in &colony[1..] {
        if f.fitness < best.fitness {
            best = f.clone();
        }
    }
    best.trials = 0;
    let mut history = vec![record(0, &colony, &best, evaluations)];

    for it in 1..=params.iterations {
        // employed bees: one candidate per source
        let cands: Vec<ExpansionPlan> = (0..colony.len())
            .map(|i| neighbor(i, &colony, &best.plan, space, params, &mut rng))
            .collect();
        let values = fitness.evaluate(&cands);
        evaluations += cands.len();
        for (i, (plan, f)) in cands.into_iter().zip(values).enumerate() {
            accept(&mut colony[i], plan, f);
        }
        update_best(&mut best, &colony);

        // onlookers: sources picked with probability ~ 1 / (1 + f)
        let weights: Vec<f64> = colony.iter().map(|f| 1.0 / (1.0 + f.fitness.max(0.0))).collect();
        let total: f64 = weights.iter().sum();
        let picks: Vec<usize> = (0..params.colony)
            .map(|_| {
                let mut r = rng.gen_range(0.0..total);
                for (i, w) in weights.iter().enumerate() {
                    if r < *w {
                        return i;
                    }
                    r -= w;
                }
                weights.len() - 1
            })
            .collect();
        let cands: Vec<ExpansionPlan> = picks
            .iter()
            .map(|&i| neighbor(i, &colony, &best.plan, space, params, &mut rng))
            .collect();
        let values = fitness.evaluate(&cands);
        evaluations += cands.len();
        for ((plan, f), &i) in cands.into_iter().zip(values).zip(&picks) {
            accept(&mut colony[i], plan, f);
        }
        update_best(&mut best, &colony);

        // scouts
        let stale: Vec<usize> = (0..colony.len()).filter(|&i| colony[i].trials > params.limit).collect();
        if !stale.is_empty() {
            let fresh: Vec<ExpansionPlan> = stale.iter().map(|_| space.random_plan(&mut rng)).collect();
            let values = fitness.evaluate(&fresh);
            evaluations += fresh.len();
            for ((plan, f), &i) in fresh.into_iter().zip(values).zip(&stale) {
                colony[i] = FoodSource {
                    plan,
                    fitness: f,
                    trials: 0,
                };
            }
            update_best(&mut best, &colony);
        }
        history.push(record(it, &colony, &best, evaluations));
    }
    Ok(RunResult {
        best,
        history,
        colony,
        evaluations,
    })
}

fn accept(src: &mut FoodSource, plan: ExpansionPlan, f: f64) {
    if f < src.fitness {
        *src = FoodSource {
            plan,
            fitness: f,
            trials: 0,
        };
    } else {
        src.trials += 1;
    }
}

fn update_best(best: &mut FoodSource, colony: &[FoodSource]) {
    for f in colony {
        if f.fitness < best.fitness {
            *best = FoodSource {
                plan: f.plan.clone(),
                fitness: f.fitness,
                trials: 0,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_space(corridors: usize, years: usize, cap: u32) -> SearchSpace {
        SearchSpace {
            n_corridors: corridors,
            years,
            corridors: (0..corridors).collect(),
            caps: vec![cap; corridors],
            fixed: Vec::new(),
            density: 0.5,
        }
    }

    fn source(rows: Vec<Vec<u32>>, fitness: f64) -> FoodSource {
        FoodSource {
            plan: ExpansionPlan::from_cumulative(rows),
            fitness,
            trials: 0,
        }
    }

    #[test]
    fn variance_examples() {
        let a = source(vec![vec![0]], 1.0);
        let b = source(vec![vec![0]], 3.0);
        assert_eq!(variance(&[a.clone(), a.clone()]), 0.0);
        assert!((variance(&[a, b]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repair_raises_later_years() {
        let space = toy_space(1, 2, 5);
        let mut p = ExpansionPlan::from_cumulative(vec![vec![2, 1]]);
        space.repair(&mut p);
        assert_eq!(p.row(0), &[2, 2]);
    }

    #[test]
    fn repair_forces_fixed_and_clears_outside() {
        let mut space = toy_space(3, 2, 2);
        space.corridors = vec![0, 1];
        space.fixed = vec![1];
        let mut p = ExpansionPlan::from_cumulative(vec![vec![3, 4], vec![0, 0], vec![1, 1]]);
        space.repair(&mut p);
        assert_eq!(p.row(0), &[2, 2]);
        assert_eq!(p.row(1), &[0, 1]);
        assert_eq!(p.row(2), &[0, 0]);
    }

    #[test]
    fn neighbor_differs_from_source() {
        let space = toy_space(4, 2, 3);
        let colony = vec![source(vec![vec![1, 1]; 4], 1.0), source(vec![vec![1, 1]; 4], 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = MabcParams::ac();
        for _ in 0..200 {
            let c = neighbor(0, &colony, &colony[0].plan, &space, &params, &mut rng);
            assert_ne!(c, colony[0].plan);
        }
    }

    #[test]
    fn colony_of_one_without_iterations_returns_member() {
        let space = toy_space(3, 1, 2);
        let params = MabcParams {
            colony: 1,
            iterations: 0,
            ..MabcParams::dc()
        };
        let warm = ExpansionPlan::from_cumulative(vec![vec![1], vec![0], vec![2]]);
        let mut f = |p: &ExpansionPlan| (0..3).map(|l| p.get(l, 1) as f64).sum::<f64>();
        let r = run(&mut f, &space, &params, std::slice::from_ref(&warm)).unwrap();
        assert_eq!(r.best.plan, warm);
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn empty_space_is_error() {
        let space = toy_space(0, 1, 2);
        let mut f = |_: &ExpansionPlan| 0.0;
        assert_eq!(run(&mut f, &space, &MabcParams::dc(), &[]).unwrap_err(), MabcError::EmptySpace);
    }

    #[test]
    fn parameter_overrides() {
        let mut p = MabcParams::ac();
        p.set("e_h", "4").unwrap();
        p.set("lim", "9").unwrap();
        assert_eq!((p.neighbours, p.limit), (4, 9));
        assert!(p.set("nope", "1").is_err());
        assert!(p.set("w_g", "x").is_err());
    }
}
