use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Network;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("plan covers {got} corridors / {got_years} years, network has {want} / {want_years}")]
    Shape {
        got: usize,
        got_years: usize,
        want: usize,
        want_years: usize,
    },
    #[error("corridor {corridor}: year {year} has {now} lines but year {prev_year} had {prev}")]
    Decreasing {
        corridor: usize,
        year: usize,
        now: u32,
        prev_year: usize,
        prev: u32,
    },
    #[error("corridor {corridor}: {lines} new lines exceed the cap of {cap}")]
    OverCap { corridor: usize, lines: u32, cap: u32 },
}

/// New-line counts per corridor and year in cumulative form: `lines[l][y]`
/// is the number of new circuits present in corridor `l` during year
/// `y + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExpansionPlan {
    lines: Vec<Vec<u32>>,
}

impl ExpansionPlan {
    pub fn empty(corridors: usize, years: usize) -> Self {
        ExpansionPlan {
            lines: vec![vec![0; years]; corridors],
        }
    }

    pub fn for_network(net: &Network) -> Self {
        Self::empty(net.n_corridors(), net.years())
    }

    /// Builds a plan from per-year additions (`added[l][y]` lines built in
    /// year `y + 1`).
    pub fn from_increments(added: &[Vec<u32>]) -> Self {
        let lines = added
            .iter()
            .map(|row| {
                let mut acc = 0;
                row.iter()
                    .map(|a| {
                        acc += a;
                        acc
                    })
                    .collect()
            })
            .collect();
        ExpansionPlan { lines }
    }

    pub fn from_cumulative(lines: Vec<Vec<u32>>) -> Self {
        ExpansionPlan { lines }
    }

    pub fn corridors(&self) -> usize {
        self.lines.len()
    }

    pub fn years(&self) -> usize {
        self.lines.first().map_or(0, |r| r.len())
    }

    /// Cumulative new lines of corridor `l` in year `year` (1-based).
    pub fn get(&self, l: usize, year: usize) -> u32 {
        self.lines[l][year - 1]
    }

    pub fn set(&mut self, l: usize, year: usize, n: u32) {
        self.lines[l][year - 1] = n;
    }

    pub fn row(&self, l: usize) -> &[u32] {
        &self.lines[l]
    }

    pub fn row_mut(&mut self, l: usize) -> &mut [u32] {
        &mut self.lines[l]
    }

    /// Lines built in `year` (1-based): `n[l][y] - n[l][y-1]`, with
    /// `n[l][0] = 0`.
    pub fn added_in(&self, l: usize, year: usize) -> u32 {
        let now = self.lines[l][year - 1];
        let prev = if year > 1 { self.lines[l][year - 2] } else { 0 };
        now.saturating_sub(prev)
    }

    /// Column of cumulative counts for one year; identifies the year's
    /// network topology.
    pub fn column(&self, year: usize) -> Vec<u32> {
        self.lines.iter().map(|r| r[year - 1]).collect()
    }

    pub fn final_column(&self) -> Vec<u32> {
        self.column(self.years())
    }

    pub fn total_added(&self, year: usize) -> u32 {
        (0..self.corridors()).map(|l| self.added_in(l, year)).sum()
    }

    /// Corridors holding at least one new line by the end of the horizon.
    pub fn used_corridors(&self) -> Vec<usize> {
        (0..self.corridors())
            .filter(|&l| self.lines[l].last().copied().unwrap_or(0) > 0)
            .collect()
    }

    /// Corridors that have new lines in `year`.
    pub fn corridors_in_year(&self, year: usize) -> usize {
        (0..self.corridors())
            .filter(|&l| self.lines[l][year - 1] > 0)
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.iter().all(|r| r.iter().all(|&n| n == 0))
    }

    /// Checks monotonicity across years and the per-corridor cap.
    pub fn validate(&self, net: &Network) -> Result<(), PlanError> {
        if self.corridors() != net.n_corridors() || self.years() != net.years() {
            return Err(PlanError::Shape {
                got: self.corridors(),
                got_years: self.years(),
                want: net.n_corridors(),
                want_years: net.years(),
            });
        }
        for (l, row) in self.lines.iter().enumerate() {
            for y in 1..row.len() {
                if row[y] < row[y - 1] {
                    return Err(PlanError::Decreasing {
                        corridor: l,
                        year: y + 1,
                        now: row[y],
                        prev_year: y,
                        prev: row[y - 1],
                    });
                }
            }
            let last = *row.last().unwrap_or(&0);
            let cap = net.corridors[l].max_new;
            if last > cap {
                return Err(PlanError::OverCap {
                    corridor: l,
                    lines: last,
                    cap,
                });
            }
        }
        Ok(())
    }
}

/// Added shunt reactive compensation per year and bus, MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactivePlan {
    per_year: Vec<Vec<f64>>,
}

impl ReactivePlan {
    pub fn zeros(years: usize, buses: usize) -> Self {
        ReactivePlan {
            per_year: vec![vec![0.0; buses]; years],
        }
    }

    pub fn from_years(per_year: Vec<Vec<f64>>) -> Self {
        assert!(
            per_year.iter().flatten().all(|q| *q >= 0.0),
            "reactive compensation must be nonnegative"
        );
        ReactivePlan { per_year }
    }

    /// Compensation in `year` (1-based).
    pub fn year(&self, year: usize) -> &[f64] {
        &self.per_year[year - 1]
    }

    pub fn years(&self) -> usize {
        self.per_year.len()
    }

    pub fn total(&self, year: usize) -> f64 {
        self.per_year[year - 1].iter().sum()
    }
}
