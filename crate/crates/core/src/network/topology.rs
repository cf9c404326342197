use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExpansionPlan, Network, NetworkError};

/// Operating state of the network: intact, or one circuit of a corridor out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Contingency {
    Base,
    /// One circuit of the given corridor is out of service.
    Outage(usize),
}

impl Contingency {
    pub fn is_base(&self) -> bool {
        matches!(self, Contingency::Base)
    }
}

/// A group of identical parallel circuits in one corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub corridor: usize,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Half line-charging susceptance of one circuit.
    pub b: f64,
    /// Per-circuit rating, MVA.
    pub rating: f64,
    pub count: u32,
}

impl Circuit {
    /// Series admittance `(g, b)` of a single circuit.
    pub fn series(&self) -> (f64, f64) {
        let d = self.r * self.r + self.x * self.x;
        (self.r / d, -self.x / d)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error(transparent)]
    Year(#[from] NetworkError),
    #[error("corridor {corridor} has no circuit in service in year {year} to take out")]
    NothingToOutage { corridor: usize, year: usize },
    #[error("corridor {0} does not exist")]
    UnknownCorridor(usize),
}

/// In-service circuits of `plan` in `year` (1-based) under contingency `k`.
/// Corridor counts are `n_0 + n[l][y]`, one fewer on the outaged corridor.
pub fn realize_topology(
    net: &Network,
    plan: &ExpansionPlan,
    year: usize,
    k: Contingency,
) -> Result<Vec<Circuit>, TopologyError> {
    net.check_year(year)?;
    if let Contingency::Outage(c) = k {
        if c >= net.n_corridors() {
            return Err(TopologyError::UnknownCorridor(c));
        }
    }
    let mut out = Vec::new();
    for cor in &net.corridors {
        let mut count = cor.existing + plan.get(cor.id, year);
        if k == Contingency::Outage(cor.id) {
            if count == 0 {
                return Err(TopologyError::NothingToOutage {
                    corridor: cor.id,
                    year,
                });
            }
            count -= 1;
        }
        if count > 0 {
            out.push(Circuit {
                corridor: cor.id,
                from: cor.from,
                to: cor.to,
                r: cor.r,
                x: cor.x,
                b: cor.b,
                rating: cor.rating,
                count,
            });
        }
    }
    Ok(out)
}

/// Same circuit list with one circuit of `corridor` removed.
pub(crate) fn without_one(circuits: &[Circuit], corridor: usize) -> Vec<Circuit> {
    circuits
        .iter()
        .filter_map(|c| {
            if c.corridor != corridor {
                Some(c.clone())
            } else if c.count > 1 {
                Some(Circuit {
                    count: c.count - 1,
                    ..c.clone()
                })
            } else {
                None
            }
        })
        .collect()
}
