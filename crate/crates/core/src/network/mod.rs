//! Planning universe: buses, generators, demand, candidate corridors and the
//! multi-year horizon.

mod case;
mod plan;
mod topology;

pub use case::{load_case, parse_case, CaseFile};
pub use plan::{ExpansionPlan, PlanError, ReactivePlan};
pub use topology::{realize_topology, Circuit, Contingency, TopologyError};
pub(crate) use topology::without_one;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number as written in the case file.
    pub id: u32,
    pub kind: BusKind,
    pub v_nom: f64,
}

/// A dispatchable unit. Limits are year-1 values in MW / MVAr; they scale
/// with [`Horizon::gen_growth`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Generator {
    /// Internal bus index.
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

/// A candidate right-of-way. Parallel circuits inside one corridor are
/// identical; a different line type between the same buses is a separate
/// corridor with its own `class`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corridor {
    /// Ordinal in the corridor catalog (0-based; reports print `id + 1`).
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Half of the total line charging susceptance, pu.
    pub b: f64,
    /// Per-circuit MVA rating.
    pub rating: f64,
    pub cost: f64,
    pub max_new: u32,
    pub existing: u32,
    pub class: String,
}

impl Corridor {
    pub fn number(&self) -> usize {
        self.id + 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Horizon {
    pub years: usize,
    /// Demand multiplier per year, year 1 first.
    pub growth: Vec<f64>,
    /// Generator limit multiplier per year.
    pub gen_growth: Vec<f64>,
    /// Discount factor applied to investment made in each year.
    pub discount: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Limits {
    pub v_base_pct: f64,
    pub v_cont_pct: f64,
    pub l_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            v_base_pct: 5.0,
            v_cont_pct: 10.0,
            l_max: 0.4,
        }
    }
}

/// Per-bus demand for one year, MW / MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl Demand {
    pub fn total_p(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn total_q(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn zeros(n: usize) -> Self {
        Demand {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("year {year} outside planning horizon 1..={years}")]
    YearOutOfRange { year: usize, years: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    /// Year-1 demand per bus index.
    pub base_demand: Demand,
    pub corridors: Vec<Corridor>,
    pub horizon: Horizon,
    pub limits: Limits,
    /// Internal index of the slack bus.
    pub slack: usize,
}

impl Network {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_corridors(&self) -> usize {
        self.corridors.len()
    }

    pub fn years(&self) -> usize {
        self.horizon.years
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn check_year(&self, year: usize) -> Result<(), NetworkError> {
        if year == 0 || year > self.horizon.years {
            return Err(NetworkError::YearOutOfRange {
                year,
                years: self.horizon.years,
            });
        }
        Ok(())
    }

    /// Demand of year `year` (1-based): base demand scaled by that year's
    /// growth factor.
    pub fn demand_for_year(&self, year: usize) -> Result<Demand, NetworkError> {
        self.check_year(year)?;
        let f = self.horizon.growth[year - 1];
        Ok(Demand {
            p: self.base_demand.p.iter().map(|p| p * f).collect(),
            q: self.base_demand.q.iter().map(|q| q * f).collect(),
        })
    }

    pub fn gen_scale(&self, year: usize) -> Result<f64, NetworkError> {
        self.check_year(year)?;
        Ok(self.horizon.gen_growth[year - 1])
    }

    pub fn discount(&self, year: usize) -> Result<f64, NetworkError> {
        self.check_year(year)?;
        Ok(self.horizon.discount[year - 1])
    }

    /// Buses hosting at least one generator.
    pub fn generator_buses(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.generators.iter().map(|g| g.bus).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Human readable `from-to` label using external bus ids.
    pub fn corridor_label(&self, id: usize) -> String {
        let c = &self.corridors[id];
        format!("{}-{}", self.buses[c.from].id, self.buses[c.to].id)
    }

    /// Corridor lookup by endpoint ids (either orientation), first class.
    pub fn find_corridor(&self, a: u32, b: u32) -> Option<usize> {
        let (ia, ib) = (self.bus_index(a)?, self.bus_index(b)?);
        self.corridors
            .iter()
            .position(|c| (c.from == ia && c.to == ib) || (c.from == ib && c.to == ia))
    }

    /// Upper bound on the cost of any admissible plan: every corridor filled
    /// to its cap, undiscounted.
    pub fn max_plan_cost(&self) -> f64 {
        self.corridors
            .iter()
            .map(|c| c.cost * c.max_new as f64)
            .sum()
    }

    /// Copy of the network reduced to a single year: demand and generator
    /// limits of `year`, the lines of `built` treated as existing, and caps
    /// reduced accordingly. Used for year-by-year sequential planning.
    pub fn single_year(&self, year: usize, built: &[u32]) -> Result<Network, NetworkError> {
        self.check_year(year)?;
        let mut net = self.clone();
        net.base_demand = self.demand_for_year(year)?;
        let gs = self.horizon.gen_growth[year - 1];
        for g in &mut net.generators {
            g.p_min *= gs;
            g.p_max *= gs;
            g.q_min *= gs;
            g.q_max *= gs;
        }
        for (c, &n) in net.corridors.iter_mut().zip(built) {
            c.existing += n;
            c.max_new = c.max_new.saturating_sub(n);
        }
        net.horizon = Horizon {
            years: 1,
            growth: vec![1.0],
            gen_growth: vec![1.0],
            discount: vec![1.0],
        };
        Ok(net)
    }
}
