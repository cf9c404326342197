use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Bus, BusKind, Corridor, Demand, Generator, Horizon, Limits, Network};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed case file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid {record}: {reason}")]
    Invalid { record: String, reason: String },
}

fn invalid(record: impl Into<String>, reason: impl Into<String>) -> CaseError {
    CaseError::Invalid {
        record: record.into(),
        reason: reason.into(),
    }
}

/// On-disk case document. Impedances are pu on the system base; powers are
/// MW / MVAr / MVA.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub meta: MetaRecord,
    pub buses: Vec<BusRecord>,
    pub generators: Vec<GeneratorRecord>,
    pub loads: Vec<LoadRecord>,
    pub corridors: Vec<CorridorRecord>,
    #[serde(default)]
    pub limits: LimitsRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaRecord {
    pub name: String,
    pub base_mva: f64,
    pub horizon: usize,
    pub discount_rate: f64,
    /// Explicit per-year discount factors; when absent they follow
    /// `(1 + discount_rate)^-(y-1)`.
    #[serde(default)]
    pub discount_factors: Option<Vec<f64>>,
    pub growth: Vec<f64>,
    /// Generator limit multipliers; defaults to `growth`.
    #[serde(default)]
    pub gen_growth: Option<Vec<f64>>,
    #[serde(default)]
    pub notes: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
    #[serde(rename = "type")]
    pub kind: BusKind,
    #[serde(default = "one")]
    pub v_nom: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorRecord {
    pub bus: u32,
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadRecord {
    pub bus: u32,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorRecord {
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    pub rating: f64,
    pub cost: f64,
    pub max_new: u32,
    #[serde(default)]
    pub existing: u32,
    #[serde(default = "default_class")]
    pub class: String,
}

fn default_class() -> String {
    "a".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsRecord {
    pub v_base_pct: f64,
    pub v_cont_pct: f64,
    pub l_max: f64,
}

impl Default for LimitsRecord {
    fn default() -> Self {
        let d = Limits::default();
        LimitsRecord {
            v_base_pct: d.v_base_pct,
            v_cont_pct: d.v_cont_pct,
            l_max: d.l_max,
        }
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<Network, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let file: CaseFile = serde_json::from_str(text)?;
    file.into_network()
}

impl CaseFile {
    pub fn into_network(self) -> Result<Network, CaseError> {
        let meta = &self.meta;
        if meta.horizon < 1 {
            return Err(invalid("meta", "horizon must be at least 1 year"));
        }
        if !(meta.base_mva > 0.0) {
            return Err(invalid("meta", "base_mva must be positive"));
        }
        let years = meta.horizon;
        let check_factors = |name: &str, v: &[f64]| -> Result<(), CaseError> {
            if v.len() != years {
                return Err(invalid(
                    "meta",
                    format!("{name} has {} entries, horizon is {years}", v.len()),
                ));
            }
            if let Some(bad) = v.iter().find(|f| !(**f > 0.0)) {
                return Err(invalid("meta", format!("{name} factor {bad} is not positive")));
            }
            Ok(())
        };
        check_factors("growth", &meta.growth)?;
        let gen_growth = meta.gen_growth.clone().unwrap_or_else(|| meta.growth.clone());
        check_factors("gen_growth", &gen_growth)?;
        if !(meta.discount_rate > -1.0) {
            return Err(invalid("meta", "discount_rate must exceed -1"));
        }
        let discount = match &meta.discount_factors {
            Some(d) => d.clone(),
            None => (0..years)
                .map(|y| (1.0 + meta.discount_rate).powi(-(y as i32)))
                .collect(),
        };
        check_factors("discount_factors", &discount)?;

        let mut seen = HashSet::new();
        let mut buses = Vec::with_capacity(self.buses.len());
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(invalid(format!("bus {}", b.id), "duplicate bus id"));
            }
            if !(b.v_nom > 0.0) {
                return Err(invalid(format!("bus {}", b.id), "nominal voltage must be positive"));
            }
            buses.push(Bus {
                id: b.id,
                kind: b.kind,
                v_nom: b.v_nom,
            });
        }
        let index = |id: u32, record: &str| -> Result<usize, CaseError> {
            buses
                .iter()
                .position(|b| b.id == id)
                .ok_or_else(|| invalid(record, format!("references unknown bus {id}")))
        };

        let slacks: Vec<usize> = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind == BusKind::Slack)
            .map(|(i, _)| i)
            .collect();
        if slacks.len() != 1 {
            return Err(invalid(
                "buses",
                format!("exactly one slack bus required, found {}", slacks.len()),
            ));
        }
        let slack = slacks[0];

        let mut generators = Vec::with_capacity(self.generators.len());
        for (i, g) in self.generators.iter().enumerate() {
            let rec = format!("generator {} (bus {})", i + 1, g.bus);
            let bus = index(g.bus, &rec)?;
            if g.p_min > g.p_max {
                return Err(invalid(rec, "p_min exceeds p_max"));
            }
            if g.q_min > g.q_max {
                return Err(invalid(rec, "q_min exceeds q_max"));
            }
            generators.push(Generator {
                bus,
                p_min: g.p_min,
                p_max: g.p_max,
                q_min: g.q_min,
                q_max: g.q_max,
            });
        }
        if !generators.iter().any(|g| g.bus == slack) {
            return Err(invalid(
                format!("bus {}", buses[slack].id),
                "slack bus has no generator",
            ));
        }
        for (i, b) in buses.iter().enumerate() {
            if b.kind == BusKind::Pv && !generators.iter().any(|g| g.bus == i) {
                return Err(invalid(format!("bus {}", b.id), "pv bus has no generator"));
            }
        }
        for (i, g) in generators.iter().enumerate() {
            if buses[g.bus].kind == BusKind::Pq {
                return Err(invalid(
                    format!("generator {} (bus {})", i + 1, buses[g.bus].id),
                    "generator on a pq bus",
                ));
            }
        }

        let mut demand = Demand::zeros(buses.len());
        for l in &self.loads {
            let rec = format!("load at bus {}", l.bus);
            let bus = index(l.bus, &rec)?;
            if l.p < 0.0 || l.q < 0.0 {
                return Err(invalid(rec, "demand must be nonnegative"));
            }
            demand.p[bus] += l.p;
            demand.q[bus] += l.q;
        }

        let mut triples = HashSet::new();
        let mut corridors = Vec::with_capacity(self.corridors.len());
        for (id, c) in self.corridors.iter().enumerate() {
            let rec = format!("corridor {} ({}-{} {})", id + 1, c.from, c.to, c.class);
            let from = index(c.from, &rec)?;
            let to = index(c.to, &rec)?;
            if from == to {
                return Err(invalid(rec, "corridor endpoints coincide"));
            }
            let key = (from.min(to), from.max(to), c.class.clone());
            if !triples.insert(key) {
                return Err(invalid(rec, "duplicate (from, to, class) corridor"));
            }
            if !(c.x > 0.0) || !c.x.is_finite() || !c.r.is_finite() || !c.b.is_finite() {
                return Err(invalid(rec, "reactance must be positive and finite"));
            }
            if c.r < 0.0 {
                return Err(invalid(rec, "negative resistance"));
            }
            if !(c.rating > 0.0) {
                return Err(invalid(rec, "rating must be positive"));
            }
            if c.cost < 0.0 {
                return Err(invalid(rec, "negative cost"));
            }
            corridors.push(Corridor {
                id,
                from,
                to,
                r: c.r,
                x: c.x,
                b: c.b,
                rating: c.rating,
                cost: c.cost,
                max_new: c.max_new,
                existing: c.existing,
                class: c.class.clone(),
            });
        }

        let l = &self.limits;
        if !(l.v_base_pct > 0.0 && l.v_cont_pct > 0.0 && l.l_max > 0.0) {
            return Err(invalid("limits", "limits must be positive"));
        }

        Ok(Network {
            name: meta.name.clone(),
            base_mva: meta.base_mva,
            buses,
            generators,
            base_demand: demand,
            corridors,
            horizon: Horizon {
                years,
                growth: meta.growth.clone(),
                gen_growth,
                discount,
            },
            limits: Limits {
                v_base_pct: l.v_base_pct,
                v_cont_pct: l.v_cont_pct,
                l_max: l.l_max,
            },
            slack,
        })
    }
}
