use super::{DispatchStatus, OpfInput};
use crate::network::Circuit;
use crate::powerflow::reachable;

/// The part of a topology connected to the slack bus, renumbered densely.
/// Dead islands without demand are dropped together with their generation.
#[derive(Debug, Clone)]
pub(crate) struct Subnet {
    /// Original bus index of each local bus.
    pub buses: Vec<usize>,
    /// Local index of each original bus.
    pub local: Vec<Option<usize>>,
    /// Renumbered circuits.
    pub circuits: Vec<Circuit>,
    /// Position of each local circuit in the original list.
    pub circuit_ids: Vec<usize>,
    /// Original generator-bus indices that remain connected.
    pub gens: Vec<usize>,
}

impl Subnet {
    pub fn build(inp: &OpfInput, circuits: &[Circuit]) -> Result<Subnet, DispatchStatus> {
        let seen = if circuits.iter().any(|c| c.count > 0) {
            reachable(inp.n_bus, circuits, inp.slack)
        } else {
            let mut s = vec![false; inp.n_bus];
            s[inp.slack] = true;
            s
        };
        let cut: Vec<usize> = (0..inp.n_bus)
            .filter(|&i| !seen[i] && inp.carries_load(i))
            .collect();
        if !cut.is_empty() {
            return Err(DispatchStatus::Islanded { buses: cut });
        }
        let buses: Vec<usize> = (0..inp.n_bus).filter(|&i| seen[i]).collect();
        let mut local = vec![None; inp.n_bus];
        for (k, &i) in buses.iter().enumerate() {
            local[i] = Some(k);
        }
        let mut out = Vec::new();
        let mut ids = Vec::new();
        for (idx, c) in circuits.iter().enumerate() {
            if c.count == 0 {
                continue;
            }
            if let (Some(f), Some(t)) = (local[c.from], local[c.to]) {
                let mut c = c.clone();
                c.from = f;
                c.to = t;
                out.push(c);
                ids.push(idx);
            }
        }
        let gens = (0..inp.gens.len())
            .filter(|&k| seen[inp.gens[k].bus])
            .collect();
        Ok(Subnet {
            buses,
            local,
            circuits: out,
            circuit_ids: ids,
            gens,
        })
    }

    pub fn n(&self) -> usize {
        self.buses.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{realize_topology, Contingency, ExpansionPlan};

    #[test]
    fn garver_base_drops_dead_generator_island() {
        let net = crate::cases::garver6();
        let inp = OpfInput::for_year(&net, 1, None).unwrap();
        let c = realize_topology(&net, &ExpansionPlan::for_network(&net), 1, Contingency::Base).unwrap();
        let s = Subnet::build(&inp, &c).unwrap();
        assert_eq!(s.n(), 5);
        assert_eq!(s.gens.len(), 2);
        assert_eq!(s.circuits.len(), 6);
    }

    #[test]
    fn cut_load_is_reported() {
        let net = crate::cases::garver6();
        let inp = OpfInput::for_year(&net, 1, None).unwrap();
        match Subnet::build(&inp, &[]) {
            Err(DispatchStatus::Islanded { buses }) => assert_eq!(buses, vec![1, 2, 3, 4]),
            other => panic!("{other:?}"),
        }
    }
}
