//! Bundled study cases and reference plans.

use crate::network::{parse_case, ExpansionPlan, Network};

pub const GARVER6: &str = include_str!("../cases/garver6.json");
pub const IEEE24: &str = include_str!("../cases/ieee24.json");
pub const IEEE118: &str = include_str!("../cases/ieee118.json");

/// Looks up a bundled case by name (`garver6`, `ieee24`, `ieee118`).
pub fn bundled(name: &str) -> Option<Network> {
    let text = match name {
        "garver6" | "garver" => GARVER6,
        "ieee24" => IEEE24,
        "ieee118" => IEEE118,
        _ => return None,
    };
    Some(parse_case(text).expect("bundled case is valid"))
}

pub fn garver6() -> Network {
    bundled("garver6").unwrap()
}

pub fn ieee24() -> Network {
    bundled("ieee24").unwrap()
}

pub fn ieee118() -> Network {
    bundled("ieee118").unwrap()
}

/// Builds a plan from `(year, from, to, lines added)` entries.
pub fn plan_from_additions(net: &Network, additions: &[(usize, u32, u32, u32)]) -> ExpansionPlan {
    let mut added = vec![vec![0u32; net.years()]; net.n_corridors()];
    for &(year, a, b, n) in additions {
        let l = net
            .find_corridor(a, b)
            .unwrap_or_else(|| panic!("no corridor {a}-{b}"));
        added[l][year - 1] += n;
    }
    ExpansionPlan::from_increments(&added)
}

/// Garver three-year plan optimized for the intact network only.
pub fn garver_base_plan(net: &Network) -> ExpansionPlan {
    plan_from_additions(
        net,
        &[
            (1, 1, 5, 1),
            (1, 2, 3, 1),
            (1, 2, 6, 2),
            (1, 3, 5, 2),
            (1, 4, 6, 2),
            (3, 2, 6, 1),
            (3, 3, 5, 1),
        ],
    )
}

/// Garver three-year plan secure against every single-circuit outage.
pub fn garver_secure_plan(net: &Network) -> ExpansionPlan {
    plan_from_additions(
        net,
        &[
            (1, 1, 2, 1),
            (1, 2, 6, 3),
            (1, 3, 4, 1),
            (1, 3, 5, 4),
            (1, 4, 6, 2),
            (2, 2, 3, 3),
            (2, 4, 6, 1),
            (3, 1, 2, 1),
        ],
    )
}
