use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ExpansionPlan, Network, PlanError};

#[derive(Debug, Error)]
pub enum PlanCsvError {
    #[error("plan csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("plan csv row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// One row per corridor and year with new lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    year: usize,
    corridor: usize,
    from: u32,
    to: u32,
    class: String,
    added: u32,
}

/// `year,corridor,from,to,class,added` with 1-based corridor numbers and
/// external bus ids.
pub fn write_plan_csv(net: &Network, plan: &ExpansionPlan) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for y in 1..=plan.years() {
        for c in &net.corridors {
            let added = plan.added_in(c.id, y);
            if added == 0 {
                continue;
            }
            w.serialize(Row {
                year: y,
                corridor: c.number(),
                from: net.buses[c.from].id,
                to: net.buses[c.to].id,
                class: c.class.clone(),
                added,
            })
            .expect("in-memory write");
        }
    }
    if plan.is_empty() {
        w.write_record(["year", "corridor", "from", "to", "class", "added"])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

pub fn read_plan_csv(net: &Network, text: &str) -> Result<ExpansionPlan, PlanCsvError> {
    let mut added = vec![vec![0u32; net.years()]; net.n_corridors()];
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    for (i, rec) in r.deserialize::<Row>().enumerate() {
        let row = rec?;
        let bad = |message: String| PlanCsvError::Row { row: i + 1, message };
        if row.year == 0 || row.year > net.years() {
            return Err(bad(format!("year {} outside 1..={}", row.year, net.years())));
        }
        let c = row
            .corridor
            .checked_sub(1)
            .and_then(|l| net.corridors.get(l))
            .ok_or_else(|| bad(format!("no corridor {}", row.corridor)))?;
        let (a, b) = (net.buses[c.from].id, net.buses[c.to].id);
        if (row.from, row.to) != (a, b) && (row.from, row.to) != (b, a) {
            return Err(bad(format!("corridor {} joins {a}-{b}, not {}-{}", row.corridor, row.from, row.to)));
        }
        added[c.id][row.year - 1] += row.added;
    }
    let plan = ExpansionPlan::from_increments(&added);
    plan.validate(net)?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    #[test]
    fn round_trip() {
        let net = cases::garver6();
        let plan = cases::garver_secure_plan(&net);
        let text = write_plan_csv(&net, &plan);
        assert!(text.starts_with("year,corridor,from,to,class,added\n1,1,1,2,a,1\n"));
        assert_eq!(read_plan_csv(&net, &text).unwrap(), plan);
    }

    #[test]
    fn empty_plan_keeps_header() {
        let net = cases::garver6();
        let plan = ExpansionPlan::for_network(&net);
        let text = write_plan_csv(&net, &plan);
        assert_eq!(text.trim(), "year,corridor,from,to,class,added");
        assert_eq!(read_plan_csv(&net, &text).unwrap(), plan);
    }

    #[test]
    fn mismatched_endpoints_rejected() {
        let net = cases::garver6();
        let err = read_plan_csv(&net, "year,corridor,from,to,class,added\n1,1,3,4,a,1\n").unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }
}
