use gridplan::cases;
use gridplan::contingency::{enumerate_contingencies, n1_verify, security_screen, ScreenError};
use gridplan::network::{realize_topology, Circuit, Contingency, ExpansionPlan};

fn circuit(corridor: usize, from: usize, to: usize, count: u32) -> Circuit {
    Circuit {
        corridor,
        from,
        to,
        r: 0.01,
        x: 0.1,
        b: 0.0,
        rating: 100.0,
        count,
    }
}

#[test]
fn garver_existing_network_has_six_states() {
    let net = cases::garver6();
    let circuits = realize_topology(&net, &ExpansionPlan::for_network(&net), 1, Contingency::Base).unwrap();
    let states = enumerate_contingencies(&circuits);
    assert_eq!(states.len(), 6);
    assert!(states.iter().all(|s| !s.is_base()));
}

#[test]
fn no_circuits_no_states() {
    assert!(enumerate_contingencies(&[]).is_empty());
    assert!(enumerate_contingencies(&[circuit(0, 0, 1, 0)]).is_empty());
}

#[test]
fn sub_corridors_are_separate_states() {
    let states = enumerate_contingencies(&[circuit(0, 0, 1, 3), circuit(1, 0, 1, 1)]);
    assert_eq!(states, vec![Contingency::Outage(0), Contingency::Outage(1)]);
}

#[test]
fn states_grow_with_new_corridors_only() {
    let net = cases::garver6();
    let mut plan = ExpansionPlan::for_network(&net);
    let count = |p: &ExpansionPlan| enumerate_contingencies(&realize_topology(&net, p, 1, Contingency::Base).unwrap()).len();
    let l26 = net.find_corridor(2, 6).unwrap();
    let l12 = net.find_corridor(1, 2).unwrap();
    plan.set(l26, 1, 1);
    assert_eq!(count(&plan), 7);
    plan.set(l26, 1, 3);
    assert_eq!(count(&plan), 7);
    plan.set(l12, 1, 1);
    assert_eq!(count(&plan), 7);
}

#[test]
fn secure_reference_plan_verifies() {
    let net = cases::garver6();
    let (ok, report) = n1_verify(&net, &cases::garver_secure_plan(&net), None).unwrap();
    assert!(ok);
    assert!(report.secure);
    assert_eq!(report.years.len(), 3);
    for y in &report.years {
        assert!(y.base.feasible);
        // six existing corridors plus 2-6, 3-4 and 4-6
        assert_eq!(y.omega(), 9);
        assert!(y.l_index.unwrap() <= net.limits.l_max + 1e-3);
    }
    assert_eq!(report.opf_calls, report.years.iter().map(|y| y.verdicts()).sum::<usize>());
}

#[test]
fn base_reference_plan_is_not_secure() {
    let net = cases::garver6();
    let (ok, report) = n1_verify(&net, &cases::garver_base_plan(&net), None).unwrap();
    assert!(!ok);
    assert!(!report.pc_viol.is_empty());
}

#[test]
fn empty_plan_is_not_secure() {
    let net = cases::garver6();
    let (ok, report) = n1_verify(&net, &ExpansionPlan::for_network(&net), None).unwrap();
    assert!(!ok);
    assert!(report.years.iter().all(|y| !y.base.feasible));
}

#[test]
fn screening_is_deterministic() {
    let net = cases::garver6();
    let plan = cases::garver_base_plan(&net);
    let a = security_screen(&net, &plan, None).unwrap();
    let b = security_screen(&net, &plan, None).unwrap();
    assert_eq!(a, b);
    // the violated set is the union of the per-state overloads
    let mut union: Vec<usize> = a
        .years
        .iter()
        .flat_map(|y| std::iter::once(&y.base).chain(&y.contingencies))
        .flat_map(|v| v.overloaded.clone())
        .collect();
    union.sort_unstable();
    union.dedup();
    assert_eq!(union, a.pc_viol);
}

#[test]
fn invalid_plan_is_rejected() {
    let net = cases::garver6();
    let mut plan = ExpansionPlan::for_network(&net);
    plan.set(0, 1, 9);
    assert!(matches!(n1_verify(&net, &plan, None), Err(ScreenError::Plan(_))));
}
