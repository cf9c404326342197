use gridplan::cases;
use gridplan::contingency::n1_verify;
use gridplan::planner::{
    corridor_count, discounted_cost, rigorous, run_four_stage, sequential_plan, FourStageReport, PipelineOptions,
    StrategyFlags,
};

fn strip_time(mut r: FourStageReport) -> FourStageReport {
    r.seconds = 0.0;
    for s in &mut r.stages {
        s.seconds = 0.0;
    }
    r
}

fn plain(seed: u64) -> PipelineOptions {
    let mut o = PipelineOptions::default().with_seed(seed);
    o.strategies.sequential_compensation = false;
    o
}

#[test]
fn staged_run_is_reproducible() {
    let net = cases::garver6();
    let a = strip_time(run_four_stage(&net, &plain(3)).unwrap());
    let b = strip_time(run_four_stage(&net, &plain(3)).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.stages.len(), 4);
}

#[test]
fn final_stage_respects_its_context() {
    let net = cases::garver6();
    for seed in 1..=3 {
        let r = run_four_stage(&net, &plain(seed)).unwrap();
        let ctx = r.context.as_ref().unwrap();
        let space = ctx.search_corridors();
        for l in r.plan.used_corridors() {
            assert!(space.contains(&l), "seed {seed}: corridor {l} outside {space:?}");
        }
        for &l in &ctx.pc_fix {
            assert!(r.plan.get(l, net.years()) >= 1);
        }
        let s4 = r.stage(4).unwrap();
        for s in &r.stages {
            for w in s.u_lim_trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
        if s4.feasible {
            let n = corridor_count(&r.plan);
            assert!(ctx.bounds.0 <= n && n <= ctx.bounds.1);
            assert!(r.cost < ctx.u_lim);
        }
        assert!((r.cost - discounted_cost(&r.plan, &net)).abs() < 1e-9);
        let (ok, _) = n1_verify(&net, &r.plan, r.q_rc.as_ref()).unwrap();
        assert_eq!(ok, r.verified);
    }
}

#[test]
fn base_variant_stops_after_stage_two() {
    let net = cases::garver6();
    let mut o = plain(2);
    o.last_stage = 2;
    let r = run_four_stage(&net, &o).unwrap();
    assert_eq!(r.stages.len(), 2);
    assert!(r.context.is_none());
    assert_eq!(r.plan, r.stages[1].plan);
}

#[test]
fn rigorous_is_one_unrestricted_stage() {
    let net = cases::garver6();
    let mut o = plain(1);
    o.ac.iterations = 3;
    o.ac.colony = 4;
    let r = rigorous(&net, &o).unwrap();
    assert_eq!(r.stages.len(), 1);
    let c = r.stages[0].counters;
    assert_eq!(c.gate_rejections, 0);
    assert_eq!(c.cache_hits, 0);
    assert_eq!(c.dc_dispatch, 0);
}

#[test]
fn disabling_strategies_removes_gates() {
    let net = cases::garver6();
    let mut o = plain(4);
    o.strategies = StrategyFlags::none();
    o.ac.iterations = 5;
    let r = run_four_stage(&net, &o).unwrap();
    for s in &r.stages {
        assert_eq!(s.counters.gate_rejections, 0);
        assert_eq!(s.counters.cache_hits, 0);
    }
}

#[test]
fn sequential_plan_accumulates_lines_and_compensation() {
    let net = cases::garver6();
    let s = sequential_plan(&net, &PipelineOptions::default().with_seed(1)).unwrap();
    assert!(s.plan.validate(&net).is_ok());
    assert_eq!(s.years.len(), 3);
    assert_eq!(s.q_rc.years(), 3);
    for y in 2..=3 {
        for (a, b) in s.q_rc.year(y - 1).iter().zip(s.q_rc.year(y)) {
            assert!(b >= a);
        }
    }
    assert!((s.cost - discounted_cost(&s.plan, &net)).abs() < 1e-9);
    // every year is base-feasible with the compensation installed by then
    let r = run_four_stage(
        &net,
        &PipelineOptions {
            q_rc: Some(s.q_rc.clone()),
            ..PipelineOptions::default().with_seed(1)
        },
    )
    .unwrap();
    assert!(r.sequential.is_none());
    assert_eq!(r.q_rc.as_ref(), Some(&s.q_rc));
}
