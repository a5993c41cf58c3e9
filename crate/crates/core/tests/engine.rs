use rfcsim::frame::{build_rfc, Direction, RatioLabel, Symbol, BLOCK_LEN};
use rfcsim::output::latency_csv;
use rfcsim::{run, PolicyKind, RunOptions, RunResult, Scenario};

fn small(policy: PolicyKind) -> Scenario {
    let mut s = Scenario::default();
    s.cell_count = 7;
    s.ue_per_cell_dl = 3;
    s.ue_per_cell_ul = 3;
    s.sim_duration_ms = 200.0;
    s.warmup_ms = 20.0;
    s.drain_ms = 30.0;
    s.offered_load_mbps = Some(2.0);
    s.tdd_policy = policy;
    s
}

fn traced(s: &Scenario) -> RunResult {
    let opts = RunOptions {
        coordination_trace: true,
        sinr_trace: true,
    };
    run(s, opts).unwrap()
}

#[test]
fn zero_arrivals_keep_default_frame() {
    let mut s = small(PolicyKind::Proposed);
    s.offered_load_mbps = None;
    s.arrival_rate_dl = 0.0;
    s.arrival_rate_ul = 0.0;
    let r = traced(&s);
    assert!(r.records.is_empty());
    assert_eq!(r.dropped, 0);
    assert_eq!(r.conservation.generated, 0);
    assert!(!r.trace.is_empty());
    for row in &r.trace {
        assert_eq!(row.theta, None);
        assert!(row.labels.iter().all(|l| l == "1:1"), "{:?}", row.labels);
    }
}

#[test]
fn same_seed_same_records() {
    for policy in [PolicyKind::Proposed, PolicyKind::DynamicTddCli] {
        let s = small(policy);
        let a = run(&s, RunOptions::default()).unwrap();
        let b = run(&s, RunOptions::default()).unwrap();
        assert_eq!(latency_csv(&a), latency_csv(&b));
    }
}

#[test]
fn different_seeds_differ() {
    let mut s = small(PolicyKind::Proposed);
    let a = run(&s, RunOptions::default()).unwrap();
    s.seed += 1;
    let b = run(&s, RunOptions::default()).unwrap();
    assert_ne!(latency_csv(&a), latency_csv(&b));
}

#[test]
fn packets_are_conserved_and_causal() {
    for policy in [
        PolicyKind::Proposed,
        PolicyKind::StaticTdd,
        PolicyKind::DynamicTddCli,
        PolicyKind::DynamicTddCliFree,
    ] {
        let r = run(&small(policy), RunOptions::default()).unwrap();
        assert!(r.conservation.holds(), "{policy:?}: {:?}", r.conservation);
        assert!(!r.records.is_empty());
        assert!(r.records.windows(2).all(|w| w[0].packet_id < w[1].packet_id));
        for rec in &r.records {
            assert!(rec.arrival_ms >= r.scenario.warmup_ms);
            assert!(rec.total_ms > 0.0);
            let parts = rec.queuing_ms + rec.transmission_ms + rec.harq_ms + rec.processing_ms;
            assert!((parts - rec.total_ms).abs() < 1e-9, "{rec:?}");
        }
    }
}

/// Every transmission sits in a block its cell configured for that
/// direction during that period.
fn assert_direction_legal(r: &RunResult) {
    let s = &r.scenario;
    let slots = s.slots_per_frame();
    let frame_ms = slots as f64 * s.slot_ms();
    let frame_symbols = slots * 14;
    assert!(!r.sinr.is_empty());
    for row in &r.sinr {
        let period = (row.time_ms / s.rfc_update_period_ms + 1e-9).floor() as usize;
        let label: RatioLabel = r.trace[period].labels[row.cell].parse().unwrap();
        let rfc = build_rfc(label, slots).unwrap();
        let start = ((row.time_ms % frame_ms) / s.symbol_ms()).round() as usize;
        let want = if row.direction == Direction::Dl.as_str() { Symbol::D } else { Symbol::U };
        for k in 0..BLOCK_LEN {
            assert_eq!(rfc.symbol_at((start + k) % frame_symbols), want, "{row:?} under {label}");
        }
    }
}

#[test]
fn transmissions_follow_the_frame() {
    for policy in [PolicyKind::Proposed, PolicyKind::DynamicTddCli] {
        assert_direction_legal(&traced(&small(policy)));
    }
}

#[test]
fn aligned_policies_never_see_cross_link() {
    for policy in [PolicyKind::Proposed, PolicyKind::StaticTdd] {
        let r = traced(&small(policy));
        assert_eq!(r.counters.flexible_invocations, 0);
        assert_eq!(r.counters.mixed_symbols, 0);
        assert!(r.sinr.iter().all(|x| !x.flexible));
        for row in &r.trace {
            assert!(row.labels.windows(2).all(|w| w[0] == w[1]));
        }
    }
}

#[test]
fn dynamic_policy_mixes_directions() {
    let mut s = small(PolicyKind::DynamicTddCli);
    s.cell_dl_shares = vec![0.8, 0.2];
    let r = traced(&s);
    assert!(r.counters.mixed_symbols > 0);
    assert!(r.counters.flexible_invocations > 0);
    assert!(r.sinr.iter().any(|x| x.flexible));
}

#[test]
fn warmup_excludes_early_arrivals() {
    let mut s = small(PolicyKind::StaticTdd);
    s.warmup_ms = 150.0;
    let late = run(&s, RunOptions::default()).unwrap();
    s.warmup_ms = 20.0;
    let early = run(&s, RunOptions::default()).unwrap();
    assert!(late.records.len() < early.records.len());
    assert!(late.records.iter().all(|r| r.arrival_ms >= 150.0));
}
