use std::collections::{BTreeMap, BTreeSet};

use dcd_core::pricing::{
    default_catalog, InstanceId, PricingKind, SpotSample, SpotTrace, VmInstance,
};
use dcd_core::scheduler::{
    claim_reserved_slot, dcd_batch_step, priority_score, relative_compute_power, renew_at_junction,
    select_in_stock_vm, BatchContext, DemandProfile, RentMode, ReservePlanner, SchedulerConfig,
    VmPool,
};
use dcd_core::{Task, TaskAnnotations, TaskRef, Workflow};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn task(ty: &str, mi: f64, mem: f64, cold: f64) -> Task {
    Task::new("t", ty, mi, mem, cold)
}

fn warm_up(pool: &mut VmPool, id: InstanceId, t: &Task, at: f64) {
    pool.assign(
        id,
        TaskRef {
            workflow: 0,
            task: 0,
        },
        t,
        0.0,
    );
    pool.finish(id, at);
}

#[test]
fn relative_compute_power_example() {
    let t = task("a", 5000.0, 1.0, 1000.0);
    assert_eq!(relative_compute_power(&t, 1100.0, 100.0, true), Ok(6.0));
    assert_eq!(relative_compute_power(&t, 1100.0, 100.0, false), Ok(5.0));
    assert!(relative_compute_power(&t, 100.0, 100.0, true).is_err());
}

#[test]
fn priority_score_example() {
    let cat = default_catalog();
    let mut vm = VmInstance::new(
        InstanceId(0),
        1,
        &cat[1],
        PricingKind::OnDemand,
        0.0,
        3600.0,
        0.42,
    );
    vm.last_use = 10.0;
    vm.last_task_freq = 1;
    vm.last_task_penalty = 4.0;
    vm.memory = 10.0;
    assert!((priority_score(&vm, &SchedulerConfig::default()) - 15.0).abs() < 1e-12);
}

#[test]
fn warm_slow_vm_beats_cold_fast_vm() {
    let cat = default_catalog();
    let cfg = SchedulerConfig::default();
    let mut pool = VmPool::new(cat.len());
    let small = pool.rent(
        &cat,
        0,
        PricingKind::OnDemand,
        0.0,
        1.0,
        cat[0].price_on_demand,
    );
    let _big = pool.rent(
        &cat,
        1,
        PricingKind::OnDemand,
        0.0,
        1.0,
        cat[1].price_on_demand,
    );
    let t = task("blast", 560.0, 1.0, 560.0);
    warm_up(&mut pool, small, &t, 10.0);
    // Warm requirement 560/1000 and cold 1120/1000 MIPS; both VMs qualify.
    assert_eq!(
        select_in_stock_vm(&pool, &t, 560.0, 1010.0, 10.0, &cfg),
        Some(small)
    );
}

#[test]
fn lowest_priority_score_wins_among_cold_vms() {
    let cat = default_catalog();
    let cfg = SchedulerConfig {
        psi3: 0.0,
        ..SchedulerConfig::default()
    };
    let mut pool = VmPool::new(cat.len());
    let a = pool.rent(&cat, 1, PricingKind::OnDemand, 15.0, 1.0, 0.42);
    let b = pool.rent(&cat, 1, PricingKind::OnDemand, 9.0, 1.0, 0.42);
    let t = task("x", 100.0, 1.0, 10.0);
    let sa = priority_score(pool.get(a), &cfg);
    let sb = priority_score(pool.get(b), &cfg);
    assert_eq!((sa, sb), (15.0, 9.0));
    assert_eq!(
        select_in_stock_vm(&pool, &t, 100.0, 500.0, 20.0, &cfg),
        Some(b)
    );
    let inverted = SchedulerConfig {
        invert_priority: true,
        ..cfg
    };
    assert_eq!(
        select_in_stock_vm(&pool, &t, 100.0, 500.0, 20.0, &inverted),
        Some(a)
    );
}

#[test]
fn too_little_memory_selects_nothing() {
    let cat = default_catalog();
    let mut pool = VmPool::new(cat.len());
    pool.rent(
        &cat,
        0,
        PricingKind::OnDemand,
        0.0,
        1.0,
        cat[0].price_on_demand,
    );
    let t = task("x", 100.0, 8.0, 10.0);
    assert_eq!(
        select_in_stock_vm(&pool, &t, 100.0, 500.0, 0.0, &SchedulerConfig::default()),
        None
    );
}

#[test]
fn vm_too_slow_for_the_deadline_is_skipped() {
    let cat = default_catalog();
    let mut pool = VmPool::new(cat.len());
    pool.rent(
        &cat,
        0,
        PricingKind::OnDemand,
        0.0,
        1.0,
        cat[0].price_on_demand,
    );
    // Needs 11 MIPS cold; c3.large has 5.6.
    let t = task("x", 1000.0, 1.0, 100.0);
    assert_eq!(
        select_in_stock_vm(&pool, &t, 1000.0, 100.0, 0.0, &SchedulerConfig::default()),
        None
    );
}

#[test]
fn vm_whose_rental_ends_too_soon_is_skipped() {
    let cat = default_catalog();
    let mut pool = VmPool::new(cat.len());
    pool.rent(
        &cat,
        1,
        PricingKind::OnDemand,
        0.0,
        1.0,
        cat[1].price_on_demand,
    );
    let t = task("x", 22.4 * 200.0, 1.0, 0.0);
    let cfg = SchedulerConfig::default();
    assert!(select_in_stock_vm(&pool, &t, t.length_mi, 1e6, 3300.0, &cfg).is_some());
    assert_eq!(
        select_in_stock_vm(&pool, &t, t.length_mi, 1e6, 3500.0, &cfg),
        None
    );
}

fn expiring_pool(n: usize, ty: usize) -> (VmPool, Vec<InstanceId>) {
    let cat = default_catalog();
    let mut pool = VmPool::new(cat.len());
    let ids = (0..n)
        .map(|_| pool.reserve_slot(&cat, ty, 0.0, 1.0))
        .collect();
    (pool, ids)
}

#[test]
fn junction_renews_needed_and_releases_the_rest() {
    let cfg = SchedulerConfig::default();
    let (mut pool, ids) = expiring_pool(10, 1);
    let needed = BTreeMap::from([(1, 8)]);
    let out = renew_at_junction(&mut pool, &ids, &needed, &BTreeSet::new(), 3600.0, &cfg);
    assert_eq!((out.renewed.len(), out.released.len()), (8, 2));
    for id in &out.renewed {
        assert_eq!(pool.get(*id).rent_end, 7200.0);
    }
    for id in &out.released {
        assert_eq!(pool.get(*id).rent_end, 3600.0);
    }
}

#[test]
fn junction_with_no_demand_releases_all() {
    let cfg = SchedulerConfig::default();
    let (mut pool, ids) = expiring_pool(4, 0);
    let out = renew_at_junction(
        &mut pool,
        &ids,
        &BTreeMap::new(),
        &BTreeSet::new(),
        3600.0,
        &cfg,
    );
    assert_eq!((out.renewed.len(), out.released.len()), (0, 4));
    assert_eq!(pool.active().count(), 0);
}

#[test]
fn junction_never_renews_more_than_expire() {
    let cfg = SchedulerConfig::default();
    let (mut pool, ids) = expiring_pool(3, 2);
    let needed = BTreeMap::from([(2, 5)]);
    let out = renew_at_junction(&mut pool, &ids, &needed, &BTreeSet::new(), 3600.0, &cfg);
    assert_eq!((out.renewed.len(), out.released.len()), (3, 0));
}

#[test]
fn junction_prefers_warm_for_upcoming_types() {
    let cfg = SchedulerConfig::default();
    let cat = default_catalog();
    let mut pool = VmPool::new(cat.len());
    let a = pool.rent(
        &cat,
        1,
        PricingKind::Reserved,
        0.0,
        1.0,
        cat[1].price_reserved,
    );
    let b = pool.rent(
        &cat,
        1,
        PricingKind::Reserved,
        0.0,
        1.0,
        cat[1].price_reserved,
    );
    warm_up(&mut pool, a, &task("old", 1.0, 1.0, 1.0), 3000.0);
    warm_up(&mut pool, b, &task("next", 1.0, 1.0, 1.0), 100.0);
    let upcoming = BTreeSet::from(["next".to_string()]);
    let out = renew_at_junction(
        &mut pool,
        &[a, b],
        &BTreeMap::from([(1, 1)]),
        &upcoming,
        3600.0,
        &cfg,
    );
    assert_eq!(out.renewed, vec![b]);
    assert!(pool.get(b).is_warm_for("next"));
}

fn planner(trace: Option<SpotTrace>, demand: DemandProfile) -> ReservePlanner {
    ReservePlanner::new(trace, demand, None)
}

#[test]
fn reservation_count_is_binomial() {
    let cfg = SchedulerConfig::default();
    let p = planner(None, DemandProfile::default());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| p.should_reserve(0, 0.0, &cfg, &mut rng))
        .count() as f64;
    let mean = n as f64 * cfg.reserved_prob;
    let sigma = (n as f64 * cfg.reserved_prob * (1.0 - cfg.reserved_prob)).sqrt();
    assert!(
        (hits - mean).abs() <= 3.0 * sigma,
        "{hits} vs {mean} +- {sigma}"
    );
}

fn offers(count: usize) -> SpotTrace {
    let cat = default_catalog();
    let mut series = vec![Vec::new(); cat.len()];
    series[0] = (0..count)
        .map(|i| SpotSample {
            time: i as f64 * 60.0,
            price: 0.04,
            available: true,
        })
        .collect();
    SpotTrace::new(series, &[]).unwrap()
}

#[test]
fn predicted_spot_supply_decides_reservation() {
    let cfg = SchedulerConfig::default();
    let demand = DemandProfile::from_counts(cfg.batch_len, vec![vec![3]]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // A = 5 offers exceed U = 3 instances needed: leave it to the spot market.
    assert!(!planner(Some(offers(5)), demand.clone()).should_reserve(0, 0.0, &cfg, &mut rng));
    assert!(planner(Some(offers(3)), demand.clone()).should_reserve(0, 0.0, &cfg, &mut rng));
    assert!(planner(Some(offers(2)), demand).should_reserve(0, 0.0, &cfg, &mut rng));
}

#[test]
fn claiming_takes_cheapest_fast_enough_slot() {
    let cat = default_catalog();
    let mut pool = VmPool::new(cat.len());
    let small = pool.reserve_slot(&cat, 0, 0.0, 1.0);
    let big = pool.reserve_slot(&cat, 1, 0.0, 1.0);
    let fast = pool.reserve_slot(&cat, 3, 0.0, 1.0);
    assert_eq!(pool.free_vms().count(), 0);
    let t = task("x", 1000.0, 1.0, 0.0);
    assert_eq!(
        claim_reserved_slot(&mut pool, &cat, &t, 1000.0, Some(10.0), 0.0),
        Some(big)
    );
    assert!(pool.is_free(big));
    assert_eq!(
        claim_reserved_slot(&mut pool, &cat, &t, 1000.0, Some(1.0), 0.0),
        Some(small)
    );
    assert_eq!(
        claim_reserved_slot(&mut pool, &cat, &t, 1000.0, Some(100.0), 0.0),
        None
    );
    assert_eq!(
        claim_reserved_slot(&mut pool, &cat, &t, 1000.0, None, 0.0),
        Some(fast)
    );
}

struct Fixture {
    workflows: Vec<Workflow>,
    annotations: Vec<TaskAnnotations>,
    remaining: Vec<Vec<f64>>,
}

fn fixture() -> Fixture {
    fixture_scaled(1.0)
}

fn fixture_scaled(reward_scale: f64) -> Fixture {
    let tasks = vec![
        Task::new("a", "fa", 2240.0, 1.0, 224.0),
        Task::new("b", "fb", 2240.0, 1.0, 224.0),
    ];
    let wf = Workflow::new("w", tasks, vec![], 0.0, 1000.0).unwrap();
    let ann = TaskAnnotations::compute(&wf, 0.5, reward_scale);
    let remaining = vec![wf.tasks().iter().map(|t| t.length_mi).collect()];
    Fixture {
        workflows: vec![wf],
        annotations: vec![ann],
        remaining,
    }
}

fn queue() -> Vec<TaskRef> {
    vec![
        TaskRef {
            workflow: 0,
            task: 0,
        },
        TaskRef {
            workflow: 0,
            task: 1,
        },
    ]
}

#[test]
fn batch_step_rents_cheapest_type_on_demand() {
    let cat = default_catalog();
    let cfg = SchedulerConfig::default();
    let fx = fixture();
    let mut pool = VmPool::new(cat.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ctx = BatchContext {
        now: 0.0,
        catalog: &cat,
        workflows: &fx.workflows,
        annotations: &fx.annotations,
        remaining_mi: &fx.remaining,
        pool: &mut pool,
        config: &cfg,
        rng: &mut rng,
    };
    let out = dcd_batch_step(&mut ctx, &queue(), &mut RentMode::RealTime { spot: None });
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|a| a.cold));
    assert_ne!(out[0].instance, out[1].instance);
    // Both tasks need 2464/1000 MIPS cold: c3.large is the cheapest that qualifies.
    for a in &out {
        let vm = pool.get(a.instance);
        assert_eq!((vm.vm_type, vm.kind), (0, PricingKind::OnDemand));
    }
}

#[test]
fn batch_step_bids_spot_price_at_zero_score() {
    let cat = default_catalog();
    let cfg = SchedulerConfig::default();
    let trace = offers(10);
    let step = |fx: &Fixture| {
        let mut pool = VmPool::new(cat.len());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = BatchContext {
            now: 0.0,
            catalog: &cat,
            workflows: &fx.workflows,
            annotations: &fx.annotations,
            remaining_mi: &fx.remaining,
            pool: &mut pool,
            config: &cfg,
            rng: &mut rng,
        };
        let out = dcd_batch_step(
            &mut ctx,
            &queue(),
            &mut RentMode::RealTime { spot: Some(&trace) },
        );
        let vm = |i: usize| pool.get(out[i].instance).clone();
        (vm(0), vm(1))
    };

    let (first, second) = step(&fixture_scaled(1e-3));
    assert_eq!(first.kind, PricingKind::Spot);
    assert!((first.bid_price.unwrap() - 0.04).abs() < 1e-12);
    // The first hire credited its task reward, so the second bid is higher.
    assert_eq!(second.kind, PricingKind::Spot);
    assert!(second.bid_price.unwrap() > 0.04);
    assert!(second.bid_price.unwrap() < cat[0].price_on_demand);

    // A large credited reward drives the bid up to the on-demand price,
    // where spot no longer undercuts and the task goes on demand.
    let (_, second) = step(&fixture());
    assert_eq!(second.kind, PricingKind::OnDemand);
    assert_eq!(second.bid_price, None);
}

#[test]
fn batch_step_claims_reserved_slot_before_renting() {
    let cat = default_catalog();
    let cfg = SchedulerConfig::default();
    let fx = fixture();
    let mut pool = VmPool::new(cat.len());
    let slot = pool.reserve_slot(&cat, 1, 0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ctx = BatchContext {
        now: 0.0,
        catalog: &cat,
        workflows: &fx.workflows,
        annotations: &fx.annotations,
        remaining_mi: &fx.remaining,
        pool: &mut pool,
        config: &cfg,
        rng: &mut rng,
    };
    let out = dcd_batch_step(&mut ctx, &queue(), &mut RentMode::RealTime { spot: None });
    assert_eq!(out[0].instance, slot);
    assert_eq!(pool.get(out[1].instance).kind, PricingKind::OnDemand);
    assert_eq!(pool.ledger().len(), 2);
}

#[test]
fn batch_step_reuses_free_warm_vm() {
    let cat = default_catalog();
    let cfg = SchedulerConfig::default();
    let fx = fixture();
    let mut pool = VmPool::new(cat.len());
    let vm = pool.rent(
        &cat,
        1,
        PricingKind::OnDemand,
        0.0,
        1.0,
        cat[1].price_on_demand,
    );
    warm_up(&mut pool, vm, fx.workflows[0].task(1), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ctx = BatchContext {
        now: 0.0,
        catalog: &cat,
        workflows: &fx.workflows,
        annotations: &fx.annotations,
        remaining_mi: &fx.remaining,
        pool: &mut pool,
        config: &cfg,
        rng: &mut rng,
    };
    let q = [TaskRef {
        workflow: 0,
        task: 1,
    }];
    let out = dcd_batch_step(&mut ctx, &q, &mut RentMode::RealTime { spot: None });
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].instance, vm);
    assert!(!out[0].cold);
}

#[test]
fn planning_step_reserves_or_places_placeholder() {
    let cat = default_catalog();
    let fx = fixture();
    for (prob, kind) in [(1.0, PricingKind::Reserved), (0.0, PricingKind::OnDemand)] {
        let cfg = SchedulerConfig {
            reserved_prob: prob,
            ..SchedulerConfig::default()
        };
        let mut planner = planner(None, DemandProfile::default());
        let mut pool = VmPool::new(cat.len());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = BatchContext {
            now: 0.0,
            catalog: &cat,
            workflows: &fx.workflows,
            annotations: &fx.annotations,
            remaining_mi: &fx.remaining,
            pool: &mut pool,
            config: &cfg,
            rng: &mut rng,
        };
        let out = dcd_batch_step(&mut ctx, &queue(), &mut RentMode::Predicted(&mut planner));
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|a| pool.get(a.instance).kind == kind));
        let expected = if prob == 1.0 { 2 } else { 0 };
        assert_eq!(planner.planned.len(), expected);
    }
}
