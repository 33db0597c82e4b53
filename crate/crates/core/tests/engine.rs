use dcd_core::engine::Segment;
use dcd_core::pricing::{
    default_catalog, InstanceId, PricingKind, SpotSample, SpotTrace, VmInstance,
};
use dcd_core::validate::count_by_constraint;
use dcd_core::{
    profit, run, validate_schedule, PolicyKind, PricingMix, RunInputs, SchedulerConfig, SimConfig,
    Task, TaskRef, Workflow,
};

const SCALE: f64 = 1e-4;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn config(policy: PolicyKind, reserved_prob: f64) -> SimConfig {
    SimConfig {
        scheduler: SchedulerConfig {
            reserved_prob,
            ..SchedulerConfig::default()
        },
        policy,
        reward_scale: SCALE,
        horizon: None,
    }
}

fn single(id: &str, mi: f64, cold: f64, deadline: f64) -> Workflow {
    Workflow::new(
        id,
        vec![Task::new("t", "f", mi, 1.0, cold)],
        vec![],
        0.0,
        deadline,
    )
    .unwrap()
}

#[test]
fn empty_workload_earns_and_costs_nothing() {
    let cat = default_catalog();
    for policy in PolicyKind::ALL {
        let rec = run(&RunInputs::new(&[], &cat), &config(policy, 0.7), 1).unwrap();
        assert_eq!(profit(&rec), 0.0);
        assert!(rec.instances.is_empty() && rec.segments.is_empty());
        assert_eq!(rec.deadline_hit_rate(), 0.0);
    }
}

#[test]
fn single_task_on_planned_reservation() {
    let cat = default_catalog();
    let wfs = [single("w", 5600.0, 560.0, 3600.0)];
    let rec = run(
        &RunInputs::new(&wfs, &cat),
        &config(PolicyKind::Dcd(PricingMix::RD), 1.0),
        3,
    )
    .unwrap();
    assert_eq!(rec.reservations.len(), 1);
    assert_eq!(rec.reservations[0].vm_type, 0);
    assert_eq!(rec.instances.len(), 1);
    let vm = &rec.instances[0];
    assert_eq!((vm.kind, vm.vm_type), (PricingKind::Reserved, 0));
    // (5600 + 560) MI at 5.6 MIPS.
    assert!(close(rec.segments[0].finish, 1100.0));
    assert!(close(rec.costs.reserved, 0.073));
    assert!(close(rec.reward_sum, 5600.0 * SCALE));
    assert!(close(profit(&rec), 0.56 - 0.073));
    assert!(validate_schedule(&wfs, &rec.segments, &rec.instances).is_empty());
}

fn revoking_trace() -> SpotTrace {
    let cat = default_catalog();
    let mut series = vec![Vec::new(); cat.len()];
    series[0] = vec![
        SpotSample {
            time: 0.0,
            price: 0.04,
            available: true,
        },
        SpotSample {
            time: 600.0,
            price: 0.1,
            available: false,
        },
        SpotSample {
            time: 7200.0,
            price: 0.1,
            available: false,
        },
    ];
    SpotTrace::new(series, &[]).unwrap()
}

#[test]
fn revoked_task_resumes_from_checkpoint_on_second_instance() {
    let cat = default_catalog();
    let wfs = [single("w", 5600.0, 560.0, 3600.0)];
    let trace = revoking_trace();
    let inputs = RunInputs {
        spot_trace: Some(&trace),
        ..RunInputs::new(&wfs, &cat)
    };
    let rec = run(&inputs, &config(PolicyKind::Dcd(PricingMix::RDS), 0.0), 1).unwrap();
    assert_eq!(rec.revocations, 1);
    assert_eq!(rec.instances.len(), 2);
    let (spot, od) = (&rec.instances[0], &rec.instances[1]);
    assert_eq!(spot.kind, PricingKind::Spot);
    assert!(close(spot.bid_price.unwrap(), 0.04));
    assert!(close(spot.rent_end, 600.0));
    assert_eq!(od.kind, PricingKind::OnDemand);

    let segs: Vec<&Segment> = rec
        .segments_of(TaskRef {
            workflow: 0,
            task: 0,
        })
        .collect();
    assert_eq!(segs.len(), 2);
    // 100 s loading, then 500 s of work at 5.6 MIPS before the revocation.
    assert!(!segs[0].completed && close(segs[0].finish, 600.0));
    assert!(close(segs[0].cold_mi, 560.0) && close(segs[0].work_mi, 2800.0));
    // The remaining 2800 MI restart cold on the new VM.
    assert!(segs[1].completed && segs[1].cold);
    assert!(close(segs[1].start, 600.0) && close(segs[1].finish, 1200.0));
    assert!(close(segs[0].work_mi + segs[1].work_mi, 5600.0));
    assert!(close(rec.costs.spot, 0.04) && close(rec.costs.on_demand, 0.105));
    assert!(rec.workflows[0].met_deadline);
    assert!(validate_schedule(&wfs, &rec.segments, &rec.instances).is_empty());
}

#[test]
fn revocation_during_load_loses_the_load() {
    let cat = default_catalog();
    // 56000 MI of loading takes 10000 s at 5.6 MIPS; the market takes the VM at 600 s.
    let wfs = [single("w", 560.0, 56000.0, 36000.0)];
    let trace = revoking_trace();
    let inputs = RunInputs {
        spot_trace: Some(&trace),
        ..RunInputs::new(&wfs, &cat)
    };
    let rec = run(&inputs, &config(PolicyKind::Dcd(PricingMix::RDS), 0.0), 1).unwrap();
    let segs: Vec<&Segment> = rec
        .segments_of(TaskRef {
            workflow: 0,
            task: 0,
        })
        .collect();
    assert_eq!(segs.len(), 2);
    assert!(close(segs[0].cold_mi, 3360.0) && segs[0].work_mi == 0.0);
    assert!(segs[1].cold && close(segs[1].work_mi, 560.0));
}

fn pair(same_type: bool) -> Workflow {
    let tasks = vec![
        Task::new("a", "f", 2800.0, 1.0, 560.0),
        Task::new("b", if same_type { "f" } else { "g" }, 2800.0, 1.0, 560.0),
    ];
    Workflow::new("w", tasks, vec![(0, 1)], 0.0, 3600.0).unwrap()
}

#[test]
fn successor_of_same_type_runs_warm() {
    let cat = default_catalog();
    let wfs = [pair(true)];
    let rec = run(
        &RunInputs::new(&wfs, &cat),
        &config(PolicyKind::Dcd(PricingMix::D), 0.0),
        1,
    )
    .unwrap();
    assert_eq!(rec.instances.len(), 1);
    assert_eq!(rec.cold_starts, 1);
    // a: 3360/5.6 = 600 s; b starts at the 600 s tick and runs 2800/5.6 = 500 s warm.
    assert!(close(rec.workflows[0].finish.unwrap(), 1100.0));
    assert!(close(rec.costs.total, 0.105));
}

#[test]
fn successor_of_other_type_reloads() {
    let cat = default_catalog();
    let wfs = [pair(false)];
    let rec = run(
        &RunInputs::new(&wfs, &cat),
        &config(PolicyKind::Dcd(PricingMix::D), 0.0),
        1,
    )
    .unwrap();
    assert_eq!(rec.instances.len(), 1);
    assert_eq!(rec.cold_starts, 2);
    assert!(close(rec.workflows[0].finish.unwrap(), 1200.0));
}

#[test]
fn mixed_workload_profit_by_hand() {
    let cat = default_catalog();
    // "late" cannot meet 100 s even on the fastest type: it runs on c3.8xlarge
    // for 1000 s and earns nothing.
    let wfs = [
        single("ok", 5600.0, 0.0, 3600.0),
        single("late", 89600.0, 0.0, 100.0),
    ];
    let rec = run(
        &RunInputs::new(&wfs, &cat),
        &config(PolicyKind::Dcd(PricingMix::D), 0.0),
        1,
    )
    .unwrap();
    assert!(rec.workflows[0].met_deadline && !rec.workflows[1].met_deadline);
    let late_vm = rec.instance(
        rec.segments_of(TaskRef {
            workflow: 1,
            task: 0,
        })
        .next()
        .unwrap()
        .instance,
    );
    assert_eq!(late_vm.vm_type, 3);
    assert!(close(rec.costs.on_demand, 0.105 + 1.68));
    assert!(close(profit(&rec), 0.56 - 0.105 - 1.68));
    assert_eq!(rec.deadline_hit_rate(), 0.5);
}

#[test]
fn workflow_fitting_no_type_is_skipped() {
    let cat = default_catalog();
    let big = Workflow::new(
        "big",
        vec![Task::new("t", "f", 100.0, 1000.0, 0.0)],
        vec![],
        0.0,
        100.0,
    )
    .unwrap();
    let wfs = [big, single("ok", 5600.0, 0.0, 3600.0)];
    let rec = run(
        &RunInputs::new(&wfs, &cat),
        &config(PolicyKind::Dcd(PricingMix::D), 0.0),
        1,
    )
    .unwrap();
    assert!(!rec.workflows[0].schedulable);
    assert!(rec
        .segments_of(TaskRef {
            workflow: 0,
            task: 0
        })
        .next()
        .is_none());
    assert!(rec.workflows[1].met_deadline);
    assert_eq!(
        rec.incomplete,
        vec![TaskRef {
            workflow: 0,
            task: 0
        }]
    );
}

#[test]
fn horizon_stops_scheduling() {
    let cat = default_catalog();
    let late = single("late", 5600.0, 0.0, 50_000.0)
        .with_window(40_000.0, 50_000.0)
        .unwrap();
    let wfs = [single("ok", 5600.0, 0.0, 3600.0), late];
    let mut cfg = config(PolicyKind::Dcd(PricingMix::D), 0.0);
    cfg.horizon = Some(10_000.0);
    let rec = run(&RunInputs::new(&wfs, &cat), &cfg, 1).unwrap();
    assert!(rec.workflows[0].met_deadline);
    assert_eq!(rec.workflows[1].finish, None);
    assert_eq!(rec.incomplete.len(), 1);
}

#[test]
fn spot_trace_must_match_catalog_and_cover_arrivals() {
    let cat = default_catalog();
    let wfs = [single("w", 5600.0, 0.0, 3600.0)
        .with_window(10_000.0, 13_600.0)
        .unwrap()];
    let short = revoking_trace();
    let inputs = RunInputs {
        spot_trace: Some(&short),
        ..RunInputs::new(&wfs, &cat)
    };
    let cfg = config(PolicyKind::Dcd(PricingMix::RDS), 0.0);
    assert!(matches!(
        run(&inputs, &cfg, 1),
        Err(dcd_core::SimError::TraceTooShort { .. })
    ));
    let narrow = SpotTrace::unavailable(2);
    let inputs = RunInputs {
        spot_trace: Some(&narrow),
        ..inputs
    };
    assert!(matches!(
        run(&inputs, &cfg, 1),
        Err(dcd_core::SimError::TraceCatalogMismatch { .. })
    ));
}

fn two_vm_schedule() -> (Vec<Workflow>, Vec<VmInstance>, Vec<Segment>) {
    let cat = default_catalog();
    let independent = Workflow::new(
        "p",
        vec![
            Task::new("a", "f", 560.0, 1.0, 0.0),
            Task::new("b", "f", 560.0, 1.0, 0.0),
        ],
        vec![],
        0.0,
        3600.0,
    )
    .unwrap();
    let chain = Workflow::new(
        "c",
        vec![
            Task::new("a", "f", 560.0, 1.0, 0.0),
            Task::new("b", "f", 560.0, 1.0, 0.0),
        ],
        vec![(0, 1)],
        0.0,
        3600.0,
    )
    .unwrap();
    let vms: Vec<VmInstance> = (0..3)
        .map(|i| {
            VmInstance::new(
                InstanceId(i),
                0,
                &cat[0],
                PricingKind::OnDemand,
                0.0,
                3600.0,
                0.105,
            )
        })
        .collect();
    let seg = |w, t, vm, start: f64| Segment {
        task: TaskRef {
            workflow: w,
            task: t,
        },
        instance: InstanceId(vm),
        start,
        finish: start + 100.0,
        cold: true,
        cold_mi: 0.0,
        work_mi: 560.0,
        completed: true,
    };
    let segs = vec![
        seg(0, 0, 0, 0.0),
        seg(0, 1, 1, 50.0),
        seg(1, 0, 2, 0.0),
        seg(1, 1, 2, 100.0),
    ];
    (vec![independent, chain], vms, segs)
}

#[test]
fn validator_accepts_hand_schedule() {
    let (wfs, vms, segs) = two_vm_schedule();
    assert!(validate_schedule(&wfs, &segs, &vms).is_empty());
}

#[test]
fn injected_overlap_is_one_constraint_10_violation() {
    let (wfs, vms, mut segs) = two_vm_schedule();
    segs[1].instance = InstanceId(0);
    let v = validate_schedule(&wfs, &segs, &vms);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].constraint, 10);
}

#[test]
fn swapped_predecessor_is_a_constraint_7_violation() {
    let (wfs, vms, mut segs) = two_vm_schedule();
    segs[2].start = 100.0;
    segs[2].finish = 200.0;
    segs[3].start = 0.0;
    segs[3].finish = 100.0;
    let v = validate_schedule(&wfs, &segs, &vms);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].constraint, 7);
}

#[test]
fn each_constraint_is_detected() {
    let (wfs, vms, segs) = two_vm_schedule();
    let count = |segs: &[Segment], vms: &[VmInstance], c: u8| {
        count_by_constraint(&validate_schedule(&wfs, segs, vms))
            .iter()
            .find(|(k, _)| *k == c)
            .unwrap()
            .1
    };

    let mut s = segs.clone();
    s[0].completed = false;
    s.push(Segment {
        completed: true,
        ..segs[0].clone()
    });
    s[4].instance = InstanceId(1);
    assert!(count(&s, &vms, 8) >= 1);

    let mut small = vms.clone();
    small[0].memory = 0.5;
    assert_eq!(count(&segs, &small, 9), 1);

    let mut short = vms.clone();
    short[1].rent_end = 100.0;
    assert_eq!(count(&segs, &short, 11), 1);

    let mut nobid = vms.clone();
    nobid[0].kind = PricingKind::Spot;
    assert_eq!(count(&segs, &nobid, 12), 1);
}
