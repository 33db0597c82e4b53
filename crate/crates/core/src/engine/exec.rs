//! The event loop shared by the planning and live passes.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use super::event::{EventKind, EventQueue};
use super::record::{RunRecord, Segment, WorkflowOutcome};
use super::{PolicyKind, PricingMix, SimConfig};
use crate::pricing::{
    accrue_costs, revocation_check, run_time, InstanceId, PricingKind, SpotTrace, VmTypeSpec,
};
use crate::scheduler::{
    renew_at_junction, Assignment, BatchContext, DemandProfile, PlannedReservation, Policy,
    ReservePlanner, VmPool, VmStatus,
};
use crate::workflow::{ready_tasks, ReadyView, TaskAnnotations, TaskRef, Workflow};

/// Work left below this fraction of a task's length counts as done.
const DONE_FRACTION: f64 = 1e-9;

/// Who places tasks and how rental junctions are resolved.
pub(super) enum Driver<'p> {
    /// Planning pass: junction renewals follow the predicted demand and are
    /// logged as reservations.
    Plan(ReservePlanner),
    /// Live pass: reservations start and renew as planned.
    Live {
        policy: Box<dyn Policy + 'p>,
        planned: BTreeMap<u64, Vec<PlannedReservation>>,
    },
}

// Event times are non-negative, where the bit pattern orders like the value.
fn time_key(t: f64) -> u64 {
    t.to_bits()
}

impl<'p> Driver<'p> {
    pub(super) fn live(policy: Box<dyn Policy + 'p>, reservations: &[PlannedReservation]) -> Self {
        let mut planned: BTreeMap<u64, Vec<PlannedReservation>> = BTreeMap::new();
        for r in reservations {
            planned.entry(time_key(r.start)).or_default().push(*r);
        }
        Driver::Live { policy, planned }
    }

    fn policy(&mut self) -> &mut dyn Policy {
        match self {
            Driver::Plan(planner) => planner,
            Driver::Live { policy, .. } => policy.as_mut(),
        }
    }
}

pub(super) struct Executor<'a> {
    catalog: &'a [VmTypeSpec],
    workflows: &'a [Workflow],
    annotations: Vec<TaskAnnotations>,
    config: &'a SimConfig,
    spot: Option<&'a SpotTrace>,
    rng: ChaCha8Rng,
    queue: EventQueue,
    pool: VmPool,
    now: f64,
    tick: u64,
    active: BTreeSet<usize>,
    completed: Vec<Vec<bool>>,
    claimed: Vec<Vec<bool>>,
    remaining: Vec<Vec<f64>>,
    /// Open segment of every running task.
    running: BTreeMap<TaskRef, usize>,
    segments: Vec<Segment>,
    left: Vec<usize>,
    finish: Vec<Option<f64>>,
    schedulable: Vec<bool>,
    unresolved: usize,
    known_instances: usize,
    cold_starts: usize,
    revocations: usize,
    /// Busy instances per type at each tick.
    usage: Vec<Vec<u32>>,
}

impl<'a> Executor<'a> {
    pub(super) fn new(
        catalog: &'a [VmTypeSpec],
        workflows: &'a [Workflow],
        annotations: Vec<TaskAnnotations>,
        config: &'a SimConfig,
        spot: Option<&'a SpotTrace>,
        rng: ChaCha8Rng,
    ) -> Self {
        let max_mem = catalog.iter().map(|s| s.memory).fold(0.0, f64::max);
        let schedulable: Vec<bool> = workflows
            .iter()
            .map(|wf| wf.tasks().iter().all(|t| t.mem_req <= max_mem))
            .collect();
        Executor {
            catalog,
            workflows,
            annotations,
            config,
            spot,
            rng,
            queue: EventQueue::new(),
            pool: VmPool::new(catalog.len()),
            now: 0.0,
            tick: 0,
            active: BTreeSet::new(),
            completed: workflows.iter().map(|w| vec![false; w.len()]).collect(),
            claimed: workflows.iter().map(|w| vec![false; w.len()]).collect(),
            remaining: workflows
                .iter()
                .map(|w| w.tasks().iter().map(|t| t.length_mi).collect())
                .collect(),
            running: BTreeMap::new(),
            segments: Vec::new(),
            left: workflows.iter().map(Workflow::len).collect(),
            finish: vec![None; workflows.len()],
            unresolved: schedulable.iter().filter(|&&s| s).count(),
            schedulable,
            known_instances: 0,
            cold_starts: 0,
            revocations: 0,
            usage: vec![Vec::new(); catalog.len()],
        }
    }

    pub(super) fn run(mut self, driver: &mut Driver<'_>) -> (RunRecord, DemandProfile) {
        for (i, wf) in self.workflows.iter().enumerate() {
            if self.schedulable[i] {
                self.queue
                    .push(wf.arrival(), EventKind::WorkflowArrival { workflow: i });
            }
        }
        if self.unresolved > 0 {
            self.queue.push(0.0, EventKind::BatchTick);
        }
        if let Driver::Live { planned, .. } = driver {
            for &key in planned.keys() {
                self.queue
                    .push(f64::from_bits(key), EventKind::RentalExpiry);
            }
        }
        if let Some(trace) = self.spot {
            for ty in 0..self.catalog.len() {
                let s = trace.series(ty);
                // Only a rise can push the price above a bid that held before.
                for i in 1..s.len() {
                    if s[i].price > s[i - 1].price {
                        self.queue.push(
                            s[i].time,
                            EventKind::SpotPriceChange {
                                vm_type: ty,
                                sample: i,
                            },
                        );
                    }
                }
            }
        }

        while let Some(ev) = self.queue.pop() {
            debug_assert!(ev.time >= self.now);
            self.now = ev.time;
            match ev.kind {
                EventKind::SpotPriceChange { vm_type, sample } => {
                    self.on_price_change(vm_type, sample)
                }
                EventKind::SpotRevocation { instance } => self.on_revocation(instance),
                EventKind::TaskFinish { task, segment } => self.on_finish(task, segment),
                EventKind::RentalExpiry => self.on_junction(driver),
                EventKind::WorkflowArrival { workflow } => {
                    self.active.insert(workflow);
                }
                EventKind::BatchTick => self.on_tick(driver),
            }
        }
        let usage = DemandProfile::from_counts(
            self.config.scheduler.batch_len,
            core::mem::take(&mut self.usage),
        );
        (self.into_record(), usage)
    }

    fn on_price_change(&mut self, vm_type: usize, sample: usize) {
        let Some(trace) = self.spot else { return };
        let price = trace.series(vm_type)[sample].price;
        let victims: Vec<InstanceId> = self
            .pool
            .active()
            .filter(|vm| vm.vm_type == vm_type && revocation_check(vm, price))
            .map(|vm| vm.id)
            .collect();
        for id in victims {
            self.queue
                .push(self.now, EventKind::SpotRevocation { instance: id });
        }
    }

    fn on_revocation(&mut self, id: InstanceId) {
        match self.pool.status(id) {
            VmStatus::Released => return,
            VmStatus::Busy(task) => {
                let seg = self.running[&task];
                self.checkpoint(task, seg);
            }
            VmStatus::Free => {}
        }
        self.pool.release(id, self.now);
        self.revocations += 1;
    }

    /// Cuts the running segment at `now`, keeping the task work done so far.
    /// Environment loading in progress is lost.
    fn checkpoint(&mut self, task: TaskRef, seg: usize) {
        let t = self.workflows[task.workflow].task(task.task);
        let cp = self.pool.get(self.segments[seg].instance).compute_power;
        let s = &mut self.segments[seg];
        let elapsed = self.now - s.start;
        let cold_time = if s.cold { t.cold_start_mi / cp } else { 0.0 };
        let left = &mut self.remaining[task.workflow][task.task];
        if elapsed < cold_time {
            s.cold_mi = elapsed * cp;
            s.work_mi = 0.0;
        } else {
            s.cold_mi = if s.cold { t.cold_start_mi } else { 0.0 };
            s.work_mi = libm::fmin((elapsed - cold_time) * cp, *left);
        }
        s.finish = self.now;
        *left -= s.work_mi;
        self.running.remove(&task);
        if *left <= DONE_FRACTION * t.length_mi {
            s.work_mi += *left;
            *left = 0.0;
            s.completed = true;
            self.complete(task);
        } else {
            self.claimed[task.workflow][task.task] = false;
        }
    }

    fn on_finish(&mut self, task: TaskRef, seg: usize) {
        if self.running.get(&task) != Some(&seg) {
            return;
        }
        self.running.remove(&task);
        let t = self.workflows[task.workflow].task(task.task);
        let s = &mut self.segments[seg];
        s.finish = self.now;
        s.cold_mi = if s.cold { t.cold_start_mi } else { 0.0 };
        s.work_mi = self.remaining[task.workflow][task.task];
        s.completed = true;
        self.remaining[task.workflow][task.task] = 0.0;
        let instance = s.instance;
        self.pool.finish(instance, self.now);
        self.complete(task);
    }

    fn complete(&mut self, task: TaskRef) {
        let w = task.workflow;
        self.completed[w][task.task] = true;
        self.left[w] -= 1;
        if self.left[w] == 0 {
            self.finish[w] = Some(self.now);
            self.active.remove(&w);
            self.unresolved -= 1;
        }
    }

    fn on_tick(&mut self, driver: &mut Driver<'_>) {
        let views: Vec<ReadyView<'_>> = self
            .active
            .iter()
            .map(|&w| ReadyView {
                index: w,
                workflow: &self.workflows[w],
                annotations: &self.annotations[w],
                completed: &self.completed[w],
                claimed: &self.claimed[w],
            })
            .collect();
        let ready = ready_tasks(&views);
        drop(views);

        if !ready.is_empty() {
            let mut ctx = BatchContext {
                now: self.now,
                catalog: self.catalog,
                workflows: self.workflows,
                annotations: &self.annotations,
                remaining_mi: &self.remaining,
                pool: &mut self.pool,
                config: &self.config.scheduler,
                rng: &mut self.rng,
            };
            let assignments = driver.policy().schedule(&mut ctx, &ready);
            for a in assignments {
                self.start_segment(a);
            }
            self.register_new_instances();
        }
        let k = self.tick as usize;
        for &id in self.pool.busy().keys() {
            let counts = &mut self.usage[self.pool.get(id).vm_type];
            if counts.len() <= k {
                counts.resize(k + 1, 0);
            }
            counts[k] += 1;
        }

        if self.unresolved > 0 {
            self.tick += 1;
            let next = self.tick as f64 * self.config.scheduler.batch_len;
            if self.config.horizon.is_none_or(|h| next <= h) {
                self.queue.push(next, EventKind::BatchTick);
            }
        }
    }

    fn start_segment(&mut self, a: Assignment) {
        let r = a.task;
        debug_assert!(!self.claimed[r.workflow][r.task] && !self.completed[r.workflow][r.task]);
        let t = self.workflows[r.workflow].task(r.task);
        let vm = self.pool.get(a.instance);
        let work = self.remaining[r.workflow][r.task];
        let finish = self.now + run_time(work, t.cold_start_mi, vm.compute_power, a.cold);
        debug_assert!(
            finish <= vm.rent_end + 1e-6,
            "task outlives rental of {}",
            vm.id
        );
        let seg = self.segments.len();
        self.segments.push(Segment {
            task: r,
            instance: a.instance,
            start: self.now,
            finish,
            cold: a.cold,
            cold_mi: 0.0,
            work_mi: 0.0,
            completed: false,
        });
        self.claimed[r.workflow][r.task] = true;
        self.running.insert(r, seg);
        self.cold_starts += usize::from(a.cold);
        self.queue.push(
            finish,
            EventKind::TaskFinish {
                task: r,
                segment: seg,
            },
        );
    }

    fn register_new_instances(&mut self) {
        let ledger = self.pool.ledger();
        for vm in &ledger[self.known_instances..] {
            self.queue.push(vm.rent_end, EventKind::RentalExpiry);
        }
        self.known_instances = ledger.len();
    }

    /// Task types still to run in arrived workflows.
    fn upcoming_types(&self) -> BTreeSet<String> {
        self.active
            .iter()
            .flat_map(|&w| {
                let wf = &self.workflows[w];
                (0..wf.len())
                    .filter(move |&i| !self.completed[w][i])
                    .map(move |i| wf.task(i).task_type.clone())
            })
            .collect()
    }

    fn on_junction(&mut self, driver: &mut Driver<'_>) {
        let now = self.now;
        let expiring = self.pool.expiring(now);
        let planned_here = match driver {
            Driver::Live { planned, .. } => planned.remove(&time_key(now)).unwrap_or_default(),
            Driver::Plan(_) => Vec::new(),
        };
        if expiring.is_empty() && planned_here.is_empty() {
            return;
        }
        let (reserved, others): (Vec<InstanceId>, Vec<InstanceId>) = expiring
            .into_iter()
            .partition(|&id| self.pool.get(id).kind == PricingKind::Reserved);
        for id in others {
            self.pool.release(id, now);
        }
        let upcoming = self.upcoming_types();
        let cfg = &self.config.scheduler;
        let period = cfg.rent_hours;

        let mut needed: BTreeMap<usize, usize> = BTreeMap::new();
        match driver {
            Driver::Plan(ReservePlanner { usage: None, .. }) => {}
            Driver::Plan(ReservePlanner {
                usage: Some(usage), ..
            }) => {
                // Instances that stay live through the junction already cover
                // part of the upcoming demand.
                let mut staying: BTreeMap<usize, usize> = BTreeMap::new();
                for vm in self.pool.active().filter(|vm| vm.rent_end > now + 1e-9) {
                    *staying.entry(vm.vm_type).or_default() += 1;
                }
                for &id in &reserved {
                    let ty = self.pool.get(id).vm_type;
                    needed.entry(ty).or_insert_with(|| {
                        let peak = usage.peak(ty, now, now + cfg.batch_len) as usize;
                        peak.saturating_sub(staying.get(&ty).copied().unwrap_or(0))
                    });
                }
            }
            Driver::Live { .. } => {
                for p in planned_here.iter().filter(|p| p.hours == period) {
                    *needed.entry(p.vm_type).or_default() += p.count;
                }
            }
        }
        let outcome = renew_at_junction(&mut self.pool, &reserved, &needed, &upcoming, now, cfg);
        let mut renewed: BTreeMap<usize, usize> = BTreeMap::new();
        for &id in &outcome.renewed {
            *renewed.entry(self.pool.get(id).vm_type).or_default() += 1;
            self.queue
                .push(self.pool.get(id).rent_end, EventKind::RentalExpiry);
        }

        match driver {
            Driver::Plan(planner) => {
                for (vm_type, count) in renewed {
                    planner.planned.push(PlannedReservation {
                        vm_type,
                        start: now,
                        hours: period,
                        count,
                    });
                }
            }
            Driver::Live { .. } => {
                for p in planned_here {
                    let mut fresh = p.count;
                    if p.hours == period {
                        let have = renewed.entry(p.vm_type).or_default();
                        let covered = fresh.min(*have);
                        *have -= covered;
                        fresh -= covered;
                    }
                    for _ in 0..fresh {
                        self.pool
                            .reserve_slot(self.catalog, p.vm_type, now, p.hours);
                    }
                }
                self.register_new_instances();
            }
        }
    }

    fn into_record(self) -> RunRecord {
        let workflows: Vec<WorkflowOutcome> = self
            .workflows
            .iter()
            .enumerate()
            .map(|(w, wf)| {
                let d = wf.deadline();
                let met =
                    self.finish[w].is_some_and(|f| f <= d + 1e-9 * libm::fmax(1.0, libm::fabs(d)));
                WorkflowOutcome {
                    finish: self.finish[w],
                    met_deadline: met,
                    reward: self.annotations[w].reward,
                    schedulable: self.schedulable[w],
                }
            })
            .collect();
        let reward_sum = workflows
            .iter()
            .filter(|w| w.met_deadline)
            .map(|w| w.reward)
            .sum::<f64>();
        let incomplete = self
            .completed
            .iter()
            .enumerate()
            .flat_map(|(w, done)| {
                done.iter()
                    .enumerate()
                    .filter(|(_, d)| !**d)
                    .map(move |(t, _)| TaskRef {
                        workflow: w,
                        task: t,
                    })
            })
            .collect();
        let instances = self.pool.into_ledger();
        let costs = accrue_costs(&instances);
        RunRecord {
            policy: PolicyKind::Dcd(PricingMix::D),
            seed: 0,
            segments: self.segments,
            instances,
            workflows,
            costs,
            reward_sum,
            profit: reward_sum - costs.total,
            cold_starts: self.cold_starts,
            revocations: self.revocations,
            incomplete,
            reservations: Vec::new(),
        }
    }
}
