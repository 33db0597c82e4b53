//! Reserved-VM planning over predicted arrivals.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::pricing::{InstanceId, PricingKind, SpotTrace, VmTypeSpec};
use crate::scheduler::{cheapest_type, rental_hours, BatchContext, SchedulerConfig};
use crate::workflow::{Task, TaskAnnotations, TaskRef, Workflow};

/// `count` reserved VMs of `vm_type` for `hours` from `start`. Emitted by the
/// predicted phase and materialized by the real-time phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedReservation {
    pub vm_type: usize,
    pub start: f64,
    pub hours: f64,
    pub count: usize,
}

/// First batch tick at or after `t`.
pub fn next_tick(t: f64, batch_len: f64) -> f64 {
    let k = libm::ceil(t / batch_len - 1e-9);
    libm::fmax(k, 0.0) * batch_len
}

/// Concurrent demand per VM type per batch tick, obtained by running the
/// predicted workload on an unlimited pool: every task gets its own cold VM
/// of the cheapest reserved type meeting its relative compute requirement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemandProfile {
    batch_len: f64,
    /// `counts[type][k]`: tasks running right after tick `k` starts them.
    counts: Vec<Vec<u32>>,
}

impl DemandProfile {
    pub fn build(
        workflows: &[Workflow],
        annotations: &[TaskAnnotations],
        catalog: &[VmTypeSpec],
        config: &SchedulerConfig,
    ) -> Self {
        let batch = config.batch_len;
        let mut intervals: Vec<(usize, usize, usize)> = Vec::new();
        for (wf, ann) in workflows.iter().zip(annotations) {
            let mut finish = vec![0.0f64; wf.len()];
            for &v in wf.topo_order() {
                let ready = wf
                    .preds(v)
                    .iter()
                    .map(|&p| finish[p])
                    .fold(wf.arrival(), f64::max);
                let start = next_tick(ready, batch);
                let task = wf.task(v);
                let rd = ann.abs_deadline(wf.arrival(), v);
                let rcp = crate::scheduler::relative_compute_power(task, rd, start, true).ok();
                let Some(ty) = cheapest_type(catalog, task, rcp, |s| s.price_reserved) else {
                    finish[v] = start;
                    continue;
                };
                let dur = crate::pricing::execution_time(task, &catalog[ty], true);
                finish[v] = start + dur;
                let k0 = libm::round(start / batch) as usize;
                // Running at tick k iff start <= k*batch < finish.
                let k1 = libm::ceil(finish[v] / batch - 1e-9) as usize;
                intervals.push((ty, k0, k1.max(k0 + 1)));
            }
        }
        let ticks = intervals.iter().map(|i| i.2).max().unwrap_or(0);
        let mut diff = vec![vec![0i64; ticks + 1]; catalog.len()];
        for (ty, a, b) in intervals {
            diff[ty][a] += 1;
            diff[ty][b] -= 1;
        }
        let counts = diff
            .into_iter()
            .map(|d| {
                let mut acc = 0i64;
                d.into_iter()
                    .take(ticks)
                    .map(|x| {
                        acc += x;
                        acc as u32
                    })
                    .collect()
            })
            .collect();
        DemandProfile {
            batch_len: batch,
            counts,
        }
    }

    /// Profile from explicit per-type, per-tick counts.
    pub fn from_counts(batch_len: f64, counts: Vec<Vec<u32>>) -> Self {
        DemandProfile { batch_len, counts }
    }

    fn tick_index(&self, t: f64) -> usize {
        libm::ceil(t / self.batch_len - 1e-9).max(0.0) as usize
    }

    /// Instances of `vm_type` in use at the tick at or after `t`.
    pub fn at(&self, vm_type: usize, t: f64) -> u32 {
        let k = self.tick_index(t);
        self.counts
            .get(vm_type)
            .and_then(|c| c.get(k))
            .copied()
            .unwrap_or(0)
    }

    /// Peak concurrent instances of `vm_type` over ticks in `[from, to)`.
    pub fn peak(&self, vm_type: usize, from: f64, to: f64) -> u32 {
        let Some(c) = self.counts.get(vm_type) else {
            return 0;
        };
        let lo = self.tick_index(from).min(c.len());
        let hi = self.tick_index(to).min(c.len());
        c[lo..hi].iter().copied().max().unwrap_or(0)
    }
}

/// Predicted-phase renting: reserves a VM for each pool-exhaustion event or
/// leaves the capacity to real time (a throwaway placeholder instance keeps
/// the predicted timeline moving).
#[derive(Debug, Clone)]
pub struct ReservePlanner {
    pub spot_prediction: Option<SpotTrace>,
    /// Unlimited-pool demand, the `U` of the spot rule.
    pub demand: DemandProfile,
    /// Busy instances per type over the predicted timeline, used to size
    /// renewals at rental junctions. `None` disables renewal.
    pub usage: Option<DemandProfile>,
    pub planned: Vec<PlannedReservation>,
}

impl ReservePlanner {
    pub fn new(
        spot_prediction: Option<SpotTrace>,
        demand: DemandProfile,
        usage: Option<DemandProfile>,
    ) -> Self {
        ReservePlanner {
            spot_prediction,
            demand,
            usage,
            planned: Vec::new(),
        }
    }

    /// Reservation rule. Without a spot prediction reserve with probability
    /// `reserved_prob`; with one, reserve only when the predicted spot offers
    /// `A` in the batch interval do not exceed the instances needed `U`.
    pub fn should_reserve<R: Rng>(
        &self,
        vm_type: usize,
        now: f64,
        config: &SchedulerConfig,
        rng: &mut R,
    ) -> bool {
        match &self.spot_prediction {
            None => rng.random_bool(config.reserved_prob),
            Some(trace) => {
                let offers = trace.available_samples(vm_type, now, now + config.batch_len);
                let needed = self.demand.at(vm_type, now) as usize;
                offers <= needed
            }
        }
    }

    pub(crate) fn rent(
        &mut self,
        ctx: &mut BatchContext<'_>,
        r: TaskRef,
        rcp: Option<f64>,
    ) -> Option<InstanceId> {
        let workflows = ctx.workflows;
        let task: &Task = workflows[r.workflow].task(r.task);
        let ty = cheapest_type(ctx.catalog, task, rcp, |s| s.price_reserved)?;
        let spec = &ctx.catalog[ty];
        let hours = rental_hours(spec, task, ctx.work(r), ctx.config);
        if self.should_reserve(ty, ctx.now, ctx.config, ctx.rng) {
            self.planned.push(PlannedReservation {
                vm_type: ty,
                start: ctx.now,
                hours,
                count: 1,
            });
            Some(ctx.pool.rent(
                ctx.catalog,
                ty,
                PricingKind::Reserved,
                ctx.now,
                hours,
                spec.price_reserved,
            ))
        } else {
            Some(ctx.pool.rent(
                ctx.catalog,
                ty,
                PricingKind::OnDemand,
                ctx.now,
                hours,
                spec.price_on_demand,
            ))
        }
    }
}
