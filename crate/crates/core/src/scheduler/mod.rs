//! The DCD decision core.
//!
//! Each batch tick the engine hands a policy the ready queue; the policy maps
//! every task onto an in-stock VM or grows the pool. [`dcd_batch_step`] is the
//! DCD policy itself. In the predicted phase it grows the pool with
//! reservations (see [`plan`]). In real time it rents on demand or bids for
//! spot capacity.

mod plan;
mod pool;
mod rent;
mod select;

pub use plan::{DemandProfile, PlannedReservation, ReservePlanner};
pub use pool::{VmPool, VmStatus};
pub use rent::{
    cheapest_type, claim_reserved_slot, renew_at_junction, rent_realtime, rental_hours,
    satisfying_types, JunctionOutcome,
};
pub use select::{
    fits, occupancy, priority_score, relative_compute_power, select_in_stock_vm, DeadlineInfeasible,
};

use alloc::string::ToString;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;

use crate::error::SimError;
use crate::pricing::{InstanceId, SpotTrace, VmTypeSpec};
use crate::workflow::{Task, TaskAnnotations, TaskRef, Workflow};

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    /// Depth exponent of task weights.
    pub lambda: f64,
    /// Bid sensitivity to the cumulative score.
    pub alpha_bid: f64,
    pub reserved_prob: f64,
    /// Seconds between batch ticks.
    pub batch_len: f64,
    /// Hours per rental period.
    pub rent_hours: f64,
    /// Prefer the highest priority score instead of the lowest.
    pub invert_priority: bool,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            psi1: 1.0,
            psi2: 1.0,
            psi3: 0.1,
            lambda: 0.5,
            alpha_bid: 0.01,
            reserved_prob: 0.7,
            batch_len: 300.0,
            rent_hours: 1.0,
            invert_priority: false,
        }
    }
}

impl SchedulerConfig {
    pub fn check(&self) -> Result<(), SimError> {
        let bad = |what: &str| Err(SimError::Config(what.to_string()));
        for (name, v) in [
            ("psi1", self.psi1),
            ("psi2", self.psi2),
            ("psi3", self.psi3),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&alloc::format!("{name} must be a non-negative number"));
            }
        }
        if !(self.alpha_bid > 0.0) {
            return bad("alpha_bid must be positive");
        }
        if !(0.0..=1.0).contains(&self.reserved_prob) {
            return bad("reserved_prob must lie in [0, 1]");
        }
        if !(self.batch_len > 0.0) {
            return bad("batch_len must be positive");
        }
        if !(self.rent_hours > 0.0) {
            return bad("rent_hours must be positive");
        }
        Ok(())
    }
}

/// A task placed on a VM at the start of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub task: TaskRef,
    pub instance: InstanceId,
    pub cold: bool,
}

/// Everything a policy may read or change during one batch.
pub struct BatchContext<'a> {
    pub now: f64,
    pub catalog: &'a [VmTypeSpec],
    pub workflows: &'a [Workflow],
    pub annotations: &'a [TaskAnnotations],
    /// MI still to execute, per workflow and task (less than the length after a revocation).
    pub remaining_mi: &'a [Vec<f64>],
    pub pool: &'a mut VmPool,
    pub config: &'a SchedulerConfig,
    pub rng: &'a mut ChaCha8Rng,
}

impl BatchContext<'_> {
    pub fn task(&self, r: TaskRef) -> &Task {
        self.workflows[r.workflow].task(r.task)
    }

    pub fn work(&self, r: TaskRef) -> f64 {
        self.remaining_mi[r.workflow][r.task]
    }

    pub fn rd_abs(&self, r: TaskRef) -> f64 {
        self.annotations[r.workflow].abs_deadline(self.workflows[r.workflow].arrival(), r.task)
    }

    pub fn task_reward(&self, r: TaskRef) -> f64 {
        self.annotations[r.workflow].task_reward[r.task]
    }

    /// Requirement used to filter catalog types: worst case (cold) start.
    pub fn rcp(&self, r: TaskRef) -> Option<f64> {
        let t = self.task(r);
        let scaled = Task {
            length_mi: self.work(r),
            ..t.clone()
        };
        relative_compute_power(&scaled, self.rd_abs(r), self.now, true).ok()
    }

    /// Places `r` on the free instance `id`.
    pub fn host(&mut self, r: TaskRef, id: InstanceId) -> Assignment {
        let reward = self.task_reward(r);
        let workflows = self.workflows;
        let task = workflows[r.workflow].task(r.task);
        let cold = self.pool.assign(id, r, task, reward);
        Assignment {
            task: r,
            instance: id,
            cold,
        }
    }
}

/// A scheduling policy driven by the engine once per batch tick.
pub trait Policy {
    /// Places the tasks of `queue`; tasks left out stay queued for the next tick.
    fn schedule(&mut self, ctx: &mut BatchContext<'_>, queue: &[TaskRef]) -> Vec<Assignment>;
}

/// Phase in which a DCD batch step runs.
pub enum RentMode<'a> {
    /// Planning over predicted arrivals: new VMs are reservations (or
    /// placeholders for capacity left to real time).
    Predicted(&'a mut ReservePlanner),
    /// Live execution: planned reservations are claimed first, then new VMs
    /// are rented on demand or on the spot market.
    RealTime { spot: Option<&'a SpotTrace> },
}

/// One DCD batch: for every queued task, in queue order, pick an in-stock VM
/// and otherwise grow the pool according to `mode`.
pub fn dcd_batch_step(
    ctx: &mut BatchContext<'_>,
    queue: &[TaskRef],
    mode: &mut RentMode<'_>,
) -> Vec<Assignment> {
    let mut out = Vec::with_capacity(queue.len());
    let workflows = ctx.workflows;
    for &r in queue {
        let task = workflows[r.workflow].task(r.task);
        let work = ctx.work(r);
        let rd = ctx.rd_abs(r);
        let chosen = match select_in_stock_vm(ctx.pool, task, work, rd, ctx.now, ctx.config) {
            Some(id) => Some(id),
            None => {
                let rcp = ctx.rcp(r);
                match mode {
                    RentMode::Predicted(planner) => planner.rent(ctx, r, rcp),
                    RentMode::RealTime { spot } => {
                        claim_reserved_slot(ctx.pool, ctx.catalog, task, work, rcp, ctx.now)
                            .or_else(|| {
                                rent_realtime(
                                    ctx.pool,
                                    ctx.catalog,
                                    task,
                                    work,
                                    rcp,
                                    ctx.now,
                                    *spot,
                                    ctx.config,
                                )
                            })
                    }
                }
            }
        };
        if let Some(id) = chosen {
            out.push(ctx.host(r, id));
        }
    }
    out
}

/// The DCD policy in real time; `spot` is `None` when spot renting is disabled.
pub struct DcdPolicy<'a> {
    pub spot: Option<&'a SpotTrace>,
}

impl Policy for DcdPolicy<'_> {
    fn schedule(&mut self, ctx: &mut BatchContext<'_>, queue: &[TaskRef]) -> Vec<Assignment> {
        dcd_batch_step(ctx, queue, &mut RentMode::RealTime { spot: self.spot })
    }
}

impl Policy for ReservePlanner {
    fn schedule(&mut self, ctx: &mut BatchContext<'_>, queue: &[TaskRef]) -> Vec<Assignment> {
        dcd_batch_step(ctx, queue, &mut RentMode::Predicted(self))
    }
}
