use alloc::vec::Vec;

use crate::engine::PolicyKind;
use crate::pricing::{CostBreakdown, InstanceId, VmInstance};
use crate::scheduler::PlannedReservation;
use crate::workflow::TaskRef;

/// One uninterrupted stretch of a task on one instance. A task revoked
/// mid-run has several segments; only the last one has `completed` set.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub task: TaskRef,
    pub instance: InstanceId,
    pub start: f64,
    pub finish: f64,
    pub cold: bool,
    /// Environment-load MI executed during the segment.
    pub cold_mi: f64,
    /// Task MI executed during the segment.
    pub work_mi: f64,
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowOutcome {
    /// Completion time of the last task, if every task completed.
    pub finish: Option<f64>,
    pub met_deadline: bool,
    /// Reward the workflow pays when its deadline is met (after scaling).
    pub reward: f64,
    /// False when some task fits no catalog type; none of its tasks run.
    pub schedulable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub policy: PolicyKind,
    pub seed: u64,
    /// Segments in start order.
    pub segments: Vec<Segment>,
    /// Every hire, indexed by instance id.
    pub instances: Vec<VmInstance>,
    pub workflows: Vec<WorkflowOutcome>,
    pub costs: CostBreakdown,
    pub reward_sum: f64,
    pub profit: f64,
    pub cold_starts: usize,
    /// Spot instances taken back by the market.
    pub revocations: usize,
    /// Tasks that never completed (horizon cut or unschedulable workflow).
    pub incomplete: Vec<TaskRef>,
    /// Reservation plan produced by the planning pass (empty without one).
    pub reservations: Vec<PlannedReservation>,
}

impl RunRecord {
    pub fn deadline_hit_rate(&self) -> f64 {
        if self.workflows.is_empty() {
            return 0.0;
        }
        let met = self.workflows.iter().filter(|w| w.met_deadline).count();
        met as f64 / self.workflows.len() as f64
    }

    pub fn instance(&self, id: InstanceId) -> &VmInstance {
        &self.instances[id.0 as usize]
    }

    /// Segments of `task` in execution order.
    pub fn segments_of(&self, task: TaskRef) -> impl Iterator<Item = &Segment> + '_ {
        self.segments.iter().filter(move |s| s.task == task)
    }
}
