use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use crate::pricing::InstanceId;
use crate::workflow::TaskRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Sample `sample` of the spot series of `vm_type` takes effect.
    SpotPriceChange {
        vm_type: usize,
        sample: usize,
    },
    SpotRevocation {
        instance: InstanceId,
    },
    /// Segment `segment` of `task` completes (stale if the task was revoked).
    TaskFinish {
        task: TaskRef,
        segment: usize,
    },
    /// Rental junction: expiring windows end and planned reservations start.
    RentalExpiry,
    WorkflowArrival {
        workflow: usize,
    },
    BatchTick,
}

impl EventKind {
    /// Processing order among events with the same timestamp.
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::SpotPriceChange { .. } => 0,
            EventKind::SpotRevocation { .. } => 1,
            EventKind::TaskFinish { .. } => 2,
            EventKind::RentalExpiry => 3,
            EventKind::WorkflowArrival { .. } => 4,
            EventKind::BatchTick => 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed: BinaryHeap is a max-heap and the earliest event must pop first.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ra, sa) = self.key();
        let (tb, rb, sb) = other.key();
        tb.total_cmp(&ta).then(rb.cmp(&ra)).then(sb.cmp(&sa))
    }
}

/// Min-queue ordered by (time, kind rank, insertion sequence).
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
