//! Independent re-check of a finished schedule.
//!
//! Works only from the workflow definitions, the segment log and the
//! instance ledger, so logs read back from disk can be checked the same way.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::Segment;
use crate::pricing::{InstanceId, PricingKind, VmInstance};
use crate::workflow::{TaskRef, Workflow};

/// Constraint numbers checked, in report order.
pub const CONSTRAINTS: [u8; 6] = [7, 8, 9, 10, 11, 12];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 7 precedence, 8 one host at a time, 9 memory, 10 one task per VM,
    /// 11 rental window, 12 single pricing kind.
    pub constraint: u8,
    pub detail: String,
}

fn tol(t: f64) -> f64 {
    1e-9 * libm::fmax(1.0, libm::fabs(t))
}

fn name(workflows: &[Workflow], r: TaskRef) -> String {
    match workflows.get(r.workflow).filter(|w| r.task < w.len()) {
        Some(w) => format!("{}/{}", w.id(), w.task(r.task).id),
        None => format!("#{}/{}", r.workflow, r.task),
    }
}

/// Returns every violation found; an empty list means the schedule is valid.
pub fn validate_schedule(
    workflows: &[Workflow],
    segments: &[Segment],
    instances: &[VmInstance],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |constraint: u8, detail: String| out.push(Violation { constraint, detail });

    // Constraint 12 first: it also builds the instance index used below.
    let mut ledger: BTreeMap<InstanceId, &VmInstance> = BTreeMap::new();
    for vm in instances {
        if vm.kind == PricingKind::Spot && vm.bid_price.is_none() {
            push(12, format!("{} is spot without a bid", vm.id));
        }
        if vm.kind != PricingKind::Spot && vm.bid_price.is_some() {
            push(12, format!("{} is {} but carries a bid", vm.id, vm.kind));
        }
        if let Some(prev) = ledger.insert(vm.id, vm) {
            if prev.kind != vm.kind {
                push(
                    12,
                    format!("{} is both {} and {}", vm.id, prev.kind, vm.kind),
                );
            }
        }
    }

    let mut by_task: BTreeMap<TaskRef, Vec<&Segment>> = BTreeMap::new();
    let mut by_vm: BTreeMap<InstanceId, Vec<&Segment>> = BTreeMap::new();
    for s in segments {
        by_task.entry(s.task).or_default().push(s);
        by_vm.entry(s.instance).or_default().push(s);
        let valid_task = workflows
            .get(s.task.workflow)
            .is_some_and(|w| s.task.task < w.len());
        if !valid_task {
            push(
                8,
                format!("segment for unknown task {}", name(workflows, s.task)),
            );
            continue;
        }
        let task = workflows[s.task.workflow].task(s.task.task);
        match ledger.get(&s.instance) {
            None => push(
                11,
                format!(
                    "{} runs on unknown instance {}",
                    name(workflows, s.task),
                    s.instance
                ),
            ),
            Some(vm) => {
                if vm.memory < task.mem_req {
                    push(
                        9,
                        format!(
                            "{} needs {} memory but {} has {}",
                            name(workflows, s.task),
                            task.mem_req,
                            vm.id,
                            vm.memory
                        ),
                    );
                }
                if s.start < vm.rent_start - tol(vm.rent_start)
                    || s.finish > vm.rent_end + tol(vm.rent_end)
                {
                    push(
                        11,
                        format!(
                            "{} runs [{}, {}] outside {} window [{}, {}]",
                            name(workflows, s.task),
                            s.start,
                            s.finish,
                            vm.id,
                            vm.rent_start,
                            vm.rent_end
                        ),
                    );
                }
            }
        }
    }

    for segs in by_task.values_mut() {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        let r = segs[0].task;
        for w in segs.windows(2) {
            if w[1].start < w[0].finish - tol(w[0].finish) {
                push(
                    8,
                    format!(
                        "{} runs on {} and {} at once",
                        name(workflows, r),
                        w[0].instance,
                        w[1].instance
                    ),
                );
            }
        }
        let done = segs.iter().filter(|s| s.completed).count();
        if done > 1 || (done == 1 && !segs[segs.len() - 1].completed) {
            push(
                8,
                format!("{} completes more than once", name(workflows, r)),
            );
        }
    }

    for (id, segs) in by_vm.iter_mut() {
        segs.sort_by(|a, b| a.start.total_cmp(&b.start));
        for w in segs.windows(2) {
            if w[1].start < w[0].finish - tol(w[0].finish) {
                push(
                    10,
                    format!(
                        "{id} hosts {} and {} at once",
                        name(workflows, w[0].task),
                        name(workflows, w[1].task)
                    ),
                );
            }
        }
    }

    // Constraint 7: every segment starts after all predecessors completed.
    let finish_of = |r: TaskRef| -> Option<f64> {
        by_task
            .get(&r)
            .and_then(|segs| segs.iter().find(|s| s.completed).map(|s| s.finish))
    };
    for (&r, segs) in &by_task {
        let Some(wf) = workflows.get(r.workflow).filter(|w| r.task < w.len()) else {
            continue;
        };
        let first = segs[0].start;
        for &p in wf.preds(r.task) {
            let pred = TaskRef {
                workflow: r.workflow,
                task: p,
            };
            match finish_of(pred) {
                Some(ft) if ft <= first + tol(first) => {}
                Some(ft) => push(
                    7,
                    format!(
                        "{} starts at {first} before {} finishes at {ft}",
                        name(workflows, r),
                        name(workflows, pred)
                    ),
                ),
                None => push(
                    7,
                    format!(
                        "{} runs but predecessor {} never completes",
                        name(workflows, r),
                        name(workflows, pred)
                    ),
                ),
            }
        }
    }

    out.sort_by_key(|v| v.constraint);
    out
}

/// Violation counts per constraint, in [`CONSTRAINTS`] order.
pub fn count_by_constraint(violations: &[Violation]) -> [(u8, usize); 6] {
    CONSTRAINTS.map(|c| (c, violations.iter().filter(|v| v.constraint == c).count()))
}
