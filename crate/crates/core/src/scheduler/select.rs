//! In-stock VM selection: warm reuse first, then the priority score.

use crate::pricing::{run_time, InstanceId, VmInstance};
use crate::scheduler::{SchedulerConfig, VmPool};
use crate::workflow::Task;

/// The relative deadline has already passed; the task still runs, on the
/// fastest option available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeadlineInfeasible;

/// Minimum MIPS that finishes `task` by `rd_abs` when started at `now`.
pub fn relative_compute_power(
    task: &Task,
    rd_abs: f64,
    now: f64,
    assume_cold: bool,
) -> Result<f64, DeadlineInfeasible> {
    let window = rd_abs - now;
    if !(window > 0.0) {
        return Err(DeadlineInfeasible);
    }
    let work = task.length_mi + if assume_cold { task.cold_start_mi } else { 0.0 };
    Ok(work / window)
}

/// `psi1 * LUT + psi2 * Freq * Penalty + psi3 * mem`; lower is preferred.
pub fn priority_score(vm: &VmInstance, config: &SchedulerConfig) -> f64 {
    config.psi1 * vm.last_use
        + config.psi2 * vm.last_task_freq as f64 * vm.last_task_penalty
        + config.psi3 * vm.memory
}

/// Seconds `task` would occupy `vm` (cold unless its environment is loaded).
pub fn occupancy(vm: &VmInstance, task: &Task, work_mi: f64) -> (f64, bool) {
    let cold = !vm.is_warm_for(&task.task_type);
    (
        run_time(work_mi, task.cold_start_mi, vm.compute_power, cold),
        cold,
    )
}

/// Free, memory-feasible and able to host `work_mi` of `task` before its rental ends.
pub fn fits(vm: &VmInstance, task: &Task, work_mi: f64, now: f64) -> bool {
    vm.memory >= task.mem_req && now + occupancy(vm, task, work_mi).0 <= vm.rent_end
}

/// Picks a VM from the free pool for `task` (with `work_mi` left to run).
///
/// A VM is suitable when it fits the task and its compute power meets the
/// relative compute requirement (warm requirement for warm VMs, cold otherwise).
/// Warm suitable VMs win, smallest (CP, memory) first; otherwise the lowest
/// priority score (highest with `invert_priority`). Past-deadline tasks take
/// the fitting VM that finishes them earliest.
pub fn select_in_stock_vm(
    pool: &VmPool,
    task: &Task,
    work_mi: f64,
    rd_abs: f64,
    now: f64,
    config: &SchedulerConfig,
) -> Option<InstanceId> {
    let scaled = Task {
        length_mi: work_mi,
        ..task.clone()
    };
    let rcp_warm = relative_compute_power(&scaled, rd_abs, now, false);
    let rcp_cold = relative_compute_power(&scaled, rd_abs, now, true);
    let candidates = pool.free_vms().filter(|vm| fits(vm, task, work_mi, now));

    let (Ok(rcp_warm), Ok(rcp_cold)) = (rcp_warm, rcp_cold) else {
        return candidates
            .map(|vm| (now + occupancy(vm, task, work_mi).0, vm.id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id);
    };

    let mut best_warm: Option<&VmInstance> = None;
    let mut best_score: Option<(f64, InstanceId)> = None;
    for vm in candidates {
        let warm = vm.is_warm_for(&task.task_type);
        let need = if warm { rcp_warm } else { rcp_cold };
        if vm.compute_power < need {
            continue;
        }
        if warm {
            let better = match best_warm {
                None => true,
                Some(b) => (vm.compute_power, vm.memory, vm.id) < (b.compute_power, b.memory, b.id),
            };
            if better {
                best_warm = Some(vm);
            }
        } else if best_warm.is_none() {
            let mut s = priority_score(vm, config);
            if config.invert_priority {
                s = -s;
            }
            let better = match best_score {
                None => true,
                Some((bs, bid)) => s < bs || (s == bs && vm.id < bid),
            };
            if better {
                best_score = Some((s, vm.id));
            }
        }
    }
    best_warm.map(|vm| vm.id).or(best_score.map(|(_, id)| id))
}
