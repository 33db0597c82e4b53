//! Growing and renewing the pool: catalog type choice, real-time on-demand or
//! spot hires, and renewal at rental junctions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::pricing::{
    bid_price, run_time, InstanceId, PricingKind, SpotTrace, VmTypeSpec, SPOT_CLIP_EPS,
};
use crate::scheduler::{fits, SchedulerConfig, VmPool};
use crate::workflow::Task;
use crate::HOUR;

/// Catalog types able to host `task`: memory-feasible types with
/// `CP >= rcp`, or when none is fast enough (or `rcp` is `None`, i.e. the
/// deadline has passed) the fastest memory-feasible type alone.
pub fn satisfying_types(catalog: &[VmTypeSpec], task: &Task, rcp: Option<f64>) -> Vec<usize> {
    let feasible = || (0..catalog.len()).filter(|&i| catalog[i].memory >= task.mem_req);
    if let Some(rcp) = rcp {
        let fast: Vec<usize> = feasible()
            .filter(|&i| catalog[i].compute_power >= rcp)
            .collect();
        if !fast.is_empty() {
            return fast;
        }
    }
    feasible()
        .max_by(|&a, &b| {
            catalog[a]
                .compute_power
                .total_cmp(&catalog[b].compute_power)
                .then(
                    catalog[b]
                        .price_on_demand
                        .total_cmp(&catalog[a].price_on_demand),
                )
                .then(b.cmp(&a))
        })
        .into_iter()
        .collect()
}

/// Cheapest type by `price` among [`satisfying_types`]; ties go to the lower index.
pub fn cheapest_type(
    catalog: &[VmTypeSpec],
    task: &Task,
    rcp: Option<f64>,
    price: impl Fn(&VmTypeSpec) -> f64,
) -> Option<usize> {
    satisfying_types(catalog, task, rcp)
        .into_iter()
        .min_by(|&a, &b| {
            price(&catalog[a])
                .total_cmp(&price(&catalog[b]))
                .then(a.cmp(&b))
        })
}

/// Rental length for a new hire: the configured period, stretched to whole
/// periods when one cold run of the task would not fit.
pub fn rental_hours(spec: &VmTypeSpec, task: &Task, work_mi: f64, config: &SchedulerConfig) -> f64 {
    let needed = run_time(work_mi, task.cold_start_mi, spec.compute_power, true) / HOUR;
    let periods = libm::ceil(needed / config.rent_hours - 1e-12);
    libm::fmax(1.0, periods) * config.rent_hours
}

/// Hires a VM for `task` when nothing in stock fits: a spot VM at the
/// reward-driven bid when a satisfying type is on offer at `now` (lowest bid
/// wins) and the bid undercuts the on-demand price of the cheapest satisfying
/// type, otherwise that type on demand.
/// Returns `None` only when no catalog type has enough memory.
#[allow(clippy::too_many_arguments)]
pub fn rent_realtime(
    pool: &mut VmPool,
    catalog: &[VmTypeSpec],
    task: &Task,
    work_mi: f64,
    rcp: Option<f64>,
    now: f64,
    spot: Option<&SpotTrace>,
    config: &SchedulerConfig,
) -> Option<InstanceId> {
    let types = satisfying_types(catalog, task, rcp);
    let od = cheapest_type(catalog, task, rcp, |s| s.price_on_demand)?;
    if let Some(trace) = spot {
        let offer = types
            .iter()
            .filter_map(|&ty| {
                let state = trace.state_at(ty, now);
                let dp = catalog[ty].price_on_demand;
                if !state.available {
                    return None;
                }
                let sp = libm::fmin(state.price, dp - SPOT_CLIP_EPS);
                let bid = bid_price(dp, sp, pool.cumulative_score(ty), config.alpha_bid).ok()?;
                Some((bid, ty))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .filter(|&(bid, _)| bid < catalog[od].price_on_demand);
        if let Some((bid, ty)) = offer {
            let hours = rental_hours(&catalog[ty], task, work_mi, config);
            return Some(pool.rent(catalog, ty, PricingKind::Spot, now, hours, bid));
        }
    }
    let hours = rental_hours(&catalog[od], task, work_mi, config);
    Some(pool.rent(
        catalog,
        od,
        PricingKind::OnDemand,
        now,
        hours,
        catalog[od].price_on_demand,
    ))
}

/// Claims the unclaimed reserved slot that hosts `task` before its window
/// ends and meets `rcp`: the cheapest by reserved price, then lowest id.
/// Past-deadline tasks (`rcp` is `None`) take the fastest fitting slot.
pub fn claim_reserved_slot(
    pool: &mut VmPool,
    catalog: &[VmTypeSpec],
    task: &Task,
    work_mi: f64,
    rcp: Option<f64>,
    now: f64,
) -> Option<InstanceId> {
    let fitting = pool.slots().filter(|vm| fits(vm, task, work_mi, now));
    let id = match rcp {
        Some(rcp) => fitting
            .filter(|vm| vm.compute_power >= rcp)
            .min_by(|a, b| {
                catalog[a.vm_type]
                    .price_reserved
                    .total_cmp(&catalog[b.vm_type].price_reserved)
                    .then(a.id.cmp(&b.id))
            })
            .map(|vm| vm.id),
        None => fitting
            .max_by(|a, b| {
                a.compute_power
                    .total_cmp(&b.compute_power)
                    .then(b.id.cmp(&a.id))
            })
            .map(|vm| vm.id),
    }?;
    pool.claim(id);
    Some(id)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct JunctionOutcome {
    pub renewed: Vec<InstanceId>,
    pub released: Vec<InstanceId>,
}

/// At a rental junction renews, per type, `min(expiring, needed)` of the
/// expiring instances and releases the rest.
///
/// Renewal prefers instances warm for a type in `upcoming_types`, then the
/// most recently used, then the lowest id. Renewed instances keep their
/// loaded environment.
pub fn renew_at_junction(
    pool: &mut VmPool,
    expiring: &[InstanceId],
    needed_per_type: &BTreeMap<usize, usize>,
    upcoming_types: &BTreeSet<String>,
    now: f64,
    config: &SchedulerConfig,
) -> JunctionOutcome {
    let mut by_type: BTreeMap<usize, Vec<InstanceId>> = BTreeMap::new();
    for &id in expiring {
        by_type.entry(pool.get(id).vm_type).or_default().push(id);
    }
    let mut out = JunctionOutcome::default();
    for (ty, mut ids) in by_type {
        ids.sort_by(|&a, &b| {
            let (va, vb) = (pool.get(a), pool.get(b));
            let wa = va
                .warm_type
                .as_ref()
                .is_some_and(|t| upcoming_types.contains(t));
            let wb = vb
                .warm_type
                .as_ref()
                .is_some_and(|t| upcoming_types.contains(t));
            wb.cmp(&wa)
                .then(vb.last_use.total_cmp(&va.last_use))
                .then(a.cmp(&b))
        });
        let keep = needed_per_type
            .get(&ty)
            .copied()
            .unwrap_or(0)
            .min(ids.len());
        for (i, id) in ids.into_iter().enumerate() {
            if i < keep {
                pool.renew(id, config.rent_hours);
                out.renewed.push(id);
            } else {
                pool.release(id, now);
                out.released.push(id);
            }
        }
    }
    out
}
