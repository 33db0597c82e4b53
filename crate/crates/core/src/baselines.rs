//! Comparison policies sharing the engine, billing and validator with DCD.
//!
//! All three rent new VMs with the same type rule as DCD (cheapest type meeting
//! the relative compute requirement), so only placement and pricing differ.

use alloc::vec::Vec;
use rand::Rng;

use crate::pricing::{InstanceId, PricingKind, SpotTrace, VmTypeSpec, SPOT_CLIP_EPS};
use crate::scheduler::{
    cheapest_type, fits, rental_hours, satisfying_types, select_in_stock_vm, Assignment,
    BatchContext, Policy, VmPool,
};
use crate::workflow::{Task, TaskRef};

/// Bid multipliers on the spot price for the two spot classes of CEWB.
pub const CEWB_BID_HIGH: f64 = 1.25;
pub const CEWB_BID_LOW: f64 = 1.05;
/// Slack-to-runtime ratios separating the on-demand, high-bid and low-bid classes.
pub const CEWB_URGENT_RATIO: f64 = 1.0;
pub const CEWB_RELAXED_RATIO: f64 = 3.0;

fn rent_on_demand(
    ctx: &mut BatchContext<'_>,
    task: &Task,
    work: f64,
    rcp: Option<f64>,
) -> Option<InstanceId> {
    let ty = cheapest_type(ctx.catalog, task, rcp, |s| s.price_on_demand)?;
    let spec = &ctx.catalog[ty];
    let hours = rental_hours(spec, task, work, ctx.config);
    Some(ctx.pool.rent(
        ctx.catalog,
        ty,
        PricingKind::OnDemand,
        ctx.now,
        hours,
        spec.price_on_demand,
    ))
}

fn fitting(pool: &VmPool, task: &Task, work: f64, now: f64) -> Vec<InstanceId> {
    pool.free_vms()
        .filter(|vm| fits(vm, task, work, now))
        .map(|vm| vm.id)
        .collect()
}

/// Places each task on a uniformly random fitting free VM, blind to warm
/// environments; rents on demand when none fits.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn schedule(&mut self, ctx: &mut BatchContext<'_>, queue: &[TaskRef]) -> Vec<Assignment> {
        let workflows = ctx.workflows;
        let mut out = Vec::new();
        for &r in queue {
            let task = workflows[r.workflow].task(r.task);
            let work = ctx.work(r);
            let free = fitting(ctx.pool, task, work, ctx.now);
            let chosen = if free.is_empty() {
                let rcp = ctx.rcp(r);
                rent_on_demand(ctx, task, work, rcp)
            } else {
                Some(free[ctx.rng.random_range(0..free.len())])
            };
            if let Some(id) = chosen {
                out.push(ctx.host(r, id));
            }
        }
        out
    }
}

/// Keep-alive caching: reuse a warm VM when one fits; otherwise overwrite
/// the environment with the lowest `LUT + Freq * Penalty`; otherwise rent on
/// demand.
#[derive(Debug, Clone, Copy, Default)]
pub struct FaasCachePolicy;

/// Eviction priority of a cached environment; the lowest is evicted first.
pub fn keep_alive_priority(last_use: f64, freq: u64, penalty: f64) -> f64 {
    last_use + freq as f64 * penalty
}

impl Policy for FaasCachePolicy {
    fn schedule(&mut self, ctx: &mut BatchContext<'_>, queue: &[TaskRef]) -> Vec<Assignment> {
        let workflows = ctx.workflows;
        let mut out = Vec::new();
        for &r in queue {
            let task = workflows[r.workflow].task(r.task);
            let work = ctx.work(r);
            let free = fitting(ctx.pool, task, work, ctx.now);
            let warm = free
                .iter()
                .copied()
                .find(|&id| ctx.pool.get(id).is_warm_for(&task.task_type));
            let victim = || {
                free.iter()
                    .map(|&id| {
                        let vm = ctx.pool.get(id);
                        (
                            keep_alive_priority(
                                vm.last_use,
                                vm.last_task_freq,
                                vm.last_task_penalty,
                            ),
                            id,
                        )
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(_, id)| id)
            };
            let chosen = match warm.or_else(victim) {
                Some(id) => Some(id),
                None => {
                    let rcp = ctx.rcp(r);
                    rent_on_demand(ctx, task, work, rcp)
                }
            };
            if let Some(id) = chosen {
                out.push(ctx.host(r, id));
            }
        }
        out
    }
}

/// Slack-driven broker: least-slack tasks first. After the DCD in-stock check,
/// urgent tasks go on demand and the rest bid for spot capacity, the more
/// relaxed ones at the lower bid.
#[derive(Debug, Clone, Copy, Default)]
pub struct CewbPolicy<'a> {
    pub spot: Option<&'a SpotTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CewbClass {
    OnDemand,
    SpotHigh,
    SpotLow,
}

pub fn cewb_class(slack: f64, exec: f64) -> CewbClass {
    if !(slack > 0.0) || slack < CEWB_URGENT_RATIO * exec {
        CewbClass::OnDemand
    } else if slack < CEWB_RELAXED_RATIO * exec {
        CewbClass::SpotHigh
    } else {
        CewbClass::SpotLow
    }
}

fn cewb_bid(class: CewbClass, sp: f64, dp: f64) -> f64 {
    let m = if class == CewbClass::SpotHigh {
        CEWB_BID_HIGH
    } else {
        CEWB_BID_LOW
    };
    libm::fmin(sp * m, dp - SPOT_CLIP_EPS).max(sp)
}

/// Cold runtime on the type CEWB would rent for the task.
fn cewb_exec(catalog: &[VmTypeSpec], task: &Task, work: f64, rcp: Option<f64>) -> f64 {
    cheapest_type(catalog, task, rcp, |s| s.price_on_demand)
        .map(|ty| {
            crate::pricing::run_time(work, task.cold_start_mi, catalog[ty].compute_power, true)
        })
        .unwrap_or(f64::INFINITY)
}

impl Policy for CewbPolicy<'_> {
    fn schedule(&mut self, ctx: &mut BatchContext<'_>, queue: &[TaskRef]) -> Vec<Assignment> {
        let workflows = ctx.workflows;
        let mut order: Vec<(f64, f64, TaskRef)> = queue
            .iter()
            .map(|&r| {
                let task = workflows[r.workflow].task(r.task);
                let exec = cewb_exec(ctx.catalog, task, ctx.work(r), ctx.rcp(r));
                (ctx.rd_abs(r) - ctx.now - exec, exec, r)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));

        let mut out = Vec::new();
        for (slack, exec, r) in order {
            let task = workflows[r.workflow].task(r.task);
            let work = ctx.work(r);
            let rd = ctx.rd_abs(r);
            let chosen = match select_in_stock_vm(ctx.pool, task, work, rd, ctx.now, ctx.config) {
                Some(id) => Some(id),
                None => {
                    let rcp = ctx.rcp(r);
                    let class = cewb_class(slack, exec);
                    let spot = match (class, self.spot) {
                        (CewbClass::OnDemand, _) | (_, None) => None,
                        (_, Some(trace)) => rent_spot_class(ctx, trace, task, work, rcp, class),
                    };
                    spot.or_else(|| rent_on_demand(ctx, task, work, rcp))
                }
            };
            if let Some(id) = chosen {
                out.push(ctx.host(r, id));
            }
        }
        out
    }
}

fn rent_spot_class(
    ctx: &mut BatchContext<'_>,
    trace: &SpotTrace,
    task: &Task,
    work: f64,
    rcp: Option<f64>,
    class: CewbClass,
) -> Option<InstanceId> {
    let (bid, ty) = satisfying_types(ctx.catalog, task, rcp)
        .into_iter()
        .filter_map(|ty| {
            let state = trace.state_at(ty, ctx.now);
            let dp = ctx.catalog[ty].price_on_demand;
            state.available.then(|| {
                let sp = libm::fmin(state.price, dp - SPOT_CLIP_EPS);
                (cewb_bid(class, sp, dp), ty)
            })
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))?;
    let hours = rental_hours(&ctx.catalog[ty], task, work, ctx.config);
    Some(
        ctx.pool
            .rent(ctx.catalog, ty, PricingKind::Spot, ctx.now, hours, bid),
    )
}
