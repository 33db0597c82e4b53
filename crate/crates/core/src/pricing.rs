//! VM catalog, rented instances, execution-time and cost models, spot traces
//! and the reward-driven bid.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::PricingError;
use crate::workflow::Task;
use crate::HOUR;

/// Spot prices are clipped to `DP - SPOT_CLIP_EPS` when a trace reports a
/// price at or above the on-demand price.
pub const SPOT_CLIP_EPS: f64 = 1e-6;

/// A catalog entry. Prices are per hour.
#[derive(Debug, Clone, PartialEq)]
pub struct VmTypeSpec {
    pub name: String,
    pub memory: f64,
    pub compute_power: f64,
    pub price_on_demand: f64,
    pub price_reserved: f64,
}

impl VmTypeSpec {
    pub fn new(
        name: impl Into<String>,
        memory: f64,
        compute_power: f64,
        price_on_demand: f64,
        price_reserved: f64,
    ) -> Result<Self, PricingError> {
        let spec = VmTypeSpec {
            name: name.into(),
            memory,
            compute_power,
            price_on_demand,
            price_reserved,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), PricingError> {
        let fail = |reason| {
            Err(PricingError::BadVmType {
                name: self.name.clone(),
                reason,
            })
        };
        if !(self.compute_power > 0.0) {
            return fail("compute power must be positive");
        }
        if !(self.memory > 0.0) {
            return fail("memory must be positive");
        }
        if !(self.price_reserved > 0.0) {
            return fail("reserved price must be positive");
        }
        if !(self.price_reserved < self.price_on_demand) {
            return fail("reserved price must be below the on-demand price");
        }
        Ok(())
    }
}

/// The six AWS configurations used for evaluation (memory in GiB, compute power
/// as vCPUs x GHz, prices in $/hour).
pub fn default_catalog() -> Vec<VmTypeSpec> {
    [
        ("c3.large", 3.76, 5.6, 0.105, 0.073),
        ("c3.2xlarge", 15.04, 22.4, 0.420, 0.292),
        ("i3.large", 15.24, 4.6, 0.156, 0.107),
        ("c3.8xlarge", 60.16, 89.6, 1.680, 1.168),
        ("i3.2xlarge", 60.96, 18.4, 0.624, 0.428),
        ("i3.8xlarge", 243.84, 73.6, 2.496, 1.714),
    ]
    .into_iter()
    .map(|(name, mem, cp, dp, rp)| VmTypeSpec {
        name: name.to_string(),
        memory: mem,
        compute_power: cp,
        price_on_demand: dp,
        price_reserved: rp,
    })
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PricingKind {
    Reserved,
    OnDemand,
    Spot,
}

impl PricingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PricingKind::Reserved => "reserved",
            PricingKind::OnDemand => "on_demand",
            PricingKind::Spot => "spot",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reserved" => Some(PricingKind::Reserved),
            "on_demand" => Some(PricingKind::OnDemand),
            "spot" => Some(PricingKind::Spot),
            _ => None,
        }
    }
}

impl fmt::Display for PricingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId(pub u32);

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vm{}", self.0)
    }
}

/// One hire of a VM. A renewal extends `rent_end` of the same hire; a new
/// hire always gets a fresh id.
#[derive(Debug, Clone, PartialEq)]
pub struct VmInstance {
    pub id: InstanceId,
    /// Index into the catalog.
    pub vm_type: usize,
    pub compute_power: f64,
    pub memory: f64,
    pub kind: PricingKind,
    pub rent_start: f64,
    pub rent_end: f64,
    /// Hourly rate actually charged (RP, DP or the bid).
    pub rate: f64,
    pub bid_price: Option<f64>,
    pub warm_type: Option<String>,
    pub last_use: f64,
    pub last_task_freq: u64,
    pub last_task_penalty: f64,
}

impl VmInstance {
    pub fn new(
        id: InstanceId,
        vm_type: usize,
        spec: &VmTypeSpec,
        kind: PricingKind,
        rent_start: f64,
        rent_end: f64,
        rate: f64,
    ) -> Self {
        VmInstance {
            id,
            vm_type,
            compute_power: spec.compute_power,
            memory: spec.memory,
            kind,
            rent_start,
            rent_end,
            rate,
            bid_price: if kind == PricingKind::Spot {
                Some(rate)
            } else {
                None
            },
            warm_type: None,
            last_use: rent_start,
            last_task_freq: 0,
            last_task_penalty: 0.0,
        }
    }

    pub fn is_warm_for(&self, task_type: &str) -> bool {
        self.warm_type.as_deref() == Some(task_type)
    }

    pub fn billed_hours(&self) -> f64 {
        billed_hours(self.rent_start, self.rent_end)
    }

    pub fn cost(&self) -> f64 {
        self.rate * self.billed_hours()
    }
}

/// Whole hours charged for a window; partial hours round up, minimum one.
pub fn billed_hours(start: f64, end: f64) -> f64 {
    let hours = (end - start) / HOUR;
    libm::fmax(1.0, libm::ceil(hours - 1e-9))
}

/// Seconds to run `work_mi` plus (when cold) `cold_mi` of environment setup.
pub fn run_time(work_mi: f64, cold_mi: f64, compute_power: f64, cold: bool) -> f64 {
    let setup = if cold { cold_mi / compute_power } else { 0.0 };
    work_mi / compute_power + setup
}

/// Execution time of `task` on `vm`; `cold` is whether the environment must be loaded.
pub fn execution_time(task: &Task, vm: &VmTypeSpec, cold: bool) -> f64 {
    run_time(task.length_mi, task.cold_start_mi, vm.compute_power, cold)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CostBreakdown {
    pub reserved: f64,
    pub on_demand: f64,
    pub spot: f64,
    pub total: f64,
}

/// Rental cost split by pricing kind; every instance pays for its whole
/// (hour-rounded) window regardless of use.
pub fn accrue_costs<'a>(instances: impl IntoIterator<Item = &'a VmInstance>) -> CostBreakdown {
    let mut c = CostBreakdown::default();
    for vm in instances {
        let cost = vm.cost();
        match vm.kind {
            PricingKind::Reserved => c.reserved += cost,
            PricingKind::OnDemand => c.on_demand += cost,
            PricingKind::Spot => c.spot += cost,
        }
    }
    c.total = c.reserved + c.on_demand + c.spot;
    c
}

/// `DP - (DP - SP) * exp(-alpha * score)`: starts at the spot price and rises
/// toward the on-demand price as the value scheduled on the type grows.
pub fn bid_price(dp: f64, sp: f64, cumulative_score: f64, alpha: f64) -> Result<f64, PricingError> {
    if !(sp < dp) || !(sp > 0.0) {
        return Err(PricingError::SpotNotBelowDemand { sp, dp });
    }
    if !(alpha > 0.0) {
        return Err(PricingError::BadAlpha(alpha));
    }
    if !(cumulative_score >= 0.0) {
        return Err(PricingError::BadScore(cumulative_score));
    }
    let bid = dp - (dp - sp) * libm::exp(-alpha * cumulative_score);
    Ok(bid.clamp(sp, dp))
}

/// A spot VM is revoked once the market price strictly exceeds its bid.
pub fn revocation_check(instance: &VmInstance, spot_price_now: f64) -> bool {
    match (instance.kind, instance.bid_price) {
        (PricingKind::Spot, Some(bid)) => spot_price_now > bid,
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotSample {
    pub time: f64,
    pub price: f64,
    pub available: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotState {
    pub available: bool,
    pub price: f64,
}

/// Step-function spot price history, one series per catalog type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpotTrace {
    series: Vec<Vec<SpotSample>>,
}

impl SpotTrace {
    /// A trace with no samples for `types` VM types (spot never available).
    pub fn unavailable(types: usize) -> Self {
        SpotTrace {
            series: (0..types).map(|_| Vec::new()).collect(),
        }
    }

    /// `names[i]` is only used in error messages.
    pub fn new(series: Vec<Vec<SpotSample>>, names: &[&str]) -> Result<Self, PricingError> {
        for (ty, s) in series.iter().enumerate() {
            let name = names.get(ty).copied().unwrap_or("?");
            for (i, sample) in s.iter().enumerate() {
                if !(sample.price > 0.0) || !sample.price.is_finite() {
                    return Err(PricingError::BadTrace {
                        vm_type: name.to_string(),
                        index: i,
                        reason: "price must be positive",
                    });
                }
                if i > 0 && !(sample.time > s[i - 1].time) {
                    return Err(PricingError::BadTrace {
                        vm_type: name.to_string(),
                        index: i,
                        reason: "timestamps must be strictly increasing",
                    });
                }
            }
        }
        Ok(SpotTrace { series })
    }

    pub fn types(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, vm_type: usize) -> &[SpotSample] {
        self.series.get(vm_type).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.series.iter().all(Vec::is_empty)
    }

    /// Last sample time over all types.
    pub fn end_time(&self) -> Option<f64> {
        self.series
            .iter()
            .filter_map(|s| s.last().map(|x| x.time))
            .reduce(f64::max)
    }

    /// The last sample at or before `t`; unavailable before the first sample.
    pub fn state_at(&self, vm_type: usize, t: f64) -> SpotState {
        let s = self.series(vm_type);
        let idx = s.partition_point(|x| x.time <= t);
        if idx == 0 {
            return SpotState {
                available: false,
                price: 0.0,
            };
        }
        let sample = s[idx - 1];
        SpotState {
            available: sample.available,
            price: sample.price,
        }
    }

    /// Number of available samples for `vm_type` within `[from, to)`.
    pub fn available_samples(&self, vm_type: usize, from: f64, to: f64) -> usize {
        let s = self.series(vm_type);
        let lo = s.partition_point(|x| x.time < from);
        let hi = s.partition_point(|x| x.time < to);
        s[lo..hi].iter().filter(|x| x.available).count()
    }

    /// Clips available prices that are not below the on-demand price of their
    /// type to `DP - SPOT_CLIP_EPS`. Returns how many samples changed.
    pub fn clip_to_catalog(&mut self, catalog: &[VmTypeSpec]) -> usize {
        let mut clipped = 0;
        for (ty, s) in self.series.iter_mut().enumerate() {
            let Some(spec) = catalog.get(ty) else {
                continue;
            };
            let cap = spec.price_on_demand - SPOT_CLIP_EPS;
            for sample in s
                .iter_mut()
                .filter(|x| x.available && x.price >= spec.price_on_demand)
            {
                sample.price = cap;
                clipped += 1;
            }
        }
        clipped
    }
}
