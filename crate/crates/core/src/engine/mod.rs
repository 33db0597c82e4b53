//! Discrete-event execution of a workload under a scheduling policy.
//!
//! DCD variants with reservations run twice. The planning pass replays the
//! predicted arrivals and records which reserved VMs it would hold; the live
//! pass replays the actual arrivals with those reservations in place and rents
//! everything else on demand or on the spot market.

mod event;
mod exec;
mod predict;
mod record;

pub use event::{Event, EventKind, EventQueue};
pub use predict::{arrival_shift, make_predicted_arrivals, reference_compute_power};
pub use record::{RunRecord, Segment, WorkflowOutcome};

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{CewbPolicy, FaasCachePolicy, RandomPolicy};
use crate::error::SimError;
use crate::pricing::{SpotTrace, VmTypeSpec};
use crate::scheduler::{DcdPolicy, DemandProfile, Policy, ReservePlanner, SchedulerConfig};
use crate::workflow::{TaskAnnotations, Workflow};
use exec::{Driver, Executor};

/// Pricing models a DCD run may use: on demand (D), plus reserved (R),
/// plus spot (S), plus a spot-price prediction for reservation planning (P).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PricingMix {
    D,
    RD,
    RDS,
    RDSP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Dcd(PricingMix),
    RandomNoColdStart,
    FaasCacheLike,
    CewbLike,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 7] = [
        PolicyKind::Dcd(PricingMix::D),
        PolicyKind::Dcd(PricingMix::RD),
        PolicyKind::Dcd(PricingMix::RDS),
        PolicyKind::Dcd(PricingMix::RDSP),
        PolicyKind::RandomNoColdStart,
        PolicyKind::FaasCacheLike,
        PolicyKind::CewbLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Dcd(PricingMix::D) => "dcd-d",
            PolicyKind::Dcd(PricingMix::RD) => "dcd-rd",
            PolicyKind::Dcd(PricingMix::RDS) => "dcd-rds",
            PolicyKind::Dcd(PricingMix::RDSP) => "dcd-rdsp",
            PolicyKind::RandomNoColdStart => "random",
            PolicyKind::FaasCacheLike => "faascache",
            PolicyKind::CewbLike => "cewb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn reserves(self) -> bool {
        matches!(self, PolicyKind::Dcd(m) if m != PricingMix::D)
    }

    pub fn uses_spot(self) -> bool {
        matches!(
            self,
            PolicyKind::Dcd(PricingMix::RDS | PricingMix::RDSP) | PolicyKind::CewbLike
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scheduler: SchedulerConfig,
    pub policy: PolicyKind,
    /// Money per unit of workflow reward (rewards are measured in MI).
    pub reward_scale: f64,
    /// No batch tick is scheduled after this time; unfinished workflows earn nothing.
    pub horizon: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scheduler: SchedulerConfig::default(),
            policy: PolicyKind::Dcd(PricingMix::RDS),
            reward_scale: 1.0,
            horizon: None,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), SimError> {
        self.scheduler.check()?;
        if !(self.reward_scale >= 0.0 && self.reward_scale.is_finite()) {
            return Err(SimError::Config(
                "reward_scale must be a non-negative number".to_string(),
            ));
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(SimError::Config("horizon must be positive".to_string()));
            }
        }
        Ok(())
    }
}

/// Workload and market data for one run.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    pub actual: &'a [Workflow],
    /// Predicted arrivals for reservation planning; the actual arrivals when `None`.
    pub predicted: Option<&'a [Workflow]>,
    pub catalog: &'a [VmTypeSpec],
    pub spot_trace: Option<&'a SpotTrace>,
    /// Spot prediction for the planning pass of `dcd-rdsp`; the actual trace when `None`.
    pub spot_prediction: Option<&'a SpotTrace>,
}

impl<'a> RunInputs<'a> {
    pub fn new(actual: &'a [Workflow], catalog: &'a [VmTypeSpec]) -> Self {
        RunInputs {
            actual,
            predicted: None,
            catalog,
            spot_trace: None,
            spot_prediction: None,
        }
    }
}

const PLAN_STREAM: u64 = 1;
const LIVE_STREAM: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_trace(trace: &SpotTrace, inputs: &RunInputs<'_>) -> Result<(), SimError> {
    if trace.types() != inputs.catalog.len() {
        return Err(SimError::TraceCatalogMismatch {
            trace_types: trace.types(),
            catalog_types: inputs.catalog.len(),
        });
    }
    let last_arrival = inputs
        .actual
        .iter()
        .map(Workflow::arrival)
        .fold(0.0, f64::max);
    if let Some(end) = trace.end_time() {
        if end < last_arrival {
            return Err(SimError::TraceTooShort {
                trace_end: end,
                last_arrival,
            });
        }
    }
    Ok(())
}

/// Runs one simulation and returns its full record.
pub fn run(inputs: &RunInputs<'_>, config: &SimConfig, seed: u64) -> Result<RunRecord, SimError> {
    config.check()?;
    if inputs.catalog.is_empty() {
        return Err(SimError::EmptyCatalog);
    }
    let policy = config.policy;
    let spot = if policy.uses_spot() {
        inputs.spot_trace
    } else {
        None
    };
    if let Some(trace) = spot {
        check_trace(trace, inputs)?;
    }
    let sched = &config.scheduler;
    let annotate = |wfs: &[Workflow]| -> Vec<TaskAnnotations> {
        wfs.iter()
            .map(|wf| TaskAnnotations::compute(wf, sched.lambda, config.reward_scale))
            .collect()
    };

    let mut reservations = Vec::new();
    if policy.reserves() {
        let predicted = inputs.predicted.unwrap_or(inputs.actual);
        let ann = annotate(predicted);
        let spot_prediction = match policy {
            PolicyKind::Dcd(PricingMix::RDSP) => {
                inputs.spot_prediction.or(inputs.spot_trace).cloned()
            }
            _ => None,
        };
        let demand = DemandProfile::build(predicted, &ann, inputs.catalog, sched);
        // A first pass without renewals measures how many instances of each
        // type the predicted timeline keeps busy; the second pass renews
        // against that usage.
        let mut usage = None;
        for _ in 0..2 {
            let planner =
                ReservePlanner::new(spot_prediction.clone(), demand.clone(), usage.take());
            let exec = Executor::new(
                inputs.catalog,
                predicted,
                ann.clone(),
                config,
                None,
                rng_for(seed, PLAN_STREAM),
            );
            let mut driver = Driver::Plan(planner);
            let (_, busy) = exec.run(&mut driver);
            usage = Some(busy);
            if let Driver::Plan(planner) = driver {
                reservations = planner.planned;
            }
        }
    }

    let live_policy: Box<dyn Policy + '_> = match policy {
        PolicyKind::Dcd(_) => Box::new(DcdPolicy { spot }),
        PolicyKind::RandomNoColdStart => Box::new(RandomPolicy),
        PolicyKind::FaasCacheLike => Box::new(FaasCachePolicy),
        PolicyKind::CewbLike => Box::new(CewbPolicy { spot }),
    };
    let ann = annotate(inputs.actual);
    let exec = Executor::new(
        inputs.catalog,
        inputs.actual,
        ann,
        config,
        spot,
        rng_for(seed, LIVE_STREAM),
    );
    let mut driver = Driver::live(live_policy, &reservations);
    let (mut record, _) = exec.run(&mut driver);
    record.policy = policy;
    record.seed = seed;
    record.reservations = reservations;
    Ok(record)
}

/// Rewards of deadline-met workflows minus all rental costs.
pub fn profit(record: &RunRecord) -> f64 {
    record.reward_sum - record.costs.total
}
