//! Profit-driven scheduling of scientific workflows on rented cloud VMs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO: the workflow
//! DAG model, the VM pricing model, the deadline/cold-start/dependency aware
//! (DCD) scheduler with its baselines, the discrete-event engine and the
//! independent schedule validator. File formats and the command line live in
//! the `dcd-sim` companion crate.
//!
//! Units used throughout: time in seconds, work in millions of instructions
//! (MI), compute power in MIPS, memory in GiB and money in dollars.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod engine;
pub mod error;
pub mod pricing;
pub mod scheduler;
pub mod synth;
pub mod validate;
pub mod workflow;

pub use engine::{
    make_predicted_arrivals, profit, run, PolicyKind, PricingMix, RunInputs, RunRecord, SimConfig,
};
pub use error::{ModelError, PricingError, SimError};
pub use pricing::{PricingKind, SpotTrace, VmInstance, VmTypeSpec};
pub use scheduler::SchedulerConfig;
pub use validate::{validate_schedule, Violation};
pub use workflow::{Task, TaskAnnotations, TaskRef, Workflow};

/// Seconds per billing hour.
pub const HOUR: f64 = 3600.0;

/// Relative float comparison with an absolute floor, used wherever two
/// routes to the same quantity must agree.
pub fn approx_eq(a: f64, b: f64, rel: f64) -> bool {
    let scale = libm::fmax(libm::fabs(a), libm::fabs(b));
    libm::fabs(a - b) <= rel * libm::fmax(scale, 1.0)
}
