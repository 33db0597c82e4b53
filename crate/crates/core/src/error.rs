use alloc::string::String;

/// Structural problems in a workflow description.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("workflow `{workflow}` has no tasks")]
    Empty { workflow: String },
    #[error("workflow `{workflow}` contains a dependency cycle")]
    Cycle { workflow: String },
    #[error("workflow `{workflow}`: edge references missing task `{task}`")]
    UnknownTask { workflow: String, task: String },
    #[error("workflow `{workflow}`: duplicate task id `{task}`")]
    DuplicateTask { workflow: String, task: String },
    #[error("workflow `{workflow}`, task `{task}`: `{field}` must be {expected} (got {value})")]
    BadTaskField {
        workflow: String,
        task: String,
        field: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("workflow `{workflow}`: deadline {deadline} must be after arrival {arrival}")]
    BadWindow {
        workflow: String,
        arrival: f64,
        deadline: f64,
    },
    #[error("workflow `{workflow}`: reward must be positive (got {value})")]
    BadReward { workflow: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PricingError {
    #[error("spot price {sp} must be below the on-demand price {dp}")]
    SpotNotBelowDemand { sp: f64, dp: f64 },
    #[error("bid sensitivity must be positive (got {0})")]
    BadAlpha(f64),
    #[error("cumulative score must be non-negative (got {0})")]
    BadScore(f64),
    #[error("VM type `{name}`: {reason}")]
    BadVmType { name: String, reason: &'static str },
    #[error("spot trace for `{vm_type}`: {reason} at sample {index}")]
    BadTrace {
        vm_type: String,
        index: usize,
        reason: &'static str,
    },
}

/// Errors raised before or while running a simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("empty VM catalog")]
    EmptyCatalog,
    #[error("spot trace ends at {trace_end}s but workflows arrive until {last_arrival}s")]
    TraceTooShort { trace_end: f64, last_arrival: f64 },
    #[error("spot trace covers {trace_types} VM types, catalog has {catalog_types}")]
    TraceCatalogMismatch {
        trace_types: usize,
        catalog_types: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}
