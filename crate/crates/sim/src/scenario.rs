//! Turns a [`RunConfig`] into the inputs of one simulation run.

use dcd_core::engine::reference_compute_power;
use dcd_core::synth::{generate_synthetic, synthetic_spot_trace, SpotParams, SynthParams};
use dcd_core::{make_predicted_arrivals, RunInputs, SpotTrace, VmTypeSpec, Workflow, HOUR};

use crate::catalog::{default_catalog, load_catalog};
use crate::config::RunConfig;
use crate::dax::DaxOptions;
use crate::error::Result;
use crate::spot::load_spot_trace;
use crate::workflows::load_workflows;

/// Seed mixed into the prediction-error stream.
const PREDICTION_SALT: u64 = 0x5eed;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub actual: Vec<Workflow>,
    pub predicted: Vec<Workflow>,
    pub catalog: Vec<VmTypeSpec>,
    pub spot_trace: SpotTrace,
    pub spot_prediction: Option<SpotTrace>,
}

impl Scenario {
    /// Loads files named by `cfg` and generates whatever is missing, using
    /// `seed` (or `workload_seed` when set) for synthetic data.
    pub fn build(cfg: &RunConfig, seed: u64) -> Result<Self> {
        let data_seed = cfg.workload_seed.unwrap_or(seed);
        let mut catalog = match &cfg.catalog_file {
            Some(p) => load_catalog(p)?,
            None => default_catalog(),
        };
        let window = cfg.window_hours * HOUR;

        // Spot prices are drawn relative to reserved prices, so the trace is
        // built before any on-demand repricing.
        let spot_trace = match &cfg.spot_trace_file {
            Some(p) => load_spot_trace(p, &catalog)?.0,
            None => {
                let params = SpotParams {
                    density: cfg.spot_density,
                    horizon: SpotParams::default().horizon.max(window + 10.0 * HOUR),
                    ..SpotParams::default()
                };
                synthetic_spot_trace(&catalog, &params, data_seed)
            }
        };
        if let Some(r) = cfg.price_ratio {
            for s in &mut catalog {
                s.price_on_demand = r * s.price_reserved;
            }
        }
        let spot_prediction = match &cfg.spot_prediction_file {
            Some(p) => Some(load_spot_trace(p, &catalog)?.0),
            None => None,
        };

        let dax = DaxOptions {
            mi_per_second: cfg.dax_mi_per_second,
            mem_gib: cfg.dax_mem_gib,
            ..DaxOptions::default()
        };
        let actual = match &cfg.workflow_file {
            Some(p) => load_workflows(p, &dax)?,
            None => {
                let params = SynthParams {
                    window,
                    ..SynthParams::default()
                };
                generate_synthetic(cfg.workflows, cfg.shape, &params, data_seed)
            }
        };
        let predicted = match &cfg.predicted_workflow_file {
            Some(p) => load_workflows(p, &dax)?,
            None => make_predicted_arrivals(
                &actual,
                cfg.pred_error_mean,
                cfg.pred_error_std,
                reference_compute_power(&catalog),
                data_seed ^ PREDICTION_SALT,
            ),
        };
        Ok(Scenario {
            actual,
            predicted,
            catalog,
            spot_trace,
            spot_prediction,
        })
    }

    pub fn inputs(&self) -> RunInputs<'_> {
        RunInputs {
            actual: &self.actual,
            predicted: Some(&self.predicted),
            catalog: &self.catalog,
            spot_trace: Some(&self.spot_trace),
            spot_prediction: self.spot_prediction.as_ref(),
        }
    }
}
