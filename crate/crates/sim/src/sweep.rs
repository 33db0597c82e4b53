//! Parameter sweeps: values x policies x seeds, aggregated over seeds.

use std::io::Write;

use dcd_core::{run, PolicyKind, RunRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Number of synthetic workflows.
    Scale,
    SpotDensity,
    /// On-demand price as a multiple of the reserved price.
    PriceRatio,
    /// Standard deviation of the arrival error, as a fraction of critical-path time.
    PredError,
    ReservedProb,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Scale,
        Experiment::SpotDensity,
        Experiment::PriceRatio,
        Experiment::PredError,
        Experiment::ReservedProb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Scale => "scale",
            Experiment::SpotDensity => "spot_density",
            Experiment::PriceRatio => "price_ratio",
            Experiment::PredError => "pred_error",
            Experiment::ReservedProb => "reserved_prob",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Experiment::Scale => vec![100.0, 200.0, 400.0],
            Experiment::SpotDensity => vec![0.1, 0.2, 1.0],
            Experiment::PriceRatio => vec![1.2, 1.5, 2.0, 3.0],
            Experiment::PredError => vec![0.0, 0.2, 0.4],
            Experiment::ReservedProb => vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }

    /// The configuration of one sweep cell.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            Experiment::Scale => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Usage(format!(
                        "scale values must be whole workflow counts (got {value})"
                    )));
                }
                cfg.workflow_file = None;
                cfg.workflows = value as usize;
            }
            Experiment::SpotDensity => cfg.spot_density = value,
            Experiment::PriceRatio => cfg.price_ratio = Some(value),
            Experiment::PredError => cfg.pred_error_std = value,
            Experiment::ReservedProb => cfg.sim.scheduler.reserved_prob = value,
        }
        cfg.check()
            .map_err(|m| Error::Usage(format!("{} = {value}: {m}", self.name())))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub experiment: String,
    pub value: f64,
    pub policy: String,
    pub seeds: usize,
    pub profit_mean: f64,
    pub profit_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub deadline_hit_rate_mean: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(
    experiment: Experiment,
    value: f64,
    policy: PolicyKind,
    runs: &[RunRecord],
) -> SweepRow {
    let profits: Vec<f64> = runs.iter().map(|r| r.profit).collect();
    let costs: Vec<f64> = runs.iter().map(|r| r.costs.total).collect();
    let hits: Vec<f64> = runs.iter().map(RunRecord::deadline_hit_rate).collect();
    let (profit_mean, profit_std) = mean_std(&profits);
    let (cost_mean, cost_std) = mean_std(&costs);
    SweepRow {
        experiment: experiment.name().to_string(),
        value,
        policy: policy.name().to_string(),
        seeds: runs.len(),
        profit_mean,
        profit_std,
        cost_mean,
        cost_std,
        deadline_hit_rate_mean: mean_std(&hits).0,
    }
}

/// Runs every cell of a sweep over `base.policies` and `base.seeds`. Rows are
/// sorted by value, then policy name.
pub fn sweep(base: &RunConfig, experiment: Experiment, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".to_string()));
    }
    let cells: Vec<(f64, RunConfig)> = values
        .iter()
        .map(|&v| experiment.apply(base, v).map(|c| (v, c)))
        .collect::<Result<_>>()?;

    // One scenario per (value, seed), shared by all policies.
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| base.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let records: Vec<Vec<(PolicyKind, RunRecord)>> = jobs
        .par_iter()
        .map(|&(c, seed)| -> Result<_> {
            let scenario = Scenario::build(&cells[c].1, seed)?;
            let inputs = scenario.inputs();
            base.policies
                .par_iter()
                .map(|&policy| {
                    let mut sim = cells[c].1.sim.clone();
                    sim.policy = policy;
                    let record = run(&inputs, &sim, seed)?;
                    log::info!(
                        "{} = {}: {} seed {seed}: profit {:.4}",
                        experiment.name(),
                        cells[c].0,
                        policy.name(),
                        record.profit
                    );
                    Ok((policy, record))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (c, (value, _)) in cells.iter().enumerate() {
        for &policy in &base.policies {
            let runs: Vec<RunRecord> = jobs
                .iter()
                .zip(&records)
                .filter(|((jc, _), _)| *jc == c)
                .flat_map(|(_, recs)| {
                    recs.iter()
                        .filter(|(p, _)| *p == policy)
                        .map(|(_, r)| r.clone())
                })
                .collect();
            rows.push(aggregate(experiment, *value, policy, &runs));
        }
    }
    rows.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| a.policy.cmp(&b.policy))
    });
    Ok(rows)
}

pub fn write_sweep(rows: &[SweepRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
