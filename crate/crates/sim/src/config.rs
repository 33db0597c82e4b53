//! Run configuration: `key = value` lines, `#` comments.
//!
//! Every key has a default, so an empty file is a valid configuration: 200
//! synthetic mixed-shape workflows on the shipped catalog with a synthetic
//! spot trace at 20% availability.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dcd_core::synth::DagShape;
use dcd_core::{PolicyKind, PricingMix, SimConfig};
use sha2::{Digest, Sha256};

use crate::error::{io_err, parse_err, Error, Result};

/// Reward scale of the standard experiment fixture (money per MI of reward).
pub const FIXTURE_REWARD_SCALE: f64 = 3e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub sim: SimConfig,

    /// Workflow file (JSON or DAX); synthetic workflows when absent.
    pub workflow_file: Option<PathBuf>,
    /// Workflow file used as the planning-pass prediction; otherwise the
    /// actual arrivals perturbed by the prediction error below.
    pub predicted_workflow_file: Option<PathBuf>,
    pub catalog_file: Option<PathBuf>,
    /// Spot trace file; synthetic trace when absent.
    pub spot_trace_file: Option<PathBuf>,
    pub spot_prediction_file: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub workflows: usize,
    pub shape: DagShape,
    pub window_hours: f64,
    /// Seed of synthetic workflows, traces and prediction errors; the run seed when absent.
    pub workload_seed: Option<u64>,
    pub spot_density: f64,
    /// Arrival prediction error, as fractions of the critical-path time.
    pub pred_error_mean: f64,
    pub pred_error_std: f64,
    /// When set, every on-demand price becomes `price_ratio x` the reserved price.
    pub price_ratio: Option<f64>,

    pub dax_mi_per_second: f64,
    pub dax_mem_gib: f64,

    /// Sweep seeds and policies.
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            sim: SimConfig {
                reward_scale: FIXTURE_REWARD_SCALE,
                ..SimConfig::default()
            },
            workflow_file: None,
            predicted_workflow_file: None,
            catalog_file: None,
            spot_trace_file: None,
            spot_prediction_file: None,
            out_dir: PathBuf::from("out"),
            workflows: 200,
            shape: DagShape::Mixed,
            window_hours: 20.0,
            workload_seed: None,
            spot_density: 0.2,
            pred_error_mean: 0.0,
            pred_error_std: 0.0,
            price_ratio: None,
            dax_mi_per_second: 5.6,
            dax_mem_gib: 1.0,
            seeds: (1..=5).collect(),
            policies: PolicyKind::ALL.to_vec(),
        }
    }
}

/// Policy names accepted in configs: the full names of [`PolicyKind`], plus
/// `dcd` for the variant selected by `pricing_mix`.
pub fn parse_policy(s: &str, mix: PricingMix) -> Option<PolicyKind> {
    match s {
        "dcd" => Some(PolicyKind::Dcd(mix)),
        _ => PolicyKind::parse(s),
    }
}

fn parse_mix(s: &str) -> Option<PricingMix> {
    Some(match s.to_ascii_lowercase().as_str() {
        "d" => PricingMix::D,
        "rd" => PricingMix::RD,
        "rds" => PricingMix::RDS,
        "rdsp" => PricingMix::RDSP,
        _ => return None,
    })
}

fn mix_name(m: PricingMix) -> &'static str {
    match m {
        PricingMix::D => "d",
        PricingMix::RD => "rd",
        PricingMix::RDS => "rds",
        PricingMix::RDSP => "rdsp",
    }
}

/// Comma-separated seeds; `a..b` expands an inclusive range.
pub fn parse_seeds(s: &str) -> Option<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            out.extend(a..=b);
        } else {
            out.push(part.parse().ok()?);
        }
    }
    Some(out)
}

fn num(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn opt_path(s: &str) -> Option<PathBuf> {
    (!s.is_empty() && s != "none").then(|| PathBuf::from(s))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

fn show_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let s = &mut self.sim.scheduler;
        match key.trim() {
            "seed" => self.seed = v.parse().map_err(|_| format!("`{v}` is not a seed"))?,
            "policy" => {
                let mix = match self.sim.policy {
                    PolicyKind::Dcd(m) => m,
                    _ => PricingMix::RDS,
                };
                self.sim.policy =
                    parse_policy(v, mix).ok_or_else(|| format!("unknown policy `{v}`"))?;
            }
            "pricing_mix" => {
                let mix = parse_mix(v)
                    .ok_or_else(|| format!("unknown pricing mix `{v}` (d, rd, rds, rdsp)"))?;
                if let PolicyKind::Dcd(_) = self.sim.policy {
                    self.sim.policy = PolicyKind::Dcd(mix);
                }
            }
            "psi1" => s.psi1 = num(v)?,
            "psi2" => s.psi2 = num(v)?,
            "psi3" => s.psi3 = num(v)?,
            "lambda" => s.lambda = num(v)?,
            "alpha_bid" => s.alpha_bid = num(v)?,
            "reserved_prob" => s.reserved_prob = num(v)?,
            "batch_len" => s.batch_len = num(v)?,
            "rent_hours" => s.rent_hours = num(v)?,
            "invert_priority" => {
                s.invert_priority = v.parse().map_err(|_| format!("`{v}` is not true/false"))?
            }
            "reward_scale" => self.sim.reward_scale = num(v)?,
            "horizon" => self.sim.horizon = if v == "none" { None } else { Some(num(v)?) },
            "workflow_file" => self.workflow_file = opt_path(v),
            "predicted_workflow_file" => self.predicted_workflow_file = opt_path(v),
            "catalog_file" => self.catalog_file = opt_path(v),
            "spot_trace_file" => self.spot_trace_file = opt_path(v),
            "spot_prediction_file" => self.spot_prediction_file = opt_path(v),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "workflows" => {
                self.workflows = v.parse().map_err(|_| format!("`{v}` is not a count"))?
            }
            "shape" => {
                self.shape = DagShape::parse(v).ok_or_else(|| format!("unknown shape `{v}`"))?
            }
            "window_hours" => self.window_hours = num(v)?,
            "workload_seed" => {
                self.workload_seed = if v == "none" {
                    None
                } else {
                    Some(v.parse().map_err(|_| format!("`{v}` is not a seed"))?)
                }
            }
            "spot_density" => self.spot_density = num(v)?,
            "pred_error_mean" => self.pred_error_mean = num(v)?,
            "pred_error_std" => self.pred_error_std = num(v)?,
            "price_ratio" => self.price_ratio = if v == "none" { None } else { Some(num(v)?) },
            "dax_mi_per_second" => self.dax_mi_per_second = num(v)?,
            "dax_mem_gib" => self.dax_mem_gib = num(v)?,
            "seeds" => self.seeds = parse_seeds(v).ok_or_else(|| format!("bad seed list `{v}`"))?,
            "policies" => {
                let mut out = Vec::new();
                for p in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    out.push(
                        parse_policy(p, PricingMix::RDS)
                            .ok_or_else(|| format!("unknown policy `{p}`"))?,
                    );
                }
                self.policies = out;
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(parse_err(
                    file,
                    i as u64 + 1,
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            cfg.set(k, v)
                .map_err(|m| parse_err(file, i as u64 + 1, m))?;
        }
        cfg.check().map_err(Error::Usage)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        self.sim.check().map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&self.spot_density) {
            return Err("spot_density must lie in [0, 1]".to_string());
        }
        if !(self.window_hours > 0.0) {
            return Err("window_hours must be positive".to_string());
        }
        if !(self.pred_error_std >= 0.0) {
            return Err("pred_error_std must be non-negative".to_string());
        }
        if self.price_ratio.is_some_and(|r| !(r > 1.0)) {
            return Err("price_ratio must exceed 1 (on-demand above reserved)".to_string());
        }
        if !(self.dax_mi_per_second > 0.0 && self.dax_mem_gib > 0.0) {
            return Err("dax_mi_per_second and dax_mem_gib must be positive".to_string());
        }
        if self.seeds.is_empty() || self.policies.is_empty() {
            return Err("seeds and policies must not be empty".to_string());
        }
        Ok(())
    }

    /// Every setting, one `key = value` per line in a fixed order. Parsing
    /// the rendering gives back an equal configuration.
    pub fn render(&self) -> String {
        let s = &self.sim.scheduler;
        let (policy, mix) = match self.sim.policy {
            PolicyKind::Dcd(m) => ("dcd", mix_name(m)),
            p => (p.name(), "rds"),
        };
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let policies: Vec<&str> = self.policies.iter().map(|p| p.name()).collect();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("policy", policy.to_string());
        kv("pricing_mix", mix.to_string());
        kv("psi1", s.psi1.to_string());
        kv("psi2", s.psi2.to_string());
        kv("psi3", s.psi3.to_string());
        kv("lambda", s.lambda.to_string());
        kv("alpha_bid", s.alpha_bid.to_string());
        kv("reserved_prob", s.reserved_prob.to_string());
        kv("batch_len", s.batch_len.to_string());
        kv("rent_hours", s.rent_hours.to_string());
        kv("invert_priority", s.invert_priority.to_string());
        kv("reward_scale", self.sim.reward_scale.to_string());
        kv("horizon", show_opt(self.sim.horizon));
        kv("workflow_file", show_path(&self.workflow_file));
        kv(
            "predicted_workflow_file",
            show_path(&self.predicted_workflow_file),
        );
        kv("catalog_file", show_path(&self.catalog_file));
        kv("spot_trace_file", show_path(&self.spot_trace_file));
        kv(
            "spot_prediction_file",
            show_path(&self.spot_prediction_file),
        );
        kv("out_dir", self.out_dir.display().to_string());
        kv("workflows", self.workflows.to_string());
        kv("shape", self.shape.name().to_string());
        kv("window_hours", self.window_hours.to_string());
        kv(
            "workload_seed",
            self.workload_seed
                .map_or_else(|| "none".to_string(), |s| s.to_string()),
        );
        kv("spot_density", self.spot_density.to_string());
        kv("pred_error_mean", self.pred_error_mean.to_string());
        kv("pred_error_std", self.pred_error_std.to_string());
        kv("price_ratio", show_opt(self.price_ratio));
        kv("dax_mi_per_second", self.dax_mi_per_second.to_string());
        kv("dax_mem_gib", self.dax_mem_gib.to_string());
        kv("seeds", seeds.join(","));
        kv("policies", policies.join(","));
        out
    }

    /// SHA-256 of [`RunConfig::render`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}
