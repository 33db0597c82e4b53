//! The `dcd` command line.
//!
//! Exit codes: 0 success, 1 bad input or IO failure, 2 schedule violations.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dcd_core::validate::count_by_constraint;
use dcd_core::{run, validate_schedule, Violation};

use crate::config::{parse_policy, RunConfig};
use crate::error::{io_err, Error, Result};
use crate::output::{load_run, write_run};
use crate::scenario::Scenario;
use crate::spot::write_spot_trace;
use crate::sweep::{sweep, write_sweep, Experiment};
use crate::workflows::write_workflows;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dcd",
    version,
    about = "Deadline, cold-start and dependency aware workflow scheduling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of synthetic workflows.
    #[arg(long)]
    workflows: Option<usize>,
    /// Any configuration key, e.g. `--set spot_density=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its run directory.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<String>,
        /// Run directory; defaults to `out_dir` from the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Duplicate the first assignment before validation (tests the validator).
        #[arg(long, hide = true)]
        inject_violation: bool,
    },
    /// Sweep one parameter over policies and seeds; writes one CSV row per (value, policy).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// scale, spot_density, price_ratio, pred_error or reserved_prob.
        #[arg(long)]
        experiment: String,
        /// Comma-separated values; each experiment has defaults.
        #[arg(long)]
        values: Option<String>,
        /// Comma-separated policy names.
        #[arg(long)]
        policies: Option<String>,
        /// Comma-separated seeds or an inclusive range `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        /// Output CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a run directory against the schedule constraints.
    Validate { run_dir: PathBuf },
    /// Write the workload (and spot trace) a configuration would simulate.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Workflow JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Spot trace CSV output.
        #[arg(long)]
        spot_out: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)
            .map_err(|m| Error::Usage(format!("--set {kv}: {m}")))?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.workflows {
        cfg.workflows = n;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn report(violations: &[Violation], out: &mut impl Write) -> io::Result<()> {
    for (c, n) in count_by_constraint(violations) {
        writeln!(out, "constraint {c}: {n}")?;
    }
    for v in violations.iter().take(20) {
        writeln!(out, "  [{}] {}", v.constraint, v.detail)?;
    }
    writeln!(out, "{} violations", violations.len())
}

fn cmd_run(common: &Common, policy: Option<&str>, out: Option<&Path>, inject: bool) -> Result<i32> {
    let mut cfg = load_config(common)?;
    if let Some(p) = policy {
        let mix = match cfg.sim.policy {
            dcd_core::PolicyKind::Dcd(m) => m,
            _ => dcd_core::PricingMix::RDS,
        };
        cfg.sim.policy =
            parse_policy(p, mix).ok_or_else(|| Error::Usage(format!("unknown policy `{p}`")))?;
    }
    if let Some(o) = out {
        cfg.out_dir = o.to_path_buf();
    }
    cfg.check().map_err(Error::Usage)?;
    let scenario = Scenario::build(&cfg, cfg.seed)?;
    let mut record = run(&scenario.inputs(), &cfg.sim, cfg.seed)?;
    if inject {
        if let Some(first) = record.segments.first().cloned() {
            record.segments.insert(1, first);
        }
    }
    write_run(
        &cfg.out_dir,
        &cfg,
        &scenario.actual,
        &scenario.catalog,
        &record,
    )?;
    let violations = validate_schedule(&scenario.actual, &record.segments, &record.instances);
    log::info!("{}: profit {:.6}", cfg.sim.policy.name(), record.profit);
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{} seed {}: profit {:.6}, cost {:.6}, deadline hit rate {:.4}, {} cold starts, {} revocations",
        cfg.sim.policy.name(),
        cfg.seed,
        record.profit,
        record.costs.total,
        record.deadline_hit_rate(),
        record.cold_starts,
        record.revocations
    )?;
    writeln!(stdout, "wrote {}", cfg.out_dir.display())?;
    if violations.is_empty() {
        writeln!(stdout, "0 violations")?;
        Ok(EXIT_OK)
    } else {
        report(&violations, &mut stdout)?;
        Ok(EXIT_VIOLATIONS)
    }
}

fn cmd_sweep(
    common: &Common,
    experiment: &str,
    values: Option<&str>,
    policies: Option<&str>,
    seeds: Option<&str>,
    out: Option<&Path>,
) -> Result<i32> {
    let exp = Experiment::parse(experiment).ok_or_else(|| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        Error::Usage(format!(
            "unknown experiment `{experiment}` (expected one of {})",
            names.join(", ")
        ))
    })?;
    let mut cfg = load_config(common)?;
    if let Some(p) = policies {
        cfg.set("policies", p).map_err(Error::Usage)?;
    }
    if let Some(s) = seeds {
        cfg.set("seeds", s).map_err(Error::Usage)?;
    }
    cfg.check().map_err(Error::Usage)?;
    let values = match values {
        Some(v) => v
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Usage(format!("bad sweep value `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => exp.default_values(),
    };
    let rows = sweep(&cfg, exp, &values)?;
    match out {
        Some(p) => {
            let mut w = create(p)?;
            write_sweep(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_sweep(&rows, io::stdout().lock())?,
    }
    Ok(EXIT_OK)
}

fn cmd_validate(dir: &Path) -> Result<i32> {
    let loaded = load_run(dir)?;
    let violations = validate_schedule(&loaded.workflows, &loaded.segments, &loaded.instances);
    report(&violations, &mut io::stdout().lock())?;
    Ok(if violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_VIOLATIONS
    })
}

fn cmd_gen(common: &Common, out: &Path, spot_out: Option<&Path>) -> Result<i32> {
    let cfg = load_config(common)?;
    cfg.check().map_err(Error::Usage)?;
    let scenario = Scenario::build(&cfg, cfg.seed)?;
    let mut w = create(out)?;
    write_workflows(&scenario.actual, &mut w)?;
    w.flush()?;
    if let Some(p) = spot_out {
        let mut w = create(p)?;
        write_spot_trace(&scenario.spot_trace, &scenario.catalog, &mut w)?;
        w.flush()?;
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run {
            common,
            policy,
            out,
            inject_violation,
        } => cmd_run(common, policy.as_deref(), out.as_deref(), *inject_violation),
        Command::Sweep {
            common,
            experiment,
            values,
            policies,
            seeds,
            out,
        } => cmd_sweep(
            common,
            experiment,
            values.as_deref(),
            policies.as_deref(),
            seeds.as_deref(),
            out.as_deref(),
        ),
        Command::Validate { run_dir } => cmd_validate(run_dir),
        Command::Gen {
            common,
            out,
            spot_out,
        } => cmd_gen(common, out, spot_out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
