//! Run directories.
//!
//! A run writes `assignments.csv` (one row per execution segment),
//! `instances.csv` (one row per VM hire), `summary.csv`, `manifest.txt`, and
//! the `workflows.json` and `catalog.csv` it ran on, so a directory can be
//! re-validated without the original inputs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dcd_core::engine::Segment;
use dcd_core::pricing::InstanceId;
use dcd_core::{PricingKind, RunRecord, TaskRef, VmInstance, VmTypeSpec, Workflow};
use serde::{Deserialize, Serialize};

use crate::catalog::{load_catalog, write_catalog};
use crate::config::RunConfig;
use crate::dax::DaxOptions;
use crate::error::{io_err, parse_err, Result};
use crate::workflows::{load_workflows, write_workflows};

pub const ASSIGNMENTS: &str = "assignments.csv";
pub const INSTANCES: &str = "instances.csv";
pub const SUMMARY: &str = "summary.csv";
pub const MANIFEST: &str = "manifest.txt";
pub const WORKFLOWS: &str = "workflows.json";
pub const CATALOG: &str = "catalog.csv";

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRow {
    task_id: String,
    workflow_id: String,
    vm_id: String,
    vm_type: String,
    pricing_kind: String,
    start: f64,
    finish: f64,
    cold_start_flag: u8,
    bid_price: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRow {
    vm_id: String,
    vm_type: String,
    pricing_kind: String,
    rent_start: f64,
    rent_end: f64,
    rate: f64,
    bid_price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub profit: f64,
    pub reward_sum: f64,
    pub c_res: f64,
    pub c_dem: f64,
    pub c_spot: f64,
    pub deadline_hit_rate: f64,
    pub cold_starts: usize,
    pub revocations: usize,
}

impl SummaryRow {
    pub fn new(run_id: impl Into<String>, r: &RunRecord) -> Self {
        SummaryRow {
            run_id: run_id.into(),
            profit: r.profit,
            reward_sum: r.reward_sum,
            c_res: r.costs.reserved,
            c_dem: r.costs.on_demand,
            c_spot: r.costs.spot,
            deadline_hit_rate: r.deadline_hit_rate(),
            cold_starts: r.cold_starts,
            revocations: r.revocations,
        }
    }
}

pub fn run_id(cfg: &RunConfig) -> String {
    format!("{}-seed{}", cfg.sim.policy.name(), cfg.seed)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).map_err(io_err(path))?))
}

pub fn write_assignments(
    record: &RunRecord,
    workflows: &[Workflow],
    catalog: &[VmTypeSpec],
    writer: impl Write,
) -> Result<()> {
    let by_id: HashMap<InstanceId, &VmInstance> =
        record.instances.iter().map(|v| (v.id, v)).collect();
    let mut w = csv::Writer::from_writer(writer);
    for s in &record.segments {
        let wf = &workflows[s.task.workflow];
        let vm = by_id.get(&s.instance);
        w.serialize(AssignmentRow {
            task_id: wf.task(s.task.task).id.clone(),
            workflow_id: wf.id().to_string(),
            vm_id: s.instance.to_string(),
            vm_type: vm.map_or_else(String::new, |v| catalog[v.vm_type].name.clone()),
            pricing_kind: vm.map_or("", |v| v.kind.as_str()).to_string(),
            start: s.start,
            finish: s.finish,
            cold_start_flag: u8::from(s.cold),
            bid_price: vm.and_then(|v| v.bid_price),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_instances(
    instances: &[VmInstance],
    catalog: &[VmTypeSpec],
    writer: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for v in instances {
        w.serialize(InstanceRow {
            vm_id: v.id.to_string(),
            vm_type: catalog[v.vm_type].name.clone(),
            pricing_kind: v.kind.as_str().to_string(),
            rent_start: v.rent_start,
            rent_end: v.rent_end,
            rate: v.rate,
            bid_price: v.bid_price,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(rows: &[SummaryRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn manifest(cfg: &RunConfig, record: &RunRecord) -> String {
    let mut m = String::new();
    let mut kv = |k: &str, v: String| {
        m.push_str(k);
        m.push('=');
        m.push_str(&v);
        m.push('\n');
    };
    kv("run_id", run_id(cfg));
    kv("seed", cfg.seed.to_string());
    kv("policy", cfg.sim.policy.name().to_string());
    kv("config_hash", cfg.hash());
    kv("crate_version", env!("CARGO_PKG_VERSION").to_string());
    kv("workflows", record.workflows.len().to_string());
    kv("segments", record.segments.len().to_string());
    kv("instances", record.instances.len().to_string());
    kv("incomplete_tasks", record.incomplete.len().to_string());
    m.push_str("\n# configuration\n");
    m.push_str(&cfg.render());
    m
}

/// Writes every file of a run directory, creating `dir` if needed.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    workflows: &[Workflow],
    catalog: &[VmTypeSpec],
    record: &RunRecord,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let flush = |mut w: BufWriter<File>| -> Result<()> { Ok(w.flush()?) };

    let mut w = create(dir, ASSIGNMENTS)?;
    write_assignments(record, workflows, catalog, &mut w)?;
    flush(w)?;
    let mut w = create(dir, INSTANCES)?;
    write_instances(&record.instances, catalog, &mut w)?;
    flush(w)?;
    let mut w = create(dir, SUMMARY)?;
    write_summary(&[SummaryRow::new(run_id(cfg), record)], &mut w)?;
    flush(w)?;
    let mut w = create(dir, MANIFEST)?;
    w.write_all(manifest(cfg, record).as_bytes())?;
    flush(w)?;
    let mut w = create(dir, WORKFLOWS)?;
    write_workflows(workflows, &mut w)?;
    flush(w)?;
    let mut w = create(dir, CATALOG)?;
    write_catalog(catalog, &mut w)?;
    flush(w)
}

/// A schedule read back from a run directory.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub workflows: Vec<Workflow>,
    pub catalog: Vec<VmTypeSpec>,
    pub segments: Vec<Segment>,
    pub instances: Vec<VmInstance>,
}

fn parse_vm_id(s: &str) -> Option<InstanceId> {
    s.strip_prefix("vm")?.parse().ok().map(InstanceId)
}

/// Reads a run directory. The assignments carry no completion flag, so the
/// last segment of each task (by start time) is taken as its completion.
pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let catalog = load_catalog(&dir.join(CATALOG))?;
    let workflows = load_workflows(&dir.join(WORKFLOWS), &DaxOptions::default())?;
    let task_index: HashMap<(&str, &str), TaskRef> = workflows
        .iter()
        .enumerate()
        .flat_map(|(w, wf)| {
            wf.tasks().iter().enumerate().map(move |(t, task)| {
                (
                    (wf.id(), task.id.as_str()),
                    TaskRef {
                        workflow: w,
                        task: t,
                    },
                )
            })
        })
        .collect();

    let path = dir.join(INSTANCES);
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_reader(File::open(&path).map_err(io_err(&path))?);
    let mut instances = Vec::new();
    for rec in rdr.deserialize::<InstanceRow>() {
        let row =
            rec.map_err(|e| parse_err(&file, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = instances.len() as u64 + 2;
        let id = parse_vm_id(&row.vm_id)
            .ok_or_else(|| parse_err(&file, line, format!("bad vm_id `{}`", row.vm_id)))?;
        let ty = catalog
            .iter()
            .position(|s| s.name == row.vm_type)
            .ok_or_else(|| parse_err(&file, line, format!("unknown vm_type `{}`", row.vm_type)))?;
        let kind = PricingKind::parse(&row.pricing_kind).ok_or_else(|| {
            parse_err(
                &file,
                line,
                format!("unknown pricing_kind `{}`", row.pricing_kind),
            )
        })?;
        let mut vm = VmInstance::new(
            id,
            ty,
            &catalog[ty],
            kind,
            row.rent_start,
            row.rent_end,
            row.rate,
        );
        vm.bid_price = row.bid_price;
        instances.push(vm);
    }

    let path = dir.join(ASSIGNMENTS);
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_reader(File::open(&path).map_err(io_err(&path))?);
    let mut segments = Vec::new();
    for rec in rdr.deserialize::<AssignmentRow>() {
        let row =
            rec.map_err(|e| parse_err(&file, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = segments.len() as u64 + 2;
        let task = *task_index
            .get(&(row.workflow_id.as_str(), row.task_id.as_str()))
            .ok_or_else(|| {
                parse_err(
                    &file,
                    line,
                    format!("unknown task `{}/{}`", row.workflow_id, row.task_id),
                )
            })?;
        let instance = parse_vm_id(&row.vm_id)
            .ok_or_else(|| parse_err(&file, line, format!("bad vm_id `{}`", row.vm_id)))?;
        segments.push(Segment {
            task,
            instance,
            start: row.start,
            finish: row.finish,
            cold: row.cold_start_flag == 1,
            cold_mi: 0.0,
            work_mi: 0.0,
            completed: false,
        });
    }
    let mut last: HashMap<TaskRef, usize> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        let e = last.entry(s.task).or_insert(i);
        if s.start >= segments[*e].start {
            *e = i;
        }
    }
    for i in last.into_values() {
        segments[i].completed = true;
    }
    Ok(LoadedRun {
        workflows,
        catalog,
        segments,
        instances,
    })
}
