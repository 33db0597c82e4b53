//! Pegasus DAX (abstract DAG in XML) import.
//!
//! Each `<job>` becomes a task: `name` is the task type and `runtime`
//! seconds times `mi_per_second` its length. `<child ref><parent ref/></child>`
//! elements become edges. File usage (`<uses>`) is ignored. DAX files carry no
//! arrival or deadline, so both come from [`DaxOptions`].

use std::collections::HashMap;

use dcd_core::synth::{synthetic_deadline, SynthParams};
use dcd_core::{Task, Workflow};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DaxOptions {
    /// Converts job runtimes to MI; 5.6 maps runtimes onto the slowest catalog type.
    pub mi_per_second: f64,
    pub mem_gib: f64,
    pub cold_fraction: f64,
    pub arrival: f64,
    /// Relative deadline = `deadline_factor` x critical path at `reference_cp`
    /// plus `level_slack` per DAG level.
    pub deadline_factor: f64,
    pub level_slack: f64,
    pub reference_cp: f64,
}

impl Default for DaxOptions {
    fn default() -> Self {
        let p = SynthParams::default();
        DaxOptions {
            mi_per_second: 5.6,
            mem_gib: 1.0,
            cold_fraction: p.cold_fraction,
            arrival: 0.0,
            deadline_factor: p.deadline_factor,
            level_slack: p.level_slack,
            reference_cp: p.reference_cp,
        }
    }
}

pub fn parse_dax(text: &str, file: &str, fallback_id: &str, opts: &DaxOptions) -> Result<Workflow> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Dax {
        file: file.to_string(),
        workflow: fallback_id.to_string(),
        field: "xml".to_string(),
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    let id = root.attribute("name").unwrap_or(fallback_id).to_string();
    let fail = |field: &str, message: String| Error::Dax {
        file: file.to_string(),
        workflow: id.clone(),
        field: field.to_string(),
        message,
    };
    if root.tag_name().name() != "adag" {
        return Err(fail(
            "adag",
            format!("root element is <{}>", root.tag_name().name()),
        ));
    }

    let mut tasks = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for job in root.children().filter(|n| n.has_tag_name("job")) {
        let job_id = job
            .attribute("id")
            .ok_or_else(|| fail("job.id", "missing".to_string()))?;
        let name = job
            .attribute("name")
            .ok_or_else(|| fail("job.name", format!("missing on job `{job_id}`")))?;
        let runtime: f64 = job
            .attribute("runtime")
            .ok_or_else(|| fail("job.runtime", format!("missing on job `{job_id}`")))?
            .parse()
            .map_err(|_| fail("job.runtime", format!("not a number on job `{job_id}`")))?;
        if !(runtime > 0.0 && runtime.is_finite()) {
            return Err(fail(
                "job.runtime",
                format!("must be positive on job `{job_id}` (got {runtime})"),
            ));
        }
        let length = runtime * opts.mi_per_second;
        if index.insert(job_id.to_string(), tasks.len()).is_some() {
            return Err(fail("job.id", format!("duplicate job `{job_id}`")));
        }
        tasks.push(Task::new(
            job_id,
            name,
            length,
            opts.mem_gib,
            length * opts.cold_fraction,
        ));
    }

    let mut edges = Vec::new();
    for child in root.children().filter(|n| n.has_tag_name("child")) {
        let cref = child
            .attribute("ref")
            .ok_or_else(|| fail("child.ref", "missing".to_string()))?;
        let c = *index
            .get(cref)
            .ok_or_else(|| fail("child.ref", format!("unknown job `{cref}`")))?;
        for parent in child.children().filter(|n| n.has_tag_name("parent")) {
            let pref = parent
                .attribute("ref")
                .ok_or_else(|| fail("parent.ref", "missing".to_string()))?;
            let p = *index
                .get(pref)
                .ok_or_else(|| fail("parent.ref", format!("unknown job `{pref}`")))?;
            edges.push((p, c));
        }
    }

    let model = |source| Error::Model {
        file: file.to_string(),
        source,
    };
    // The window is fixed once the critical path is known.
    let wf =
        Workflow::new(id.clone(), tasks, edges, opts.arrival, opts.arrival + 1.0).map_err(model)?;
    let params = SynthParams {
        deadline_factor: opts.deadline_factor,
        level_slack: opts.level_slack,
        reference_cp: opts.reference_cp,
        ..SynthParams::default()
    };
    let rel = synthetic_deadline(&wf, &params);
    wf.with_window(opts.arrival, opts.arrival + rel)
        .map_err(model)
}
