//! Workflow documents.
//!
//! JSON: a top-level list of
//! `{id, arrival, deadline, tasks: [{id, type, length_mi, mem, cold_start_mi}], edges: [[from, to]]}`
//! where edges name task ids. Pegasus DAX XML is accepted too (see [`crate::dax`]).

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use dcd_core::{ModelError, Task, Workflow};
use serde::{Deserialize, Serialize};

use crate::dax::{parse_dax, DaxOptions};
use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskDoc {
    id: String,
    #[serde(rename = "type")]
    task_type: String,
    length_mi: f64,
    mem: f64,
    cold_start_mi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkflowDoc {
    id: String,
    arrival: f64,
    deadline: f64,
    tasks: Vec<TaskDoc>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

fn build(doc: WorkflowDoc) -> std::result::Result<Workflow, ModelError> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, t) in doc.tasks.iter().enumerate() {
        if index.insert(t.id.as_str(), i).is_some() {
            return Err(ModelError::DuplicateTask {
                workflow: doc.id.clone(),
                task: t.id.clone(),
            });
        }
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (a, b) in &doc.edges {
        let lookup = |id: &String| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| ModelError::UnknownTask {
                    workflow: doc.id.clone(),
                    task: id.clone(),
                })
        };
        edges.push((lookup(a)?, lookup(b)?));
    }
    let tasks = doc
        .tasks
        .iter()
        .map(|t| Task::new(&t.id, &t.task_type, t.length_mi, t.mem, t.cold_start_mi))
        .collect();
    Workflow::new(doc.id.clone(), tasks, edges, doc.arrival, doc.deadline)
}

pub fn parse_workflows_json(text: &str, file: &str) -> Result<Vec<Workflow>> {
    let docs: Vec<WorkflowDoc> = serde_json::from_str(text).map_err(|source| Error::Json {
        file: file.to_string(),
        source,
    })?;
    docs.into_iter()
        .map(|d| {
            build(d).map_err(|source| Error::Model {
                file: file.to_string(),
                source,
            })
        })
        .collect()
}

/// Reads JSON or DAX (detected by a leading `<`), returning workflows sorted by arrival.
pub fn load_workflows(path: &Path, dax: &DaxOptions) -> Result<Vec<Workflow>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file = path.display().to_string();
    let mut wfs = if text.trim_start().starts_with('<') {
        let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dax");
        vec![parse_dax(&text, &file, fallback, dax)?]
    } else {
        parse_workflows_json(&text, &file)?
    };
    wfs.sort_by(|a, b| a.arrival().total_cmp(&b.arrival()));
    Ok(wfs)
}

fn to_doc(wf: &Workflow) -> WorkflowDoc {
    WorkflowDoc {
        id: wf.id().to_string(),
        arrival: wf.arrival(),
        deadline: wf.deadline(),
        tasks: wf
            .tasks()
            .iter()
            .map(|t| TaskDoc {
                id: t.id.clone(),
                task_type: t.task_type.clone(),
                length_mi: t.length_mi,
                mem: t.mem_req,
                cold_start_mi: t.cold_start_mi,
            })
            .collect(),
        edges: wf
            .edges()
            .iter()
            .map(|&(a, b)| (wf.task(a).id.clone(), wf.task(b).id.clone()))
            .collect(),
    }
}

pub fn workflows_to_json(workflows: &[Workflow]) -> String {
    let docs: Vec<WorkflowDoc> = workflows.iter().map(to_doc).collect();
    serde_json::to_string_pretty(&docs).expect("workflow documents serialize")
}

pub fn write_workflows(workflows: &[Workflow], mut writer: impl Write) -> Result<()> {
    writer.write_all(workflows_to_json(workflows).as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}
