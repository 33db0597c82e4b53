//! Workflow DAGs, rewards, per-task relative deadlines and ready-task discovery.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::ModelError;

/// One task of a workflow. `task_type` names the execution environment: two
/// tasks share a warm environment iff their types are equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub task_type: String,
    pub length_mi: f64,
    pub mem_req: f64,
    pub cold_start_mi: f64,
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        task_type: impl Into<String>,
        length_mi: f64,
        mem_req: f64,
        cold_start_mi: f64,
    ) -> Self {
        Task {
            id: id.into(),
            task_type: task_type.into(),
            length_mi,
            mem_req,
            cold_start_mi,
        }
    }
}

/// Index of a task inside a set of workflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskRef {
    pub workflow: usize,
    pub task: usize,
}

/// A validated workflow. Construction checks the DAG and caches the
/// topological order, adjacency and depths.
#[derive(Debug, Clone, PartialEq)]
pub struct Workflow {
    id: String,
    tasks: Vec<Task>,
    edges: Vec<(usize, usize)>,
    arrival: f64,
    deadline: f64,
    reward: f64,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
    depth: Vec<u32>,
}

impl Workflow {
    /// Builds a workflow from tasks and index-based precedence edges
    /// `(before, after)`. The reward is derived from the task lengths.
    pub fn new(
        id: impl Into<String>,
        tasks: Vec<Task>,
        edges: Vec<(usize, usize)>,
        arrival: f64,
        deadline: f64,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if tasks.is_empty() {
            return Err(ModelError::Empty { workflow: id });
        }
        for (i, t) in tasks.iter().enumerate() {
            let bad = |field, expected, value| ModelError::BadTaskField {
                workflow: id.clone(),
                task: t.id.clone(),
                field,
                expected,
                value,
            };
            if !(t.length_mi > 0.0 && t.length_mi.is_finite()) {
                return Err(bad("length_mi", "positive", t.length_mi));
            }
            if !(t.mem_req > 0.0 && t.mem_req.is_finite()) {
                return Err(bad("mem", "positive", t.mem_req));
            }
            if !(t.cold_start_mi >= 0.0 && t.cold_start_mi.is_finite()) {
                return Err(bad("cold_start_mi", "non-negative", t.cold_start_mi));
            }
            if tasks[..i].iter().any(|o| o.id == t.id) {
                return Err(ModelError::DuplicateTask {
                    workflow: id,
                    task: t.id.clone(),
                });
            }
        }
        if !(arrival.is_finite() && deadline.is_finite() && deadline > arrival) {
            return Err(ModelError::BadWindow {
                workflow: id,
                arrival,
                deadline,
            });
        }
        let n = tasks.len();
        let mut edges = edges;
        edges.sort_unstable();
        edges.dedup();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in &edges {
            if a >= n || b >= n {
                let missing = if a >= n { a } else { b };
                return Err(ModelError::UnknownTask {
                    workflow: id,
                    task: alloc::format!("#{missing}"),
                });
            }
            if a == b {
                return Err(ModelError::Cycle { workflow: id });
            }
            succs[a].push(b);
            preds[b].push(a);
        }

        // Kahn's algorithm; the smallest ready index goes first so the order is stable.
        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut frontier: alloc::collections::BinaryHeap<core::cmp::Reverse<usize>> = indeg
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| core::cmp::Reverse(i))
            .collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(core::cmp::Reverse(v)) = frontier.pop() {
            topo.push(v);
            for &s in &succs[v] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    frontier.push(core::cmp::Reverse(s));
                }
            }
        }
        if topo.len() != n {
            return Err(ModelError::Cycle { workflow: id });
        }

        let mut depth = vec![0u32; n];
        for &v in &topo {
            for &p in &preds[v] {
                depth[v] = depth[v].max(depth[p] + 1);
            }
        }

        let mut wf = Workflow {
            id,
            tasks,
            edges,
            arrival,
            deadline,
            reward: 0.0,
            preds,
            succs,
            topo,
            depth,
        };
        wf.reward = workflow_reward(&wf);
        Ok(wf)
    }

    /// Replaces the derived reward with an explicit one.
    pub fn with_reward(mut self, reward: f64) -> Result<Self, ModelError> {
        if !(reward > 0.0 && reward.is_finite()) {
            return Err(ModelError::BadReward {
                workflow: self.id,
                value: reward,
            });
        }
        self.reward = reward;
        Ok(self)
    }

    /// Same workflow with a new arrival and deadline.
    pub fn with_window(mut self, arrival: f64, deadline: f64) -> Result<Self, ModelError> {
        if !(arrival.is_finite() && deadline.is_finite() && deadline > arrival) {
            return Err(ModelError::BadWindow {
                workflow: self.id,
                arrival,
                deadline,
            });
        }
        self.arrival = arrival;
        self.deadline = deadline;
        Ok(self)
    }

    pub fn renamed(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same workflow arriving at `arrival`, keeping its relative deadline.
    pub fn shifted_to(&self, arrival: f64) -> Workflow {
        let mut wf = self.clone();
        let rel = self.relative_deadline();
        wf.arrival = arrival;
        wf.deadline = arrival + rel;
        wf
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }
    pub fn task(&self, index: usize) -> &Task {
        &self.tasks[index]
    }
    pub fn len(&self) -> usize {
        self.tasks.len()
    }
    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    pub fn arrival(&self) -> f64 {
        self.arrival
    }
    pub fn deadline(&self) -> f64 {
        self.deadline
    }
    /// `deadline - arrival`.
    pub fn relative_deadline(&self) -> f64 {
        self.deadline - self.arrival
    }
    pub fn reward(&self) -> f64 {
        self.reward
    }
    pub fn preds(&self, task: usize) -> &[usize] {
        &self.preds[task]
    }
    pub fn succs(&self, task: usize) -> &[usize] {
        &self.succs[task]
    }
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }
    pub fn depth(&self, task: usize) -> u32 {
        self.depth[task]
    }
    pub fn depths(&self) -> &[u32] {
        &self.depth
    }
    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.preds[i].is_empty())
    }
    pub fn total_mi(&self) -> f64 {
        self.tasks.iter().map(|t| t.length_mi).sum()
    }

    /// Longest root-to-task MI prefix for every task (task included).
    pub fn longest_prefix_mi(&self) -> Vec<f64> {
        let mut best = vec![0.0; self.len()];
        for &v in &self.topo {
            let up = self.preds[v].iter().map(|&p| best[p]).fold(0.0, f64::max);
            best[v] = up + self.tasks[v].length_mi;
        }
        best
    }
}

/// Total MI along the heaviest root-to-leaf path.
pub fn critical_path_mi(wf: &Workflow) -> f64 {
    wf.longest_prefix_mi().into_iter().fold(0.0, f64::max)
}

/// Workflow reward `L_tot * (L_tot / L_crit)^2`; grows with size and with
/// parallelism (a pure chain earns exactly its length).
pub fn workflow_reward(wf: &Workflow) -> f64 {
    let total = wf.total_mi();
    let ratio = total / critical_path_mi(wf);
    total * ratio * ratio
}

/// Relative deadlines (offsets from arrival): each task receives the share
/// `length / L_crit` of the relative deadline on top of its latest parent.
pub fn relative_deadlines(wf: &Workflow) -> Vec<f64> {
    let critical = critical_path_mi(wf);
    let window = wf.relative_deadline();
    let mut rd = vec![0.0; wf.len()];
    for &v in wf.topo_order() {
        let base = wf.preds(v).iter().map(|&p| rd[p]).fold(0.0, f64::max);
        rd[v] = base + wf.task(v).length_mi / critical * window;
    }
    rd
}

/// Per-task weights `l * exp(lambda * depth)` and the workflow reward split
/// proportionally to them.
pub fn task_weights_rewards(wf: &Workflow, lambda: f64, reward: f64) -> (Vec<f64>, Vec<f64>) {
    let weights: Vec<f64> = wf
        .tasks()
        .iter()
        .zip(wf.depths())
        .map(|(t, &d)| t.length_mi * libm::exp(lambda * d as f64))
        .collect();
    let sum: f64 = weights.iter().sum();
    let rewards = weights.iter().map(|w| reward * w / sum).collect();
    (weights, rewards)
}

/// Static per-task scheduling data computed once at arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskAnnotations {
    /// Offsets from arrival.
    pub rel_deadline: Vec<f64>,
    pub weight: Vec<f64>,
    pub task_reward: Vec<f64>,
    /// Workflow reward the task rewards were split from.
    pub reward: f64,
}

impl TaskAnnotations {
    pub fn compute(wf: &Workflow, lambda: f64, reward_scale: f64) -> Self {
        let reward = wf.reward() * reward_scale;
        let (weight, task_reward) = task_weights_rewards(wf, lambda, reward);
        TaskAnnotations {
            rel_deadline: relative_deadlines(wf),
            weight,
            task_reward,
            reward,
        }
    }

    /// Absolute relative-deadline timestamp of `task` for a workflow arriving at `arrival`.
    pub fn abs_deadline(&self, arrival: f64, task: usize) -> f64 {
        arrival + self.rel_deadline[task]
    }
}

/// Scheduling progress of one workflow as seen by [`ready_tasks`].
pub struct ReadyView<'a> {
    pub index: usize,
    pub workflow: &'a Workflow,
    pub annotations: &'a TaskAnnotations,
    pub completed: &'a [bool],
    /// Tasks already started or otherwise not eligible.
    pub claimed: &'a [bool],
}

/// Unclaimed tasks whose predecessors have all completed, found by a DFS that
/// descends only through completed tasks. Sorted by descending task reward,
/// then ascending relative deadline, then position.
pub fn ready_tasks(views: &[ReadyView<'_>]) -> Vec<TaskRef> {
    let mut out: Vec<(f64, f64, TaskRef)> = Vec::new();
    for view in views {
        let wf = view.workflow;
        let mut seen = vec![false; wf.len()];
        let mut stack: Vec<usize> = wf.roots().collect();
        while let Some(v) = stack.pop() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if view.completed[v] {
                stack.extend(wf.succs(v).iter().copied().filter(|&s| !seen[s]));
            } else if !view.claimed[v] && wf.preds(v).iter().all(|&p| view.completed[p]) {
                out.push((
                    view.annotations.task_reward[v],
                    view.annotations.abs_deadline(wf.arrival(), v),
                    TaskRef {
                        workflow: view.index,
                        task: v,
                    },
                ));
            }
        }
    }
    out.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.total_cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    out.into_iter().map(|(_, _, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Workflow {
        Workflow::new(
            "chain",
            vec![
                Task::new("a", "x", 200.0, 1.0, 0.0),
                Task::new("b", "x", 300.0, 1.0, 0.0),
                Task::new("c", "x", 500.0, 1.0, 0.0),
            ],
            vec![(0, 1), (1, 2)],
            0.0,
            100.0,
        )
        .unwrap()
    }

    fn diamond(deadline: f64) -> Workflow {
        Workflow::new(
            "diamond",
            vec![
                Task::new("A", "x", 100.0, 1.0, 0.0),
                Task::new("B", "x", 200.0, 1.0, 0.0),
                Task::new("C", "x", 50.0, 1.0, 0.0),
                Task::new("D", "x", 100.0, 1.0, 0.0),
            ],
            vec![(0, 1), (0, 2), (1, 3), (2, 3)],
            0.0,
            deadline,
        )
        .unwrap()
    }

    #[test]
    fn single_task_basics() {
        let wf = Workflow::new(
            "one",
            vec![Task::new("t", "x", 500.0, 1.0, 0.0)],
            vec![],
            10.0,
            70.0,
        )
        .unwrap();
        assert_eq!(critical_path_mi(&wf), 500.0);
        assert_eq!(workflow_reward(&wf), 500.0);
        assert_eq!(relative_deadlines(&wf), vec![60.0]);
    }

    #[test]
    fn chain_values() {
        let wf = chain();
        assert_eq!(critical_path_mi(&wf), 1000.0);
        assert_eq!(workflow_reward(&wf), 1000.0);
        let rd = relative_deadlines(&wf);
        for (got, want) in rd.iter().zip([20.0, 50.0, 100.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert_eq!(wf.depths(), &[0, 1, 2]);
    }

    #[test]
    fn diamond_values() {
        let wf = diamond(80.0);
        assert_eq!(critical_path_mi(&wf), 400.0);
        assert!((workflow_reward(&wf) - 569.53125).abs() < 1e-9);
        let rd = relative_deadlines(&wf);
        for (got, want) in rd.iter().zip([20.0, 60.0, 30.0, 80.0]) {
            assert!((got - want).abs() < 1e-9, "{rd:?}");
        }
        assert_eq!(wf.depths(), &[0, 1, 1, 2]);
    }

    #[test]
    fn weights_at_zero_lambda_are_lengths() {
        let wf = diamond(80.0);
        let (w, r) = task_weights_rewards(&wf, 0.0, 10.0);
        assert_eq!(w, vec![100.0, 200.0, 50.0, 100.0]);
        assert!((r.iter().sum::<f64>() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_cycles_and_bad_fields() {
        let t = || {
            vec![
                Task::new("a", "x", 1.0, 1.0, 0.0),
                Task::new("b", "x", 1.0, 1.0, 0.0),
            ]
        };
        assert!(matches!(
            Workflow::new("w", t(), vec![(0, 1), (1, 0)], 0.0, 1.0),
            Err(ModelError::Cycle { .. })
        ));
        assert!(matches!(
            Workflow::new("w", t(), vec![(0, 0)], 0.0, 1.0),
            Err(ModelError::Cycle { .. })
        ));
        assert!(matches!(
            Workflow::new("w", t(), vec![(0, 5)], 0.0, 1.0),
            Err(ModelError::UnknownTask { .. })
        ));
        assert!(matches!(
            Workflow::new("w", t(), vec![], 5.0, 5.0),
            Err(ModelError::BadWindow { .. })
        ));
        let neg = vec![Task::new("a", "x", -1.0, 1.0, 0.0)];
        assert!(matches!(
            Workflow::new("w", neg, vec![], 0.0, 1.0),
            Err(ModelError::BadTaskField {
                field: "length_mi",
                ..
            })
        ));
        let dup = vec![
            Task::new("a", "x", 1.0, 1.0, 0.0),
            Task::new("a", "x", 1.0, 1.0, 0.0),
        ];
        assert!(matches!(
            Workflow::new("w", dup, vec![], 0.0, 1.0),
            Err(ModelError::DuplicateTask { .. })
        ));
    }

    fn ready(wf: &Workflow, completed: &[bool]) -> Vec<usize> {
        let ann = TaskAnnotations::compute(wf, 0.5, 1.0);
        let claimed = vec![false; wf.len()];
        let views = [ReadyView {
            index: 0,
            workflow: wf,
            annotations: &ann,
            completed,
            claimed: &claimed,
        }];
        let mut v: Vec<usize> = ready_tasks(&views).into_iter().map(|r| r.task).collect();
        v.sort();
        v
    }

    #[test]
    fn ready_examples() {
        let c = chain();
        assert_eq!(ready(&c, &[false, false, false]), vec![0]);
        assert_eq!(ready(&c, &[true, false, false]), vec![1]);
        let d = diamond(80.0);
        assert_eq!(ready(&d, &[true, false, false, false]), vec![1, 2]);
        assert_eq!(ready(&d, &[true, true, false, false]), vec![2]);
        assert_eq!(ready(&d, &[true, true, true, true]), Vec::<usize>::new());
    }

    #[test]
    fn ready_order_prefers_reward_then_deadline() {
        let d = diamond(80.0);
        let ann = TaskAnnotations::compute(&d, 0.0, 1.0);
        let completed = [true, false, false, false];
        let claimed = [false; 4];
        let views = [ReadyView {
            index: 3,
            workflow: &d,
            annotations: &ann,
            completed: &completed,
            claimed: &claimed,
        }];
        let got = ready_tasks(&views);
        // B (200 MI) carries more reward than C (50 MI).
        assert_eq!(
            got,
            vec![
                TaskRef {
                    workflow: 3,
                    task: 1
                },
                TaskRef {
                    workflow: 3,
                    task: 2
                }
            ]
        );
    }
}
