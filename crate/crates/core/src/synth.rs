//! Seeded synthetic workloads and spot traces.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pricing::{SpotSample, SpotTrace, VmTypeSpec};
use crate::workflow::{critical_path_mi, Task, Workflow};
use crate::HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DagShape {
    Chain,
    ForkJoin,
    LayeredRandom,
    MontageLike,
    /// Each workflow takes one of the other shapes at random.
    Mixed,
}

impl DagShape {
    pub const ALL: [DagShape; 5] = [
        DagShape::Chain,
        DagShape::ForkJoin,
        DagShape::LayeredRandom,
        DagShape::MontageLike,
        DagShape::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DagShape::Chain => "chain",
            DagShape::ForkJoin => "fork-join",
            DagShape::LayeredRandom => "layered-random",
            DagShape::MontageLike => "montage-like",
            DagShape::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }
}

impl fmt::Display for DagShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Arrivals are uniform over `[0, window)` seconds.
    pub window: f64,
    pub min_tasks: usize,
    pub max_tasks: usize,
    /// Uniform range of task lengths in MI.
    pub length_mi: (f64, f64),
    pub mem_choices: Vec<f64>,
    /// Cold-start work as a fraction of task length.
    pub cold_fraction: f64,
    /// Distinct task types shared by all workflows (non-montage shapes).
    pub task_types: usize,
    /// Relative deadline as a multiple of the critical-path time at `reference_cp`.
    pub deadline_factor: f64,
    /// Seconds of extra deadline per DAG level (covers batch waits).
    pub level_slack: f64,
    pub reference_cp: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            window: 20.0 * HOUR,
            min_tasks: 4,
            max_tasks: 20,
            length_mi: (2_000.0, 20_000.0),
            mem_choices: alloc::vec![1.0, 2.0, 4.0, 8.0],
            cold_fraction: 0.2,
            task_types: 6,
            deadline_factor: 2.0,
            level_slack: 300.0,
            reference_cp: 22.4,
        }
    }
}

/// Per-node task type labels plus precedence edges of one generated DAG.
struct Dag {
    types: Vec<String>,
    edges: Vec<(usize, usize)>,
}

fn chain(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (i - 1, i)).collect()
}

fn fork_join(n: usize) -> Vec<(usize, usize)> {
    let n = n.max(3);
    let sink = n - 1;
    (1..sink).flat_map(|i| [(0, i), (i, sink)]).collect()
}

fn layered<R: Rng>(n: usize, rng: &mut R) -> (Vec<usize>, Vec<(usize, usize)>) {
    let levels = rng.random_range(2..=n.clamp(2, 6));
    // Every level gets one node, the rest are spread at random.
    let mut level: Vec<usize> = (0..levels).collect();
    level.extend((levels..n).map(|_| rng.random_range(1..levels)));
    level.sort_unstable();
    let mut edges = Vec::new();
    for v in 0..n {
        if level[v] == 0 {
            continue;
        }
        let parents: Vec<usize> = (0..n).filter(|&u| level[u] + 1 == level[v]).collect();
        let k = rng.random_range(1..=parents.len().min(3));
        for &p in parents.choose_multiple(rng, k) {
            edges.push((p, v));
        }
    }
    (level, edges)
}

/// The mosaic pipeline: project, pairwise diff-fit, concat, background model,
/// background correction, table build, coaddition, shrink and render.
fn montage(n: usize) -> Dag {
    let p = (n.saturating_sub(6) / 3).max(2);
    let mut types = Vec::new();
    let mut edges = Vec::new();
    let add = |t: &str, types: &mut Vec<String>| {
        types.push(String::from(t));
        types.len() - 1
    };
    let project: Vec<usize> = (0..p).map(|_| add("mProject", &mut types)).collect();
    let diff: Vec<usize> = (0..p - 1).map(|_| add("mDiffFit", &mut types)).collect();
    for (i, &d) in diff.iter().enumerate() {
        edges.push((project[i], d));
        edges.push((project[i + 1], d));
    }
    let concat = add("mConcatFit", &mut types);
    edges.extend(diff.iter().map(|&d| (d, concat)));
    let model = add("mBgModel", &mut types);
    edges.push((concat, model));
    let background: Vec<usize> = (0..p).map(|_| add("mBackground", &mut types)).collect();
    for (i, &b) in background.iter().enumerate() {
        edges.push((model, b));
        edges.push((project[i], b));
    }
    let table = add("mImgtbl", &mut types);
    edges.extend(background.iter().map(|&b| (b, table)));
    let coadd = add("mAdd", &mut types);
    edges.push((table, coadd));
    let shrink = add("mShrink", &mut types);
    edges.push((coadd, shrink));
    let jpeg = add("mJPEG", &mut types);
    edges.push((shrink, jpeg));
    Dag { types, edges }
}

fn generate_dag<R: Rng>(shape: DagShape, n: usize, task_types: usize, rng: &mut R) -> Dag {
    let offset = rng.random_range(0..task_types.max(1));
    let by_depth = |depth: &[usize]| -> Vec<String> {
        depth
            .iter()
            .map(|d| format!("type{}", (d + offset) % task_types.max(1)))
            .collect()
    };
    match shape {
        DagShape::Chain => Dag {
            types: by_depth(&(0..n).collect::<Vec<_>>()),
            edges: chain(n),
        },
        DagShape::ForkJoin => {
            let n = n.max(3);
            let mut depth: Vec<usize> = alloc::vec![1; n];
            depth[0] = 0;
            depth[n - 1] = 2;
            Dag {
                types: by_depth(&depth),
                edges: fork_join(n),
            }
        }
        DagShape::LayeredRandom => {
            let (level, edges) = layered(n, rng);
            Dag {
                types: by_depth(&level),
                edges,
            }
        }
        DagShape::MontageLike => montage(n),
        DagShape::Mixed => {
            let pick = [
                DagShape::Chain,
                DagShape::ForkJoin,
                DagShape::LayeredRandom,
                DagShape::MontageLike,
            ];
            generate_dag(pick[rng.random_range(0..pick.len())], n, task_types, rng)
        }
    }
}

/// Relative deadline: `deadline_factor` times the critical-path runtime at the
/// reference compute power plus `level_slack` per DAG level.
pub fn synthetic_deadline(wf: &Workflow, params: &SynthParams) -> f64 {
    let levels = wf.depths().iter().copied().max().unwrap_or(0) as f64 + 1.0;
    params.deadline_factor * critical_path_mi(wf) / params.reference_cp
        + levels * params.level_slack
}

/// `n` workflows of `shape`, ids `wf0..` in arrival order.
pub fn generate_synthetic(
    n: usize,
    shape: DagShape,
    params: &SynthParams,
    seed: u64,
) -> Vec<Workflow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Workflow> = Vec::with_capacity(n);
    for _ in 0..n {
        let size = rng.random_range(params.min_tasks..=params.max_tasks.max(params.min_tasks));
        let dag = generate_dag(shape, size, params.task_types, &mut rng);
        let tasks: Vec<Task> = dag
            .types
            .iter()
            .enumerate()
            .map(|(i, ty)| {
                let len = rng.random_range(params.length_mi.0..=params.length_mi.1);
                let mem = *params.mem_choices.choose(&mut rng).unwrap_or(&1.0);
                Task::new(
                    format!("t{i}"),
                    ty.clone(),
                    len,
                    mem,
                    params.cold_fraction * len,
                )
            })
            .collect();
        let arrival = rng.random_range(0.0..params.window);
        // Provisional window; replaced once the critical path is known.
        let wf = Workflow::new("", tasks, dag.edges, arrival, arrival + 1.0)
            .expect("generated DAG is valid");
        let d_rel = synthetic_deadline(&wf, params);
        out.push(
            wf.with_window(arrival, arrival + d_rel)
                .expect("deadline after arrival"),
        );
    }
    out.sort_by(|a, b| a.arrival().total_cmp(&b.arrival()));
    out.into_iter()
        .enumerate()
        .map(|(i, wf)| wf.renamed(format!("wf{i}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotParams {
    /// Trace length in seconds.
    pub horizon: f64,
    /// Seconds between samples.
    pub step: f64,
    /// Probability that a sample is available.
    pub density: f64,
    /// Spot prices lie in `[price_lo, price_hi]` times the reserved price.
    pub price_lo: f64,
    pub price_hi: f64,
    /// Per-sample probability of a new price.
    pub change_prob: f64,
}

impl Default for SpotParams {
    fn default() -> Self {
        SpotParams {
            horizon: 30.0 * HOUR,
            step: 60.0,
            density: 0.2,
            price_lo: 0.35,
            price_hi: 0.8,
            change_prob: 0.01,
        }
    }
}

/// A spot trace for every catalog type. Availability draws and prices come
/// from separate streams, so for a fixed seed the available samples at a
/// lower density are a subset of those at a higher one, and prices do not
/// depend on the density or on on-demand prices.
pub fn synthetic_spot_trace(catalog: &[VmTypeSpec], params: &SpotParams, seed: u64) -> SpotTrace {
    let samples = libm::ceil(params.horizon / params.step) as usize + 1;
    let series = catalog
        .iter()
        .enumerate()
        .map(|(ty, spec)| {
            let mut avail = ChaCha8Rng::seed_from_u64(seed);
            avail.set_stream(2 * ty as u64);
            let mut price_rng = ChaCha8Rng::seed_from_u64(seed);
            price_rng.set_stream(2 * ty as u64 + 1);
            let draw = |r: &mut ChaCha8Rng| {
                spec.price_reserved * r.random_range(params.price_lo..=params.price_hi)
            };
            let mut price = draw(&mut price_rng);
            (0..samples)
                .map(|i| {
                    if i > 0 && price_rng.random_bool(params.change_prob) {
                        price = draw(&mut price_rng);
                    }
                    let u: f64 = avail.random();
                    SpotSample {
                        time: i as f64 * params.step,
                        price,
                        available: u < params.density,
                    }
                })
                .collect()
        })
        .collect();
    let names: Vec<&str> = catalog.iter().map(|s| s.name.as_str()).collect();
    SpotTrace::new(series, &names).expect("generated trace is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::default_catalog;

    #[test]
    fn zero_workflows() {
        assert!(generate_synthetic(0, DagShape::Mixed, &SynthParams::default(), 1).is_empty());
    }

    #[test]
    fn chain_structure() {
        let params = SynthParams {
            min_tasks: 7,
            max_tasks: 7,
            ..SynthParams::default()
        };
        let wfs = generate_synthetic(3, DagShape::Chain, &params, 4);
        for wf in &wfs {
            assert_eq!(wf.edges().len(), 6);
            assert_eq!(wf.depths().iter().max(), Some(&6));
        }
    }

    #[test]
    fn arrivals_sorted_within_window() {
        let p = SynthParams::default();
        let wfs = generate_synthetic(50, DagShape::Mixed, &p, 8);
        assert!(wfs.windows(2).all(|w| w[0].arrival() <= w[1].arrival()));
        assert!(wfs
            .iter()
            .all(|w| w.arrival() >= 0.0 && w.arrival() < p.window));
        assert_eq!(wfs[0].id(), "wf0");
    }

    #[test]
    fn cold_start_is_a_fifth() {
        let wfs = generate_synthetic(5, DagShape::LayeredRandom, &SynthParams::default(), 2);
        for t in wfs.iter().flat_map(|w| w.tasks()) {
            assert!((t.cold_start_mi - 0.2 * t.length_mi).abs() < 1e-9);
        }
    }

    #[test]
    fn montage_levels() {
        let wf = generate_synthetic(1, DagShape::MontageLike, &SynthParams::default(), 5).remove(0);
        assert_eq!(wf.tasks().last().unwrap().task_type, "mJPEG");
        assert!(wf.roots().all(|r| wf.task(r).task_type == "mProject"));
    }

    #[test]
    fn same_seed_same_workload() {
        let p = SynthParams::default();
        assert_eq!(
            generate_synthetic(20, DagShape::Mixed, &p, 11),
            generate_synthetic(20, DagShape::Mixed, &p, 11)
        );
    }

    #[test]
    fn density_nests_and_prices_stay_below_reserved() {
        let cat = default_catalog();
        let lo = synthetic_spot_trace(
            &cat,
            &SpotParams {
                density: 0.1,
                ..SpotParams::default()
            },
            3,
        );
        let hi = synthetic_spot_trace(
            &cat,
            &SpotParams {
                density: 0.2,
                ..SpotParams::default()
            },
            3,
        );
        let full = synthetic_spot_trace(
            &cat,
            &SpotParams {
                density: 1.0,
                ..SpotParams::default()
            },
            3,
        );
        for (ty, spec) in cat.iter().enumerate() {
            for ((a, b), c) in lo.series(ty).iter().zip(hi.series(ty)).zip(full.series(ty)) {
                assert!(!a.available || b.available);
                assert!(c.available);
                assert_eq!((a.price, a.price), (b.price, c.price));
                assert!(a.price < spec.price_reserved);
            }
        }
        let share =
            lo.series(0).iter().filter(|s| s.available).count() as f64 / lo.series(0).len() as f64;
        assert!((share - 0.1).abs() < 0.03, "{share}");
    }
}
