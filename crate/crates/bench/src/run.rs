use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use coded_mrpt::cluster::{run_experiment, write_trace_jsonl, Cluster, ExperimentSummary, Strategy};
use coded_mrpt::{Dataset, Neighbors};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};
use crate::io::{load_csv, load_fvecs};
use crate::spec::{DataSource, ExperimentSpec};
use crate::synth::Generator;
use crate::truth::ground_truth;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub mean_latency: f64,
    pub std_latency: f64,
    pub mean_recall: f64,
    pub mean_candidate_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub name: String,
    /// Over every query of every run.
    pub mean_latency: f64,
    pub std_latency: f64,
    pub mean_recall: f64,
    pub mean_candidate_size: f64,
    pub runs: Vec<RunRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub spec_hash: String,
    pub strategies: Vec<StrategySummary>,
}

/// Persisted per-query answer, enough to recompute recall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryOutput {
    pub strategy: String,
    pub run: usize,
    pub query_id: usize,
    pub neighbors: Vec<usize>,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub query_id: usize,
    pub neighbors: Vec<usize>,
}

/// Loaded data, queries and exact answers.
pub struct Workload {
    pub data: Arc<Dataset<f64>>,
    pub queries: Vec<Vec<f64>>,
    pub truth: Vec<Neighbors<f64>>,
}

pub struct Outcome {
    pub summary: RunSummary,
    pub experiments: Vec<(Strategy, Vec<ExperimentSummary>)>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Reads or generates the dataset and picks the queries.
pub fn load_workload(spec: &ExperimentSpec) -> BenchResult<(Dataset<f64>, Vec<Vec<f64>>)> {
    let ds = &spec.dataset;
    let seeds = spec.seeds();
    let (data, held_out) = match ds.source {
        DataSource::Synthetic => {
            let g = Generator::new(ds.d, ds.synthetic_kind(), seeds.data).map_err(|e| BenchError::data("generate", e))?;
            let data = Dataset::from_points(&g.points(ds.n, 1)).map_err(|e| BenchError::data("generate", e))?;
            let queries = if spec.in_dataset { Vec::new() } else { g.points(spec.queries, 2) };
            (data, Some(queries))
        }
        DataSource::Fvecs | DataSource::Csv => {
            let path = ds.path.as_deref().expect("validated");
            let load = |p: &Path| match ds.source {
                DataSource::Csv => load_csv(p),
                _ => load_fvecs(p),
            };
            let mut data = load(path).map_err(|e| BenchError::data("load dataset", e))?;
            let queries = match &ds.queries_path {
                Some(qp) => {
                    let qs = load(qp).map_err(|e| BenchError::data("load queries", e))?;
                    if qs.dim() != data.dim() {
                        return Err(BenchError::data(
                            "load queries",
                            format!("query dimension {} differs from data dimension {}", qs.dim(), data.dim()),
                        ));
                    }
                    let take = spec.queries.min(qs.len());
                    Some((0..take).map(|j| qs.point(j).to_vec()).collect())
                }
                None if spec.in_dataset => None,
                None => {
                    // hold out the file's last records
                    if spec.queries >= data.len() {
                        return Err(BenchError::data(
                            "split queries",
                            format!("cannot hold out {} of {} points", spec.queries, data.len()),
                        ));
                    }
                    let keep = data.len() - spec.queries;
                    let queries = (keep..data.len()).map(|j| data.point(j).to_vec()).collect();
                    data = data
                        .subset(&(0..keep).collect::<Vec<_>>())
                        .map_err(|e| BenchError::data("split queries", e))?;
                    Some(queries)
                }
            };
            (data, queries)
        }
    };
    let queries = match held_out {
        Some(q) if !spec.in_dataset => q,
        _ => {
            if spec.queries > data.len() {
                return Err(BenchError::Config(format!(
                    "{} in-dataset queries from {} points",
                    spec.queries,
                    data.len()
                )));
            }
            let mut ids = sample(&mut seeds.query_pick.rng(), data.len(), spec.queries).into_vec();
            ids.sort_unstable();
            ids.into_iter().map(|j| data.point(j).to_vec()).collect()
        }
    };
    Ok((data, queries))
}

/// Validates, loads and computes ground truth. No index is built here.
pub fn prepare(spec: &ExperimentSpec) -> BenchResult<Workload> {
    spec.validate()?;
    let (data, queries) = load_workload(spec)?;
    spec.validate_for(data.len(), data.dim(), queries.len())?;
    let truth = ground_truth(&data, &queries, spec.k).map_err(|e| BenchError::runtime("ground truth", e))?;
    Ok(Workload {
        data: Arc::new(data),
        queries,
        truth,
    })
}

/// Runs every strategy for `spec.runs` straggler draws.
pub fn execute(spec: &ExperimentSpec, w: &Workload) -> BenchResult<Outcome> {
    let mut strategies = Vec::new();
    let mut experiments = Vec::new();
    for &strategy in &spec.strategies {
        let cfg = spec.cluster_config(strategy, w.data.dim())?;
        let mut cluster = Cluster::new(w.data.clone(), cfg).map_err(|e| BenchError::runtime("index build", e))?;
        let mut runs = Vec::with_capacity(spec.runs);
        for r in 0..spec.runs {
            cluster.reseed_stragglers(spec.seeds().straggler.child(r as u64));
            let s = run_experiment(&cluster, &w.queries, &w.truth)
                .map_err(|e| BenchError::runtime("query", format!("{}: {e}", strategy.name())))?;
            runs.push(s);
        }
        let all: Vec<f64> = runs.iter().flat_map(|s| s.records.iter().map(|r| r.latency)).collect();
        let (mean_latency, std_latency) = mean_std(&all);
        strategies.push(StrategySummary {
            name: strategy.name().to_string(),
            mean_latency,
            std_latency,
            mean_recall: mean(runs.iter().flat_map(|s| s.records.iter().map(|r| r.recall))),
            mean_candidate_size: mean(runs.iter().flat_map(|s| s.records.iter().map(|r| r.candidate_size as f64))),
            runs: runs
                .iter()
                .enumerate()
                .map(|(run, s)| RunRow {
                    run,
                    mean_latency: s.mean_latency,
                    std_latency: s.std_latency,
                    mean_recall: s.mean_recall,
                    mean_candidate_size: s.mean_candidate_size,
                })
                .collect(),
        });
        experiments.push((strategy, runs));
    }
    Ok(Outcome {
        summary: RunSummary {
            spec_hash: spec.hash(),
            strategies,
        },
        experiments,
    })
}

fn create(path: &Path) -> BenchResult<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| BenchError::runtime("write output", format!("{}: {e}", path.display())))
}

fn io_err(e: impl std::fmt::Display) -> BenchError {
    BenchError::runtime("write output", e)
}

/// Writes summary.json, summary.csv, latency.dat, truth.jsonl,
/// neighbors.jsonl, traces/<strategy>_run<r>.jsonl and spec.toml.
pub fn write_outputs(spec: &ExperimentSpec, w: &Workload, out: &Outcome, dir: &Path) -> BenchResult<()> {
    fs::create_dir_all(dir.join("traces")).map_err(io_err)?;

    let mut f = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &out.summary).map_err(io_err)?;
    writeln!(f).map_err(io_err)?;
    f.flush().map_err(io_err)?;

    let mut f = create(&dir.join("summary.csv"))?;
    writeln!(f, "strategy,run,mean_latency,std_latency,mean_recall,mean_candidate_size").map_err(io_err)?;
    for s in &out.summary.strategies {
        for r in &s.runs {
            writeln!(
                f,
                "{},{},{},{},{},{}",
                s.name, r.run, r.mean_latency, r.std_latency, r.mean_recall, r.mean_candidate_size
            )
            .map_err(io_err)?;
        }
        writeln!(
            f,
            "{},all,{},{},{},{}",
            s.name, s.mean_latency, s.std_latency, s.mean_recall, s.mean_candidate_size
        )
        .map_err(io_err)?;
    }
    f.flush().map_err(io_err)?;

    let mut f = create(&dir.join("latency.dat"))?;
    writeln!(f, "# idx strategy mean_latency std_latency mean_recall mean_candidate_size").map_err(io_err)?;
    for (i, s) in out.summary.strategies.iter().enumerate() {
        writeln!(
            f,
            "{i} {} {} {} {} {}",
            s.name, s.mean_latency, s.std_latency, s.mean_recall, s.mean_candidate_size
        )
        .map_err(io_err)?;
    }
    f.flush().map_err(io_err)?;

    let mut f = create(&dir.join("truth.jsonl"))?;
    for (i, t) in w.truth.iter().enumerate() {
        let row = TruthRow {
            query_id: i,
            neighbors: t.indices(),
        };
        serde_json::to_writer(&mut f, &row).map_err(io_err)?;
        writeln!(f).map_err(io_err)?;
    }
    f.flush().map_err(io_err)?;

    let mut nf = create(&dir.join("neighbors.jsonl"))?;
    for (strategy, runs) in &out.experiments {
        for (r, s) in runs.iter().enumerate() {
            for rec in &s.records {
                let row = QueryOutput {
                    strategy: strategy.name().to_string(),
                    run: r,
                    query_id: rec.query_id,
                    neighbors: rec.neighbors.clone(),
                    recall: rec.recall,
                };
                serde_json::to_writer(&mut nf, &row).map_err(io_err)?;
                writeln!(nf).map_err(io_err)?;
            }
            let mut tf = create(&dir.join("traces").join(format!("{}_run{r:03}.jsonl", strategy.name())))?;
            write_trace_jsonl(&mut tf, s).map_err(io_err)?;
            tf.flush().map_err(io_err)?;
        }
    }
    nf.flush().map_err(io_err)?;

    fs::write(dir.join("spec.toml"), spec.to_toml()).map_err(io_err)?;
    Ok(())
}

/// Full pipeline: validate, load, run and write to `spec.out_dir`.
pub fn run(spec: &ExperimentSpec) -> BenchResult<RunSummary> {
    let w = prepare(spec)?;
    let out = execute(spec, &w)?;
    write_outputs(spec, &w, &out, &spec.out_dir)?;
    Ok(out.summary)
}
