use std::io::Write;

use serde::Serialize;

use super::{Cluster, Strategy, WorkerTrace};
use crate::error::{Error, Result};
use crate::matdot::DecodePath;
use crate::mrpt::{recall, Neighbors};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryRecord {
    pub query_id: usize,
    pub latency: f64,
    pub recall: f64,
    pub candidate_size: usize,
    pub neighbors: Vec<usize>,
    pub decode_path: Option<DecodePath>,
    pub trace: Vec<WorkerTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub strategy: Strategy,
    pub queries: usize,
    pub mean_latency: f64,
    /// Sample standard deviation (`n − 1`); zero below two queries.
    pub std_latency: f64,
    pub mean_recall: f64,
    pub mean_candidate_size: f64,
    pub records: Vec<QueryRecord>,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `queries` sequentially (query ids `0..`) and aggregates latency and
/// recall against `truth`. Data-parallel workers are charged their mean
/// local candidate count over the whole query set.
pub fn run_experiment<T: Real>(
    cluster: &Cluster<T>,
    queries: &[Vec<T>],
    truth: &[Neighbors<T>],
) -> Result<ExperimentSummary> {
    if truth.len() != queries.len() {
        return Err(Error::InvalidParameter(format!(
            "{} queries but {} ground-truth lists",
            queries.len(),
            truth.len()
        )));
    }
    let k = cluster.config().k;

    let dp_load = if cluster.config().strategy == Strategy::DataParallel && !queries.is_empty() {
        let mut sums = vec![0usize; cluster.config().workers];
        for q in queries {
            for (s, c) in sums.iter_mut().zip(cluster.local_candidate_sizes(q)?) {
                *s += c;
            }
        }
        let n = queries.len() as f64;
        Some(sums.into_iter().map(|s| (s as f64 / n).round() as usize).collect::<Vec<_>>())
    } else {
        None
    };

    let mut records = Vec::with_capacity(queries.len());
    for (i, (q, t)) in queries.iter().zip(truth).enumerate() {
        let out = cluster.run_query_with(i as u64, q, dp_load.as_deref())?;
        records.push(QueryRecord {
            query_id: i,
            latency: out.latency,
            recall: recall(&out.neighbors, t, k)?,
            candidate_size: out.candidate_size,
            neighbors: out.neighbors.indices(),
            decode_path: out.decode_path,
            trace: out.trace,
        });
    }

    let latencies: Vec<f64> = records.iter().map(|r| r.latency).collect();
    let (mean_latency, std_latency) = mean_std(&latencies);
    let n = records.len().max(1) as f64;
    Ok(ExperimentSummary {
        strategy: cluster.config().strategy,
        queries: records.len(),
        mean_latency,
        std_latency,
        mean_recall: records.iter().map(|r| r.recall).sum::<f64>() / n,
        mean_candidate_size: records.iter().map(|r| r.candidate_size as f64).sum::<f64>() / n,
        records,
    })
}

/// One JSON-lines trace row per (query, worker).
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct TraceRecord {
    pub query_id: usize,
    pub worker_id: usize,
    pub strategy: String,
    pub l: usize,
    pub sampled_t: f64,
    pub completion_t: f64,
    pub used: bool,
}

pub fn write_trace_jsonl<W: Write>(out: &mut W, summary: &ExperimentSummary) -> Result<()> {
    for r in &summary.records {
        for t in &r.trace {
            let row = TraceRecord {
                query_id: r.query_id,
                worker_id: t.worker_id,
                strategy: summary.strategy.name().to_string(),
                l: t.l,
                sampled_t: t.sampled_t,
                completion_t: t.completion_t,
                used: t.used,
            };
            serde_json::to_writer(&mut *out, &row).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
