//! Master/worker query engine over a virtual clock.
//!
//! Every query dispatches at virtual time zero. Worker `i` completes at its
//! sampled minimum time `T_i` (optionally floored by measured compute), and
//! the master finishes when the strategy's collection rule is satisfied:
//!
//! * `data_parallel`, `mp_uncoded`: all `P` workers;
//! * `mp_matdot`: the `(2m−1)`-th arrival;
//! * `mp_systematic`: the earlier of all `m` systematic arrivals and the
//!   `(2m−1)`-th arrival.
//!
//! Straggler draws depend only on `(straggler seed, query id, worker id)`, so
//! latencies do not depend on thread scheduling.

mod experiment;
mod straggler;
mod worker;

pub use experiment::{run_experiment, write_trace_jsonl, ExperimentSummary, QueryRecord, TraceRecord};
pub use straggler::{sample_min_time, StragglerModel};
pub use worker::{ExecutionMode, Payload, Reply, Request, Response, Worker, WorkerState};

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean_dist_via_dot, ColumnSplit, Dataset};
use crate::matdot::{self, BetaScheme, CodeConfig, CodedResult, DecodeOptions, DecodePath};
use crate::mrpt::{IndexParams, MrptIndex, Neighbors};
use crate::rng::RngSeed;
use crate::scalar::{norm, Real};
use worker::Transport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Single,
    DataParallel,
    MpUncoded,
    MpMatdot,
    MpSystematic,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Single,
        Strategy::DataParallel,
        Strategy::MpUncoded,
        Strategy::MpMatdot,
        Strategy::MpSystematic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Single => "single",
            Strategy::DataParallel => "data_parallel",
            Strategy::MpUncoded => "mp_uncoded",
            Strategy::MpMatdot => "mp_matdot",
            Strategy::MpSystematic => "mp_systematic",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn is_coded(self) -> bool {
        matches!(self, Strategy::MpMatdot | Strategy::MpSystematic)
    }

    pub fn is_model_parallel(self) -> bool {
        matches!(self, Strategy::MpUncoded | Strategy::MpMatdot | Strategy::MpSystematic)
    }
}

/// How a worker's virtual completion time is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TimingMode {
    /// Completion time is the sampled `T_i` alone.
    #[default]
    Simulated,
    /// Completion is `max(T_i, scale × measured compute seconds)`.
    MeasuredCompute { scale: f64 },
}

/// Virtual time charged for the master's decode/merge step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MasterCost {
    #[default]
    Ignore,
    /// Measured wall seconds multiplied by `scale`.
    Measured { scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub strategy: Strategy,
    /// Worker count `P`.
    pub workers: usize,
    pub k: usize,
    /// Voting threshold `ν`, shared by the master and every worker.
    pub vote_threshold: usize,
    /// Per-worker neighbor count `τ ≥ k` (data-parallel).
    pub tau: usize,
    pub index: IndexParams,
    /// Index parameters of each data-parallel worker; defaults to `index`.
    pub local_index: Option<IndexParams>,
    /// Partition count `m` (coded strategies).
    pub m: usize,
    pub betas: BetaScheme,
    pub straggler: StragglerModel,
    pub index_seed: RngSeed,
    pub straggler_seed: RngSeed,
    /// Virtual seconds after which a query fails.
    pub timeout: f64,
    /// Fixed extra delay per worker; `f64::INFINITY` models a worker that
    /// never answers. Empty means no extra delay.
    pub extra_delay: Vec<f64>,
    pub execution: ExecutionMode,
    pub timing: TimingMode,
    pub master_cost: MasterCost,
    pub decode: DecodeSettings,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeSettings {
    pub max_condition: f64,
}

impl Default for DecodeSettings {
    fn default() -> Self {
        Self {
            max_condition: DecodeOptions::default().max_condition,
        }
    }
}

impl ClusterConfig {
    pub fn new(strategy: Strategy, workers: usize, index: IndexParams, vote_threshold: usize, k: usize) -> Self {
        Self {
            strategy,
            workers,
            k,
            vote_threshold,
            tau: k,
            index,
            local_index: None,
            m: 3,
            betas: BetaScheme::Chebyshev,
            straggler: StragglerModel::None,
            index_seed: RngSeed(0),
            straggler_seed: RngSeed(1),
            timeout: f64::INFINITY,
            extra_delay: Vec::new(),
            execution: ExecutionMode::Threaded,
            timing: TimingMode::Simulated,
            master_cost: MasterCost::Ignore,
            decode: DecodeSettings::default(),
        }
    }

    /// Checks every precondition that does not need the data itself
    /// beyond its shape.
    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k == 0 {
            return bad("k must be ≥ 1".into());
        }
        if self.workers == 0 && self.strategy != Strategy::Single {
            return bad("worker count must be ≥ 1".into());
        }
        if self.vote_threshold == 0 {
            return bad("vote threshold must be ≥ 1".into());
        }
        if self.timeout.is_nan() || self.timeout <= 0.0 {
            return bad(format!("timeout must be positive, got {}", self.timeout));
        }
        if !self.extra_delay.is_empty() && self.extra_delay.len() != self.workers {
            return bad(format!(
                "extra_delay has {} entries for {} workers",
                self.extra_delay.len(),
                self.workers
            ));
        }
        if self.extra_delay.iter().any(|&x| x.is_nan() || x < 0.0) {
            return bad("extra delays must be ≥ 0".into());
        }
        self.straggler.validate()?;
        match self.strategy {
            Strategy::Single => {}
            Strategy::DataParallel => {
                if self.tau < self.k {
                    return bad(format!("tau {} must be ≥ k {}", self.tau, self.k));
                }
                if self.workers > n {
                    return bad(format!("{} workers for {n} points", self.workers));
                }
                let smallest = n / self.workers;
                self.local_params().validate(smallest)?;
                if self.vote_threshold > self.local_params().trees {
                    return bad("vote threshold exceeds local tree count".into());
                }
            }
            Strategy::MpUncoded => {
                if self.workers > d {
                    return bad(format!("cannot split {d} dimensions across {} workers", self.workers));
                }
            }
            Strategy::MpMatdot | Strategy::MpSystematic => {
                if self.m == 0 || self.m > d {
                    return bad(format!("partition count m = {} invalid for d = {d}", self.m));
                }
                if self.workers < 2 * self.m - 1 {
                    return bad(format!(
                        "{} workers below recovery threshold {}",
                        self.workers,
                        2 * self.m - 1
                    ));
                }
            }
        }
        if self.strategy != Strategy::DataParallel {
            self.index.validate(n)?;
            if self.vote_threshold > self.index.trees {
                return bad("vote threshold exceeds tree count".into());
            }
        }
        Ok(())
    }

    fn local_params(&self) -> IndexParams {
        self.local_index.unwrap_or(self.index)
    }

    fn code_config<T: Real>(&self) -> Result<CodeConfig<T>> {
        match self.strategy {
            Strategy::MpMatdot => CodeConfig::matdot(self.m, self.workers, self.betas),
            Strategy::MpSystematic => CodeConfig::systematic(self.m, self.workers, self.betas),
            _ => Err(Error::Configuration("strategy has no code".into())),
        }
    }
}

/// Per-worker timing of one query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkerTrace {
    pub worker_id: usize,
    pub dispatch_t: f64,
    /// Rows the worker was charged for.
    pub l: usize,
    pub sampled_t: f64,
    pub completion_t: f64,
    pub used: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryOutcome<T> {
    pub neighbors: Neighbors<T>,
    /// Virtual seconds until the master holds the answer.
    pub latency: f64,
    /// Candidate count `|S|` (data-parallel: summed over workers).
    pub candidate_size: usize,
    pub decode_path: Option<DecodePath>,
    pub trace: Vec<WorkerTrace>,
}

pub struct Cluster<T: Real> {
    config: ClusterConfig,
    data: Arc<Dataset<T>>,
    global: Option<MrptIndex<T>>,
    code: Option<CodeConfig<T>>,
    split: Option<ColumnSplit>,
    transport: Option<Transport<T>>,
}

impl<T: Real> Cluster<T> {
    /// Builds indexes and worker payloads for `config.strategy`.
    pub fn new(data: Arc<Dataset<T>>, config: ClusterConfig) -> Result<Self> {
        config.validate(data.len(), data.dim())?;
        let mut global = None;
        let mut code = None;
        let mut split = None;
        let mut workers: Vec<Arc<dyn Worker<T>>> = Vec::new();

        match config.strategy {
            Strategy::Single => {
                global = Some(MrptIndex::build(data.clone(), config.index, config.index_seed)?);
            }
            Strategy::DataParallel => {
                let parts = ColumnSplit::new(data.len(), config.workers)?;
                for (i, range) in parts.ranges().enumerate() {
                    let ids: Vec<usize> = range.collect();
                    let slice = Arc::new(data.subset(&ids)?);
                    let index = MrptIndex::build(slice, config.local_params(), config.index_seed.child(i as u64))?;
                    workers.push(Arc::new(WorkerState {
                        id: i,
                        payload: Payload::LocalIndex { index, global_ids: ids },
                    }));
                }
            }
            Strategy::MpUncoded => {
                global = Some(MrptIndex::build(data.clone(), config.index, config.index_seed)?);
                let cols = ColumnSplit::new(data.dim(), config.workers)?;
                for (i, range) in cols.ranges().enumerate() {
                    workers.push(Arc::new(WorkerState {
                        id: i,
                        payload: Payload::UncodedBlock(data.transposed().column_block(range)),
                    }));
                }
                split = Some(cols);
            }
            Strategy::MpMatdot | Strategy::MpSystematic => {
                global = Some(MrptIndex::build(data.clone(), config.index, config.index_seed)?);
                let cfg = config.code_config::<T>()?;
                for shard in matdot::encode_data(data.transposed(), &cfg)? {
                    workers.push(Arc::new(WorkerState {
                        id: shard.worker_id,
                        payload: Payload::Encoded(shard),
                    }));
                }
                code = Some(cfg);
            }
        }

        let transport = (!workers.is_empty()).then(|| Transport::new(workers, config.execution));
        Ok(Self {
            config,
            data,
            global,
            code,
            split,
            transport,
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn data(&self) -> &Arc<Dataset<T>> {
        &self.data
    }

    /// The master's index (absent for data-parallel clusters).
    pub fn global_index(&self) -> Option<&MrptIndex<T>> {
        self.global.as_ref()
    }

    pub fn code(&self) -> Option<&CodeConfig<T>> {
        self.code.as_ref()
    }

    /// Redraws all future straggler samples from `seed`.
    pub fn reseed_stragglers(&mut self, seed: RngSeed) {
        self.config.straggler_seed = seed;
    }

    pub fn run_query(&self, q: &[T]) -> Result<QueryOutcome<T>> {
        self.run_query_with(0, q, None)
    }

    /// Runs query `query_id`. `dp_load` overrides the per-worker row count
    /// charged to data-parallel workers.
    pub fn run_query_with(&self, query_id: u64, q: &[T], dp_load: Option<&[usize]>) -> Result<QueryOutcome<T>> {
        self.data.check_query(q)?;
        match self.config.strategy {
            Strategy::Single => self.query_single(query_id, q),
            Strategy::DataParallel => self.query_data_parallel(query_id, q, dp_load),
            _ => self.query_model_parallel(query_id, q),
        }
    }

    /// Local candidate-set sizes per data-parallel worker for `q`.
    pub fn local_candidate_sizes(&self, q: &[T]) -> Result<Vec<usize>> {
        let replies = self.transport()?.scatter_gather(self.local_knn_requests(q))?;
        replies
            .into_iter()
            .map(|r| match r.response? {
                Response::Neighbors { candidates, .. } => Ok(candidates),
                Response::Product(_) => Err(Error::Configuration("unexpected product reply".into())),
            })
            .collect()
    }

    fn transport(&self) -> Result<&Transport<T>> {
        self.transport
            .as_ref()
            .ok_or_else(|| Error::Configuration("cluster has no workers".into()))
    }

    fn global(&self) -> Result<&MrptIndex<T>> {
        self.global
            .as_ref()
            .ok_or_else(|| Error::Configuration("strategy has no master index".into()))
    }

    fn sampled_time(&self, query_id: u64, worker: usize, l: usize) -> Result<f64> {
        let mut rng = self.config.straggler_seed.child(query_id).stream(worker as u64);
        let u: f64 = rng.random();
        let t = sample_min_time(&self.config.straggler, l.max(1), u)?;
        Ok(t + self.config.extra_delay.get(worker).copied().unwrap_or(0.0))
    }

    fn completion(&self, sampled: f64, elapsed_secs: f64) -> f64 {
        match self.config.timing {
            TimingMode::Simulated => sampled,
            TimingMode::MeasuredCompute { scale } => sampled.max(elapsed_secs * scale),
        }
    }

    fn master_time(&self, started: Instant) -> f64 {
        match self.config.master_cost {
            MasterCost::Ignore => 0.0,
            MasterCost::Measured { scale } => started.elapsed().as_secs_f64() * scale,
        }
    }

    fn check_deadline(&self, needed: f64) -> Result<()> {
        if !needed.is_finite() || needed > self.config.timeout {
            return Err(Error::Timeout {
                needed,
                timeout: self.config.timeout,
            });
        }
        Ok(())
    }

    fn query_single(&self, query_id: u64, q: &[T]) -> Result<QueryOutcome<T>> {
        let index = self.global()?;
        let start = Instant::now();
        let s = index.candidate_set(q, self.config.vote_threshold)?;
        let neighbors = crate::mrpt::exact_knn(&self.data, q, self.config.k, &s.indices)?;
        let elapsed = start.elapsed().as_secs_f64();
        let sampled = self.sampled_time(query_id, 0, s.len())?;
        let completion = self.completion(sampled, elapsed);
        self.check_deadline(completion)?;
        Ok(QueryOutcome {
            neighbors,
            latency: completion,
            candidate_size: s.len(),
            decode_path: None,
            trace: vec![WorkerTrace {
                worker_id: 0,
                dispatch_t: 0.0,
                l: s.len(),
                sampled_t: sampled,
                completion_t: completion,
                used: true,
            }],
        })
    }

    fn local_knn_requests(&self, q: &[T]) -> Vec<Request<T>> {
        let query = Arc::new(q.to_vec());
        (0..self.config.workers)
            .map(|_| Request::LocalKnn {
                query: query.clone(),
                tau: self.config.tau,
                vote_threshold: self.config.vote_threshold,
            })
            .collect()
    }

    fn query_data_parallel(&self, query_id: u64, q: &[T], dp_load: Option<&[usize]>) -> Result<QueryOutcome<T>> {
        let replies = self.transport()?.scatter_gather(self.local_knn_requests(q))?;
        let mut trace = Vec::with_capacity(replies.len());
        let mut merged = Vec::with_capacity(self.config.workers * self.config.tau);
        let mut total_candidates = 0;
        for reply in replies {
            let Response::Neighbors { entries, candidates } = reply.response? else {
                return Err(Error::Configuration("data-parallel worker returned a product".into()));
            };
            let l = dp_load.and_then(|v| v.get(reply.worker_id).copied()).unwrap_or(candidates);
            let sampled = self.sampled_time(query_id, reply.worker_id, l)?;
            trace.push(WorkerTrace {
                worker_id: reply.worker_id,
                dispatch_t: 0.0,
                l,
                sampled_t: sampled,
                completion_t: self.completion(sampled, reply.elapsed_secs),
                used: true,
            });
            total_candidates += candidates;
            merged.extend(entries);
        }
        let needed = trace.iter().map(|t| t.completion_t).fold(0.0, f64::max);
        self.check_deadline(needed)?;
        let start = Instant::now();
        let neighbors = Neighbors::from_candidates(merged, self.config.k);
        Ok(QueryOutcome {
            neighbors,
            latency: needed + self.master_time(start),
            candidate_size: total_candidates,
            decode_path: None,
            trace,
        })
    }

    fn query_model_parallel(&self, query_id: u64, q: &[T]) -> Result<QueryOutcome<T>> {
        let s = self.global()?.candidate_set(q, self.config.vote_threshold)?;
        let rows = Arc::new(s.indices);
        let l = rows.len();

        let vectors: Vec<Vec<T>> = match self.config.strategy {
            Strategy::MpUncoded => {
                let split = self.split.as_ref().expect("uncoded cluster has a split");
                split.ranges().map(|r| q[r].to_vec()).collect()
            }
            _ => {
                let code = self.code.as_ref().expect("coded cluster has a code");
                matdot::encode_query(q, code)?.into_iter().map(|s| s.vector).collect()
            }
        };
        let requests = vectors
            .into_iter()
            .map(|vector| Request::Product {
                rows: rows.clone(),
                vector,
            })
            .collect();
        let replies = self.transport()?.scatter_gather(requests)?;

        let mut trace = Vec::with_capacity(replies.len());
        let mut products = Vec::with_capacity(replies.len());
        for reply in replies {
            let Response::Product(values) = reply.response? else {
                return Err(Error::Configuration("model-parallel worker returned neighbors".into()));
            };
            let sampled = self.sampled_time(query_id, reply.worker_id, l)?;
            trace.push(WorkerTrace {
                worker_id: reply.worker_id,
                dispatch_t: 0.0,
                l,
                sampled_t: sampled,
                completion_t: self.completion(sampled, reply.elapsed_secs),
                used: false,
            });
            products.push(values);
        }

        // arrival order on the virtual clock, ties by worker id
        let mut arrival: Vec<usize> = (0..trace.len()).collect();
        arrival.sort_by(|&a, &b| trace[a].completion_t.total_cmp(&trace[b].completion_t).then(a.cmp(&b)));

        let (needed, w, path) = match self.config.strategy {
            Strategy::MpUncoded => {
                let needed = trace.iter().map(|t| t.completion_t).fold(0.0, f64::max);
                self.check_deadline(needed)?;
                let start = Instant::now();
                let mut w = vec![T::zero(); l];
                for p in &products {
                    for (acc, &x) in w.iter_mut().zip(p) {
                        *acc = *acc + x;
                    }
                }
                trace.iter_mut().for_each(|t| t.used = true);
                (needed + self.master_time(start), w, None)
            }
            _ => {
                let code = self.code.as_ref().expect("coded cluster has a code");
                let m = code.m();
                let kth = trace[arrival[code.recovery_threshold() - 1]].completion_t;
                let needed = if code.is_systematic() {
                    let sys = (0..m).map(|i| trace[i].completion_t).fold(0.0, f64::max);
                    sys.min(kth)
                } else {
                    kth
                };
                self.check_deadline(needed)?;
                let start = Instant::now();
                let results: Vec<CodedResult<T>> = arrival
                    .iter()
                    .take_while(|&&i| trace[i].completion_t <= needed)
                    .map(|&i| CodedResult {
                        worker_id: i,
                        beta: code.betas()[i],
                        values: std::mem::take(&mut products[i]),
                    })
                    .collect();
                let opts = DecodeOptions {
                    max_condition: self.config.decode.max_condition,
                    ..DecodeOptions::default()
                };
                let decoded = matdot::decode_with(&results, code, l, &opts)?;
                for &i in &decoded.used_workers {
                    trace[i].used = true;
                }
                (needed + self.master_time(start), decoded.values, Some(decoded.path))
            }
        };

        let q_norm = norm(q);
        let cands = rows
            .iter()
            .zip(&w)
            .map(|(&j, &dot)| Ok((j, euclidean_dist_via_dot(self.data.norm(j), q_norm, dot)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(QueryOutcome {
            neighbors: Neighbors::from_candidates(cands, self.config.k),
            latency: needed,
            candidate_size: l,
            decode_path: path,
            trace,
        })
    }
}
