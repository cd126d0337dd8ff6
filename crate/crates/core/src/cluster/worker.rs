//! Worker nodes and the transport that carries requests to them.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{row_subset_matvec, DenseMatrix};
use crate::matdot::{coded_product, EncodedQueryShare, EncodedShard};
use crate::mrpt::MrptIndex;
use crate::scalar::Real;

/// A request from the master to one worker.
#[derive(Clone, Debug)]
pub enum Request<T> {
    /// Run voting and exact refinement locally; return the `tau` nearest.
    LocalKnn {
        query: Arc<Vec<T>>,
        tau: usize,
        vote_threshold: usize,
    },
    /// Multiply the stored rows `rows` by `vector`.
    Product { rows: Arc<Vec<usize>>, vector: Vec<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Response<T> {
    /// Neighbors with global point indices and the local candidate count.
    Neighbors { entries: Vec<(usize, T)>, candidates: usize },
    Product(Vec<T>),
}

/// Worker interface; a networked backend would implement this over a
/// transport instead of in memory.
pub trait Worker<T>: Send + Sync {
    fn id(&self) -> usize;
    fn handle(&self, request: &Request<T>) -> Result<Response<T>>;
}

/// What a worker stores.
#[derive(Clone, Debug)]
pub enum Payload<T> {
    /// Data-parallel slice: a local index plus the slice's global ids.
    LocalIndex { index: MrptIndex<T>, global_ids: Vec<usize> },
    /// Uncoded model-parallel column block `X_iᵀ`.
    UncodedBlock(DenseMatrix<T>),
    /// MatDot or systematic MatDot shard.
    Encoded(EncodedShard<T>),
}

impl<T> Payload<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::LocalIndex { .. } => "local_index",
            Payload::UncodedBlock(_) => "uncoded_block",
            Payload::Encoded(_) => "encoded_shard",
        }
    }
}

#[derive(Clone, Debug)]
pub struct WorkerState<T> {
    pub id: usize,
    pub payload: Payload<T>,
}

impl<T: Real> Worker<T> for WorkerState<T> {
    fn id(&self) -> usize {
        self.id
    }

    fn handle(&self, request: &Request<T>) -> Result<Response<T>> {
        match (&self.payload, request) {
            (
                Payload::LocalIndex { index, global_ids },
                Request::LocalKnn {
                    query,
                    tau,
                    vote_threshold,
                },
            ) => {
                let s = index.candidate_set(query, *vote_threshold)?;
                let local = crate::mrpt::exact_knn(index.data(), query, *tau, &s.indices)?;
                Ok(Response::Neighbors {
                    entries: local.entries.into_iter().map(|(j, d)| (global_ids[j], d)).collect(),
                    candidates: s.len(),
                })
            }
            (Payload::UncodedBlock(block), Request::Product { rows, vector }) => {
                Ok(Response::Product(row_subset_matvec(block, rows, vector)?))
            }
            (Payload::Encoded(shard), Request::Product { rows, vector }) => {
                let share = EncodedQueryShare {
                    worker_id: shard.worker_id,
                    beta: shard.beta,
                    vector: vector.clone(),
                };
                Ok(Response::Product(coded_product(shard, rows, &share)?.values))
            }
            (p, _) => Err(Error::Configuration(format!(
                "worker {} holding {} cannot serve this request",
                self.id,
                p.kind()
            ))),
        }
    }
}

/// A worker's reply with the wall time it spent computing.
pub struct Reply<T> {
    pub worker_id: usize,
    pub response: Result<Response<T>>,
    pub elapsed_secs: f64,
}

fn serve<T: Real>(worker: &dyn Worker<T>, request: &Request<T>) -> Reply<T> {
    let start = Instant::now();
    let response = worker.handle(request);
    Reply {
        worker_id: worker.id(),
        response,
        elapsed_secs: start.elapsed().as_secs_f64(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// One actor thread per worker.
    #[default]
    Threaded,
    /// Workers run one after another on the caller's thread.
    Sequential,
}

pub(crate) struct Job<T> {
    request: Request<T>,
    reply: Sender<Reply<T>>,
}

/// Broadcasts requests to workers and gathers every reply, ordered by
/// worker id. Physical arrival order never leaks into results.
pub(crate) enum Transport<T> {
    Sequential(Vec<Arc<dyn Worker<T>>>),
    Threaded {
        senders: Vec<Sender<Job<T>>>,
        handles: Vec<JoinHandle<()>>,
    },
}

impl<T: Real> Transport<T> {
    pub(crate) fn new(workers: Vec<Arc<dyn Worker<T>>>, mode: ExecutionMode) -> Self {
        match mode {
            ExecutionMode::Sequential => Transport::Sequential(workers),
            ExecutionMode::Threaded => {
                let mut senders = Vec::with_capacity(workers.len());
                let mut handles = Vec::with_capacity(workers.len());
                for w in workers {
                    let (tx, rx): (Sender<Job<T>>, Receiver<Job<T>>) = channel();
                    senders.push(tx);
                    handles.push(std::thread::spawn(move || {
                        for job in rx {
                            // the master may have given up on this query
                            let _ = job.reply.send(serve(w.as_ref(), &job.request));
                        }
                    }));
                }
                Transport::Threaded { senders, handles }
            }
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            Transport::Sequential(w) => w.len(),
            Transport::Threaded { senders, .. } => senders.len(),
        }
    }

    /// Sends `requests[i]` to worker `i` and collects all replies.
    pub(crate) fn scatter_gather(&self, requests: Vec<Request<T>>) -> Result<Vec<Reply<T>>> {
        debug_assert_eq!(requests.len(), self.len());
        let mut replies = match self {
            Transport::Sequential(workers) => workers
                .iter()
                .zip(&requests)
                .map(|(w, r)| serve(w.as_ref(), r))
                .collect::<Vec<_>>(),
            Transport::Threaded { senders, .. } => {
                let (tx, rx) = channel();
                for (s, request) in senders.iter().zip(requests) {
                    s.send(Job {
                        request,
                        reply: tx.clone(),
                    })
                    .map_err(|_| Error::Configuration("worker actor stopped".into()))?;
                }
                drop(tx);
                rx.iter().collect()
            }
        };
        if replies.len() != self.len() {
            return Err(Error::Configuration("worker actor stopped".into()));
        }
        replies.sort_by_key(|r| r.worker_id);
        Ok(replies)
    }
}

impl<T> Drop for Transport<T> {
    fn drop(&mut self) {
        if let Transport::Threaded { senders, handles } = self {
            senders.clear();
            for h in handles.drain(..) {
                let _ = h.join();
            }
        }
    }
}
