//! MatDot and systematic MatDot codes for the product `w = X(S)ᵀq`.
//!
//! `Xᵀ` is split into `m` vertical blocks `X_1ᵀ … X_mᵀ` and `q` into the
//! matching `m` parts. Worker `i` stores the data polynomial evaluated at its
//! point `β_i` and receives the query polynomial at `β_i`; the product
//! polynomial has degree `2m − 2`, so any `2m − 1` worker products determine
//! it.
//!
//! | code        | data polynomial         | query polynomial        | `w` from `p = P_X·P_q` |
//! |-------------|-------------------------|-------------------------|------------------------|
//! | MatDot      | `Σ X_jᵀ β^(j−1)`        | `Σ q_j β^(m−j)`         | coefficient of `β^(m−1)` |
//! | systematic  | `Σ X_jᵀ L_j(β)`         | `Σ q_j L_j(β)`          | `Σ_{j≤m} p(β_j)`       |
//!
//! `L_j` is the Lagrange basis over the first `m` evaluation points, so the
//! first `m` workers hold uncoded blocks and their products sum to `w`
//! directly.
//!
//! Row selection commutes with encoding: the rows of `P_{Xᵀ}(β)` indexed by
//! `S` are `P_{X(S)ᵀ}(β)`, which is why the data can be encoded once off-line
//! while `S` is only known per query.

mod conditioning;
mod decode;
mod encode;
mod shard_io;

pub use conditioning::{conditioning_report, ConditioningReport, DEFAULT_WARNING_THRESHOLD};
pub use decode::{
    decode, decode_with, product_coefficients, DecodeOptions, DecodePath, Decoded,
};
pub use encode::{coded_product, encode_data, encode_query};
pub use shard_io::{read_shard, write_shard, ShardHeader, SHARD_MAGIC, SHARD_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Real;

/// How default evaluation points are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaScheme {
    /// Chebyshev nodes of the first kind on `[−1, 1]`.
    Chebyshev,
    /// `1, 2, …, P`. Poorly conditioned beyond small `m`.
    Integer,
}

/// Code parameters: `m` blocks, one evaluation point per worker.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeConfig<T> {
    m: usize,
    betas: Vec<T>,
    systematic: bool,
}

impl<T: Real> CodeConfig<T> {
    pub fn new(m: usize, betas: Vec<T>, systematic: bool) -> Result<Self> {
        let cfg = Self { m, betas, systematic };
        cfg.validate()?;
        Ok(cfg)
    }

    /// MatDot code with `workers` default evaluation points.
    pub fn matdot(m: usize, workers: usize, scheme: BetaScheme) -> Result<Self> {
        Self::new(m, default_betas(workers, m, false, scheme)?, false)
    }

    /// Systematic MatDot code; workers `0..m` are the systematic ones.
    pub fn systematic(m: usize, workers: usize, scheme: BetaScheme) -> Result<Self> {
        Self::new(m, default_betas(workers, m, true, scheme)?, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("partition count m must be ≥ 1".into()));
        }
        if self.betas.len() < self.recovery_threshold() {
            return Err(Error::InvalidParameter(format!(
                "{} workers cannot reach recovery threshold {}",
                self.betas.len(),
                self.recovery_threshold()
            )));
        }
        if self.betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("evaluation points"));
        }
        for (i, a) in self.betas.iter().enumerate() {
            if self.betas[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "evaluation point {a} assigned to more than one worker"
                )));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn workers(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    pub fn is_systematic(&self) -> bool {
        self.systematic
    }

    /// `K = 2m − 1`.
    pub fn recovery_threshold(&self) -> usize {
        2 * self.m - 1
    }

    /// Encoding weights of the `m` data blocks at `beta`.
    pub(crate) fn data_weights(&self, beta: T) -> Vec<T> {
        if self.systematic {
            self.lagrange_weights(beta)
        } else {
            let mut w = Vec::with_capacity(self.m);
            let mut p = T::one();
            for _ in 0..self.m {
                w.push(p);
                p = p * beta;
            }
            w
        }
    }

    /// Encoding weights of the `m` query parts at `beta`.
    pub(crate) fn query_weights(&self, beta: T) -> Vec<T> {
        if self.systematic {
            self.lagrange_weights(beta)
        } else {
            let mut w = self.data_weights(beta);
            w.reverse();
            w
        }
    }

    /// `L_j(beta)` over the first `m` evaluation points.
    pub(crate) fn lagrange_weights(&self, beta: T) -> Vec<T> {
        let nodes = &self.betas[..self.m];
        (0..self.m)
            .map(|j| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| r != j)
                    .fold(T::one(), |acc, (_, &br)| acc * (beta - br) / (nodes[j] - br))
            })
            .collect()
    }
}

/// Default evaluation points for `workers` workers.
///
/// For systematic codes the first `m` points are spread across the node set
/// (evenly spaced picks among the sorted nodes) so the Lagrange basis is
/// evaluated inside its interpolation range.
pub fn default_betas<T: Real>(
    workers: usize,
    m: usize,
    systematic: bool,
    scheme: BetaScheme,
) -> Result<Vec<T>> {
    if workers == 0 {
        return Err(Error::InvalidParameter("need at least one worker".into()));
    }
    let nodes: Vec<T> = match scheme {
        BetaScheme::Chebyshev => (0..workers)
            .map(|k| {
                let theta = std::f64::consts::PI * (2 * k + 1) as f64 / (2 * workers) as f64;
                // cos(π/2) is ~6e-17, not 0; snap the centre node
                let x = theta.cos();
                T::lit(if x.abs() < 1e-15 { 0.0 } else { x })
            })
            .collect(),
        BetaScheme::Integer => (1..=workers).map(|k| T::lit(k as f64)).collect(),
    };
    if !systematic || m == 0 || m > workers {
        return Ok(nodes);
    }
    let picks: Vec<usize> = if m == 1 {
        vec![workers / 2]
    } else if scheme == BetaScheme::Integer {
        (0..m).collect()
    } else {
        (0..m)
            .map(|i| ((i * (workers - 1)) as f64 / (m - 1) as f64).round() as usize)
            .collect()
    };
    let mut out: Vec<T> = picks.iter().map(|&i| nodes[i]).collect();
    out.extend(
        nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| !picks.contains(i))
            .map(|(_, &b)| b),
    );
    Ok(out)
}

/// One worker's stored encoding `P_{Xᵀ}(β)`: an `N × ⌈d/m⌉` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedShard<T> {
    pub worker_id: usize,
    pub beta: T,
    pub matrix: DenseMatrix<T>,
}

/// The encoded query `P_q(β)` sent to one worker.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedQueryShare<T> {
    pub worker_id: usize,
    pub beta: T,
    pub vector: Vec<T>,
}

/// A worker's product `P_{X(S)ᵀ}(β)·P_q(β)`, one value per candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedResult<T> {
    pub worker_id: usize,
    pub beta: T,
    pub values: Vec<T>,
}
