use serde::{Deserialize, Serialize};

use super::{CodeConfig, CodedResult};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeOptions {
    /// Reject interpolation systems whose 1-norm condition estimate exceeds
    /// this value.
    pub max_condition: f64,
    /// Disable the systematic fast path even when all systematic results are
    /// present.
    pub force_interpolation: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            max_condition: 1e12,
            force_interpolation: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodePath {
    /// Sum of the `m` systematic products, no interpolation.
    SystematicFast,
    /// Interpolation over `2m − 1` results.
    Interpolation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded<T> {
    pub values: Vec<T>,
    pub path: DecodePath,
    /// Worker ids whose results were consumed, in arrival order.
    pub used_workers: Vec<usize>,
}

/// Recovers `w = X(S)ᵀq` from worker products given in arrival order.
pub fn decode<T: Real>(results: &[CodedResult<T>], cfg: &CodeConfig<T>, expected_len: usize) -> Result<Vec<T>> {
    decode_with(results, cfg, expected_len, &DecodeOptions::default()).map(|d| d.values)
}

/// Decoding with explicit options and path reporting.
///
/// Results are consumed in order until either all `m` systematic results
/// are in (systematic codes only) or `2m − 1` distinct points are in; later
/// results are ignored.
pub fn decode_with<T: Real>(
    results: &[CodedResult<T>],
    cfg: &CodeConfig<T>,
    expected_len: usize,
    opts: &DecodeOptions,
) -> Result<Decoded<T>> {
    let m = cfg.m();
    let need = cfg.recovery_threshold();
    let use_fast = cfg.is_systematic() && !opts.force_interpolation;

    let mut selected: Vec<&CodedResult<T>> = Vec::with_capacity(need);
    let mut systematic_seen = 0usize;
    for r in results {
        validate(r, cfg, expected_len)?;
        if let Some(prev) = selected.iter().find(|s| s.beta == r.beta) {
            return Err(Error::DuplicateBeta {
                worker: prev.worker_id.max(r.worker_id),
                beta: r.beta.as_f64(),
            });
        }
        selected.push(r);
        if r.worker_id < m {
            systematic_seen += 1;
        }
        if use_fast && systematic_seen == m {
            let mut sys: Vec<&CodedResult<T>> = selected.iter().copied().filter(|s| s.worker_id < m).collect();
            sys.sort_by_key(|s| s.worker_id);
            return Ok(Decoded {
                values: sum_products(&sys, expected_len),
                path: DecodePath::SystematicFast,
                used_workers: selected.iter().filter(|s| s.worker_id < m).map(|s| s.worker_id).collect(),
            });
        }
        if selected.len() == need {
            break;
        }
    }
    if selected.len() < need {
        return Err(Error::InsufficientResults {
            have: selected.len(),
            need,
        });
    }

    let nodes: Vec<T> = selected.iter().map(|r| r.beta).collect();
    // Functional applied to the product polynomial's monomial coefficients.
    let target: Vec<T> = if cfg.is_systematic() {
        (0..need)
            .map(|k| cfg.betas()[..m].iter().map(|&b| b.powi(k as i32)).sum())
            .collect()
    } else {
        (0..need).map(|k| if k == m - 1 { T::one() } else { T::zero() }).collect()
    };
    // w = targetᵀ V⁻¹ r, i.e. weights c solving Vᵀc = target.
    let lu = Lu::factor(vandermonde_transposed(&nodes), need)?;
    let condition = lu.condition_1norm();
    if condition.is_nan() || condition > opts.max_condition {
        return Err(Error::IllConditioned { condition });
    }
    let weights = lu.solve(&target);
    let mut values = vec![T::zero(); expected_len];
    for (r, &c) in selected.iter().zip(&weights) {
        for (v, &x) in values.iter_mut().zip(&r.values) {
            *v = *v + c * x;
        }
    }
    Ok(Decoded {
        values,
        path: DecodePath::Interpolation,
        used_workers: selected.iter().map(|r| r.worker_id).collect(),
    })
}

/// Monomial coefficients (constant term first) of the interpolated product
/// polynomial, one vector per output coordinate, from exactly `2m − 1`
/// results.
pub fn product_coefficients<T: Real>(results: &[CodedResult<T>], cfg: &CodeConfig<T>) -> Result<Vec<Vec<T>>> {
    let need = cfg.recovery_threshold();
    if results.len() < need {
        return Err(Error::InsufficientResults {
            have: results.len(),
            need,
        });
    }
    let used = &results[..need];
    let len = used[0].values.len();
    for r in used {
        validate(r, cfg, len)?;
    }
    let nodes: Vec<T> = used.iter().map(|r| r.beta).collect();
    let mut v = vandermonde_transposed(&nodes);
    transpose_square(&mut v, need);
    let lu = Lu::factor(v, need)?;
    Ok((0..len)
        .map(|t| {
            let rhs: Vec<T> = used.iter().map(|r| r.values[t]).collect();
            lu.solve(&rhs)
        })
        .collect())
}

fn validate<T: Real>(r: &CodedResult<T>, cfg: &CodeConfig<T>, expected_len: usize) -> Result<()> {
    let Some(&expected) = cfg.betas().get(r.worker_id) else {
        return Err(Error::IndexOutOfRange {
            index: r.worker_id,
            len: cfg.workers(),
        });
    };
    if expected != r.beta {
        return Err(Error::BetaMismatch {
            worker: r.worker_id,
            expected: expected.as_f64(),
            actual: r.beta.as_f64(),
        });
    }
    if r.values.len() != expected_len {
        return Err(Error::DimensionMismatch {
            expected: expected_len,
            actual: r.values.len(),
        });
    }
    Ok(())
}

fn sum_products<T: Real>(results: &[&CodedResult<T>], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    for r in results {
        for (o, &x) in out.iter_mut().zip(&r.values) {
            *o = *o + x;
        }
    }
    out
}

/// Row-major `Vᵀ` where `V[i][k] = nodes[i]^k`.
fn vandermonde_transposed<T: Real>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let mut a = vec![T::zero(); n * n];
    for (i, &x) in nodes.iter().enumerate() {
        let mut p = T::one();
        for k in 0..n {
            a[k * n + i] = p;
            p = p * x;
        }
    }
    a
}

fn transpose_square<T: Copy>(a: &mut [T], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            a.swap(i * n + j, j * n + i);
        }
    }
}

/// LU factorization with partial pivoting of a small dense square matrix.
pub(crate) struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    norm1: T,
}

impl<T: Real> Lu<T> {
    pub(crate) fn factor(mut a: Vec<T>, n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        let norm1 = (0..n)
            .map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<T>())
            .fold(T::zero(), T::max);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == T::zero() {
                return Err(Error::IllConditioned {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let d = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / d;
                a[r * n + k] = f;
                for c in k + 1..n {
                    a[r * n + c] = a[r * n + c] - f * a[k * n + c];
                }
            }
        }
        Ok(Self { n, lu: a, perm, norm1 })
    }

    pub(crate) fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            for c in 0..r {
                x[r] = x[r] - self.lu[r * n + c] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                x[r] = x[r] - self.lu[r * n + c] * x[c];
            }
            x[r] = x[r] / self.lu[r * n + r];
        }
        x
    }

    /// `‖A‖₁‖A⁻¹‖₁` with the inverse formed column by column.
    pub(crate) fn condition_1norm(&self) -> f64 {
        let n = self.n;
        let mut inv_norm = T::zero();
        let mut e = vec![T::zero(); n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[c] = T::one();
            let col: T = self.solve(&e).iter().map(|x| x.abs()).sum();
            inv_norm = inv_norm.max(col);
        }
        (self.norm1 * inv_norm).as_f64()
    }
}
