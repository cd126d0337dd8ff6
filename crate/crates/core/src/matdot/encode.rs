use rayon::prelude::*;

use super::{CodeConfig, CodedResult, EncodedQueryShare, EncodedShard};
use crate::error::{Error, Result};
use crate::linalg::{row_subset_matvec, ColumnSplit, DenseMatrix};
use crate::scalar::Real;

/// Index of the single unit weight, if `weights` is a Kronecker delta.
fn unit_position<T: Real>(weights: &[T]) -> Option<usize> {
    let mut hit = None;
    for (j, &w) in weights.iter().enumerate() {
        if w == T::one() && hit.is_none() {
            hit = Some(j);
        } else if w != T::zero() {
            return None;
        }
    }
    hit
}

/// Encodes `Xᵀ` (`N × d`) into one shard per worker. Blocks narrower than
/// `⌈d/m⌉` are zero-padded on the right.
pub fn encode_data<T: Real>(xt: &DenseMatrix<T>, cfg: &CodeConfig<T>) -> Result<Vec<EncodedShard<T>>> {
    cfg.validate()?;
    let split = ColumnSplit::new(xt.cols(), cfg.m())?;
    let width = split.max_width();
    let n = xt.rows();

    Ok(cfg
        .betas()
        .par_iter()
        .enumerate()
        .map(|(worker_id, &beta)| {
            let weights = cfg.data_weights(beta);
            let mut matrix = DenseMatrix::zeros(n, width);
            match unit_position(&weights) {
                Some(j) => {
                    let range = split.range(j);
                    for r in 0..n {
                        matrix.row_mut(r)[..range.len()].copy_from_slice(&xt.row(r)[range.clone()]);
                    }
                }
                None => {
                    for r in 0..n {
                        let src = xt.row(r);
                        let dst = matrix.row_mut(r);
                        for (range, &w) in split.ranges().zip(&weights) {
                            for (o, &x) in dst.iter_mut().zip(&src[range]) {
                                *o = *o + w * x;
                            }
                        }
                    }
                }
            }
            EncodedShard {
                worker_id,
                beta,
                matrix,
            }
        })
        .collect())
}

/// Splits `q` into `m` parts (zero-padded to the shard width) and encodes one
/// share per worker.
pub fn encode_query<T: Real>(q: &[T], cfg: &CodeConfig<T>) -> Result<Vec<EncodedQueryShare<T>>> {
    let split = ColumnSplit::new(q.len(), cfg.m()).map_err(|_| Error::DimensionMismatch {
        expected: cfg.m(),
        actual: q.len(),
    })?;
    let width = split.max_width();
    Ok(cfg
        .betas()
        .iter()
        .enumerate()
        .map(|(worker_id, &beta)| {
            let weights = cfg.query_weights(beta);
            let mut vector = vec![T::zero(); width];
            match unit_position(&weights) {
                Some(j) => {
                    let range = split.range(j);
                    vector[..range.len()].copy_from_slice(&q[range]);
                }
                None => {
                    for (range, &w) in split.ranges().zip(&weights) {
                        for (o, &x) in vector.iter_mut().zip(&q[range]) {
                            *o = *o + w * x;
                        }
                    }
                }
            }
            EncodedQueryShare {
                worker_id,
                beta,
                vector,
            }
        })
        .collect())
}

/// The worker-side product `P_{X(S)ᵀ}(β)·P_q(β)` over the rows in `rows`.
pub fn coded_product<T: Real>(
    shard: &EncodedShard<T>,
    rows: &[usize],
    share: &EncodedQueryShare<T>,
) -> Result<CodedResult<T>> {
    if shard.beta != share.beta || shard.worker_id != share.worker_id {
        return Err(Error::BetaMismatch {
            worker: shard.worker_id,
            expected: shard.beta.as_f64(),
            actual: share.beta.as_f64(),
        });
    }
    Ok(CodedResult {
        worker_id: shard.worker_id,
        beta: shard.beta,
        values: row_subset_matvec(&shard.matrix, rows, &share.vector)?,
    })
}

#[cfg(test)]
mod tests {
    use super::super::BetaScheme;
    use super::*;

    fn toy() -> (DenseMatrix<f64>, CodeConfig<f64>) {
        let xt = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let cfg = CodeConfig::new(2, vec![1.0, 2.0, 3.0], false).unwrap();
        (xt, cfg)
    }

    #[test]
    fn toy_data_shards() {
        let (xt, cfg) = toy();
        let shards = encode_data(&xt, &cfg).unwrap();
        let cols: Vec<Vec<f64>> = shards.iter().map(|s| s.matrix.entries().to_vec()).collect();
        assert_eq!(cols, vec![vec![3.0, 7.0], vec![5.0, 11.0], vec![7.0, 15.0]]);
    }

    #[test]
    fn toy_query_shares() {
        let (_, cfg) = toy();
        let shares = encode_query(&[5.0, 6.0], &cfg).unwrap();
        let v: Vec<f64> = shares.iter().map(|s| s.vector[0]).collect();
        assert_eq!(v, vec![11.0, 16.0, 21.0]);
    }

    #[test]
    fn toy_products() {
        let (xt, cfg) = toy();
        let shards = encode_data(&xt, &cfg).unwrap();
        let shares = encode_query(&[5.0, 6.0], &cfg).unwrap();
        let got: Vec<Vec<f64>> = shards
            .iter()
            .zip(&shares)
            .map(|(s, q)| coded_product(s, &[0, 1], q).unwrap().values)
            .collect();
        assert_eq!(got, vec![vec![33.0, 77.0], vec![80.0, 176.0], vec![147.0, 315.0]]);
        assert!(coded_product(&shards[0], &[], &shares[0]).unwrap().values.is_empty());
        assert!(matches!(
            coded_product(&shards[0], &[0], &shares[1]),
            Err(Error::BetaMismatch { .. })
        ));
    }

    #[test]
    fn systematic_shards_hold_uncoded_blocks() {
        let xt = DenseMatrix::from_rows(&[[1.0, -0.0, 3.0], [4.0, 5.0, 6.5]]).unwrap();
        let cfg = CodeConfig::systematic(2, 5, BetaScheme::Chebyshev).unwrap();
        let shards = encode_data(&xt, &cfg).unwrap();
        let b0 = [1.0, -0.0, 4.0, 5.0];
        let b1 = [3.0, 0.0, 6.5, 0.0];
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(shards[0].matrix.entries()), bits(&b0));
        assert_eq!(bits(shards[1].matrix.entries()), bits(&b1));
        let shares = encode_query(&[7.0, 8.0, 9.0], &cfg).unwrap();
        assert_eq!(shares[0].vector, vec![7.0, 8.0]);
        assert_eq!(shares[1].vector, vec![9.0, 0.0]);
    }

    #[test]
    fn single_block_code_is_identity() {
        let xt = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let cfg = CodeConfig::matdot(1, 3, BetaScheme::Chebyshev).unwrap();
        let q = [1.0, -1.0, 2.0];
        for (s, share) in encode_data(&xt, &cfg).unwrap().iter().zip(encode_query(&q, &cfg).unwrap()) {
            assert_eq!(s.matrix, xt);
            assert_eq!(share.vector, q.to_vec());
            assert_eq!(coded_product(s, &[1, 0], &share).unwrap().values, vec![11.0, 5.0]);
        }
    }

    #[test]
    fn query_length_must_cover_partitions() {
        let cfg = CodeConfig::<f64>::matdot(3, 5, BetaScheme::Chebyshev).unwrap();
        assert!(encode_query(&[1.0, 2.0], &cfg).is_err());
    }
}
