//! Sparse random projection trees.
//!
//! A tree of depth `ℓ` draws one sparse Gaussian direction per level and
//! splits every node at the median of its points' projections onto that
//! level's direction, giving `2^ℓ` leaves of `⌈N/2^ℓ⌉` or `⌊N/2^ℓ⌋` points.
//!
//! Tie rule: a node of `n` points sends its `⌈n/2⌉` smallest projections
//! left (equal projections ordered by point index), and stores as its split
//! value the middle projection (odd `n`) or the midpoint of the two central
//! projections (even `n`). Routing sends a projection `≤ split` left.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Dataset;
use crate::rng::RngSeed;
use crate::scalar::Real;

/// A `d`-dimensional direction whose coordinates are `N(0,1)` with
/// probability `a` and zero otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseProjection<T> {
    dim: usize,
    nonzeros: Vec<(usize, T)>,
}

impl<T: Real> SparseProjection<T> {
    pub fn sample<R: Rng + ?Sized>(dim: usize, sparsity: f64, rng: &mut R) -> Result<Self> {
        check_sparsity(sparsity)?;
        if dim == 0 {
            return Err(Error::InvalidParameter("projection dimension must be ≥ 1".into()));
        }
        let mut nonzeros = Vec::with_capacity(((dim as f64) * sparsity).ceil() as usize + 1);
        for i in 0..dim {
            if rng.random_bool(sparsity) {
                let v: f64 = rng.sample(StandardNormal);
                nonzeros.push((i, T::lit(v)));
            }
        }
        Ok(Self { dim, nonzeros })
    }

    pub fn from_nonzeros(dim: usize, mut nonzeros: Vec<(usize, T)>) -> Result<Self> {
        nonzeros.sort_by_key(|&(i, _)| i);
        if nonzeros.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate projection coordinate".into()));
        }
        if let Some(&(i, _)) = nonzeros.iter().find(|&&(i, _)| i >= dim) {
            return Err(Error::IndexOutOfRange { index: i, len: dim });
        }
        if nonzeros.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite("projection"));
        }
        Ok(Self { dim, nonzeros })
    }

    /// Dense direction along the given vector.
    pub fn dense(direction: &[T]) -> Result<Self> {
        let nonzeros = direction
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, &v)| (i, v))
            .collect();
        Self::from_nonzeros(direction.len(), nonzeros)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nonzeros(&self) -> &[(usize, T)] {
        &self.nonzeros
    }

    #[inline]
    pub fn project(&self, x: &[T]) -> T {
        self.nonzeros
            .iter()
            .fold(T::zero(), |acc, &(i, v)| acc + x[i] * v)
    }
}

pub(crate) fn check_sparsity(a: f64) -> Result<()> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "projection sparsity must lie in (0, 1], got {a}"
        )));
    }
    Ok(())
}

/// A random projection tree stored as a complete binary tree in heap order.
#[derive(Clone, Debug, PartialEq)]
pub struct RpTree<T> {
    depth: usize,
    projections: Vec<SparseProjection<T>>,
    /// `2^ℓ − 1` split values; node `i` has children `2i+1` and `2i+2`.
    medians: Vec<T>,
    /// `2^ℓ` leaves, left to right, each sorted ascending.
    leaves: Vec<Vec<usize>>,
}

impl<T: Real> RpTree<T> {
    /// Builds a tree with fresh projections drawn from `rng`.
    pub fn build<R: Rng + ?Sized>(
        data: &Dataset<T>,
        depth: usize,
        sparsity: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_depth(depth, data.len())?;
        check_sparsity(sparsity)?;
        let projections = (0..depth)
            .map(|_| SparseProjection::sample(data.dim(), sparsity, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::with_projections(data, projections)
    }

    /// Builds a tree from a seed; equal seeds give equal trees.
    pub fn build_seeded(data: &Dataset<T>, depth: usize, sparsity: f64, seed: RngSeed) -> Result<Self> {
        Self::build(data, depth, sparsity, &mut seed.rng())
    }

    /// Builds a tree with caller-supplied per-level projections.
    pub fn with_projections(data: &Dataset<T>, projections: Vec<SparseProjection<T>>) -> Result<Self> {
        let depth = projections.len();
        check_depth(depth, data.len())?;
        if let Some(p) = projections.iter().find(|p| p.dim != data.dim()) {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                actual: p.dim,
            });
        }

        let n = data.len();
        let mut order: Vec<usize> = (0..n).collect();
        // segment boundaries of the current level's nodes, left to right
        let mut bounds = vec![0, n];
        let mut medians = Vec::with_capacity((1 << depth) - 1);
        let mut keyed: Vec<(T, usize)> = Vec::with_capacity(n);

        for proj in &projections {
            let mut next = Vec::with_capacity(2 * bounds.len() - 1);
            next.push(0);
            for w in bounds.windows(2) {
                let (start, end) = (w[0], w[1]);
                let seg = &mut order[start..end];
                keyed.clear();
                keyed.extend(seg.iter().map(|&j| (proj.project(data.point(j)), j)));
                keyed.sort_unstable_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.1.cmp(&b.1))
                });
                for (slot, &(_, j)) in seg.iter_mut().zip(&keyed) {
                    *slot = j;
                }
                let len = end - start;
                let left = len.div_ceil(2);
                medians.push(split_value(&keyed, left));
                next.push(start + left);
                next.push(end);
            }
            bounds = next;
        }

        let leaves = bounds
            .windows(2)
            .map(|w| {
                let mut leaf = order[w[0]..w[1]].to_vec();
                leaf.sort_unstable();
                leaf
            })
            .collect();

        Ok(Self {
            depth,
            projections,
            medians,
            leaves,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn projections(&self) -> &[SparseProjection<T>] {
        &self.projections
    }

    pub fn medians(&self) -> &[T] {
        &self.medians
    }

    pub fn leaves(&self) -> &[Vec<usize>] {
        &self.leaves
    }

    /// Leaf number (left to right) that `q` routes to.
    pub fn leaf_of(&self, q: &[T]) -> Result<usize> {
        if let Some(p) = self.projections.first() {
            if q.len() != p.dim {
                return Err(Error::DimensionMismatch {
                    expected: p.dim,
                    actual: q.len(),
                });
            }
        }
        let mut node = 0;
        for proj in &self.projections {
            node = if proj.project(q) <= self.medians[node] {
                2 * node + 1
            } else {
                2 * node + 2
            };
        }
        Ok(node - self.medians.len())
    }

    /// Indices of the points sharing `q`'s leaf.
    pub fn query(&self, q: &[T]) -> Result<&[usize]> {
        Ok(&self.leaves[self.leaf_of(q)?])
    }
}

fn check_depth(depth: usize, n: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidParameter("tree depth must be ≥ 1".into()));
    }
    if depth >= usize::BITS as usize || (1usize << depth) > n {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} needs at least 2^{depth} points, dataset has {n}"
        )));
    }
    Ok(())
}

/// Split value for a sorted node whose first `left` entries go left.
fn split_value<T: Real>(sorted: &[(T, usize)], left: usize) -> T {
    let lo = sorted[left - 1].0;
    if sorted.len() % 2 == 1 {
        return lo;
    }
    let hi = sorted[left].0;
    let mid = lo + (hi - lo) / T::lit(2.0);
    // adjacent floats can round the midpoint up onto `hi`
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_data(values: &[f64]) -> Dataset<f64> {
        let pts: Vec<[f64; 1]> = values.iter().map(|&v| [v]).collect();
        Dataset::from_points(&pts).unwrap()
    }

    fn gaussian(n: usize, d: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        Dataset::from_points(&pts).unwrap()
    }

    #[test]
    fn dense_sparsity_keeps_every_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = SparseProjection::<f64>::sample(5, 1.0, &mut rng).unwrap();
        assert_eq!(p.nonzeros().len(), 5);
        assert!(SparseProjection::<f64>::sample(5, 0.0, &mut rng).is_err());
        assert!(SparseProjection::<f64>::sample(5, 1.5, &mut rng).is_err());
    }

    #[test]
    fn sparse_nonzero_count_matches_binomial() {
        let d = 9216usize;
        let a = 1.0 / (d as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples = 1000;
        let total: usize = (0..samples)
            .map(|_| SparseProjection::<f64>::sample(d, a, &mut rng).unwrap().nonzeros().len())
            .sum();
        let mean = total as f64 / samples as f64;
        let expected = d as f64 * a;
        assert!((expected - 96.0).abs() < 1e-9);
        let sigma = (d as f64 * a * (1.0 - a)).sqrt();
        // sample mean of 1000 draws: standard error sigma / sqrt(1000)
        assert!((mean - expected).abs() < 3.0 * sigma / (samples as f64).sqrt());
    }

    #[test]
    fn projection_is_deterministic_for_a_seed() {
        let a = SparseProjection::<f64>::sample(50, 0.3, &mut RngSeed(9).rng()).unwrap();
        let b = SparseProjection::<f64>::sample(50, 0.3, &mut RngSeed(9).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sort_and_halve_on_a_line() {
        let data = line_data(&[5.0, 1.0, 8.0, 3.0, 7.0, 2.0, 6.0, 4.0]);
        let proj = SparseProjection::dense(&[1.0]).unwrap();
        let tree = RpTree::with_projections(&data, vec![proj]).unwrap();
        // indices of values 1,2,3,4 and 5,6,7,8
        assert_eq!(tree.leaves()[0], vec![1, 3, 5, 7]);
        assert_eq!(tree.leaves()[1], vec![0, 2, 4, 6]);
        assert_eq!(tree.medians(), &[4.5]);
    }

    #[test]
    fn odd_split_sizes() {
        let data = gaussian(5, 3, 4);
        let tree = RpTree::build_seeded(&data, 1, 1.0, RngSeed(3)).unwrap();
        let mut sizes: Vec<usize> = tree.leaves().iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 3]);
        assert_eq!(tree.leaves()[0].len(), 3);
    }

    #[test]
    fn manual_routing_on_a_line() {
        let data = line_data(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let proj = SparseProjection::dense(&[1.0]).unwrap();
        let tree = RpTree::with_projections(&data, vec![proj.clone(), proj]).unwrap();
        assert_eq!(tree.medians(), &[4.5, 2.5, 6.5]);
        assert_eq!(tree.query(&[0.0]).unwrap(), &[0, 1]);
        assert_eq!(tree.query(&[6.9]).unwrap(), &[6, 7]);
        assert_eq!(tree.leaf_of(&[4.5]).unwrap(), 1);
    }

    #[test]
    fn ties_fill_left_first() {
        let data = line_data(&[2.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        let proj = SparseProjection::dense(&[1.0]).unwrap();
        let tree = RpTree::with_projections(&data, vec![proj]).unwrap();
        assert_eq!(tree.leaves()[0], vec![1, 2, 5]);
        assert_eq!(tree.leaves()[1], vec![0, 3, 4]);
    }

    #[test]
    fn equal_seeds_give_equal_trees() {
        let data = gaussian(64, 8, 5);
        let a = RpTree::build_seeded(&data, 3, 0.5, RngSeed(77)).unwrap();
        let b = RpTree::build_seeded(&data, 3, 0.5, RngSeed(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn depth_preconditions() {
        let data = gaussian(7, 2, 6);
        assert!(RpTree::build_seeded(&data, 3, 1.0, RngSeed(0)).is_err());
        assert!(RpTree::build_seeded(&data, 0, 1.0, RngSeed(0)).is_err());
        assert!(RpTree::build_seeded(&data, 2, 1.0, RngSeed(0)).is_ok());
        let tree = RpTree::build_seeded(&data, 2, 1.0, RngSeed(0)).unwrap();
        assert!(matches!(tree.query(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
