//! Dense matrices, the point dataset, column partitioning and the distance
//! kernels shared by every query strategy.

use std::cmp::Ordering;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Real};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![T::zero(); rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.entries[c * self.rows + r] = self.get(r, c);
            }
        }
        out
    }

    /// Columns `range` as a new matrix.
    pub fn column_block(&self, range: Range<usize>) -> Self {
        let width = range.len();
        let mut entries = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            entries.extend_from_slice(&self.row(r)[range.clone()]);
        }
        Self {
            rows: self.rows,
            cols: width,
            entries,
        }
    }

    /// Rows indexed by `rows`, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    len: self.rows,
                });
            }
            entries.extend_from_slice(self.row(r));
        }
        Ok(Self {
            rows: rows.len(),
            cols: self.cols,
            entries,
        })
    }

    /// Horizontal concatenation of blocks with equal row counts.
    pub fn hconcat(blocks: &[Self]) -> Result<Self> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if let Some(b) = blocks.iter().find(|b| b.rows != rows) {
            return Err(Error::DimensionMismatch {
                expected: rows,
                actual: b.rows,
            });
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for b in blocks {
                entries.extend_from_slice(b.row(r));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: v.len(),
            });
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }
}

/// A partition of `[0, width)` into contiguous ranges whose widths differ by
/// at most one; earlier parts take the extra element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSplit {
    width: usize,
    boundaries: Vec<usize>,
}

impl ColumnSplit {
    pub fn new(width: usize, parts: usize) -> Result<Self> {
        if parts == 0 || parts > width {
            return Err(Error::InvalidParameter(format!(
                "cannot split width {width} into {parts} parts"
            )));
        }
        let base = width / parts;
        let extra = width % parts;
        let mut boundaries = Vec::with_capacity(parts);
        let mut start = 0;
        for p in 0..parts {
            boundaries.push(start);
            start += base + usize::from(p < extra);
        }
        Ok(Self { width, boundaries })
    }

    pub fn parts(&self) -> usize {
        self.boundaries.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Start column of every part.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn range(&self, part: usize) -> Range<usize> {
        let start = self.boundaries[part];
        let end = self
            .boundaries
            .get(part + 1)
            .copied()
            .unwrap_or(self.width);
        start..end
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.parts()).map(move |p| self.range(p))
    }

    /// Width of the widest part.
    pub fn max_width(&self) -> usize {
        self.range(0).len()
    }
}

/// Splits `m` into `parts` contiguous vertical blocks.
pub fn split_columns<T: Real>(m: &DenseMatrix<T>, parts: usize) -> Result<Vec<DenseMatrix<T>>> {
    let split = ColumnSplit::new(m.cols(), parts)?;
    Ok(split.ranges().map(|r| m.column_block(r)).collect())
}

/// `M(S)·v`: the product of the rows of `m` selected by `rows` with `v`.
pub fn row_subset_matvec<T: Real>(m: &DenseMatrix<T>, rows: &[usize], v: &[T]) -> Result<Vec<T>> {
    if v.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            actual: v.len(),
        });
    }
    rows.iter()
        .map(|&r| {
            if r >= m.rows() {
                Err(Error::IndexOutOfRange {
                    index: r,
                    len: m.rows(),
                })
            } else {
                Ok(dot(m.row(r), v))
            }
        })
        .collect()
}

/// Absolute tolerance on the radicand, relative to `‖u‖² + ‖v‖²`.
fn radicand_tolerance<T: Real>(scale: T) -> T {
    let rel = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
    rel * scale.max(T::one())
}

/// `‖u − v‖` from the two norms and the dot product.
///
/// Small negative radicands from cancellation are clamped to zero; larger
/// ones indicate inconsistent inputs and are rejected.
pub fn euclidean_dist_via_dot<T: Real>(norm_u: T, norm_v: T, dot_uv: T) -> Result<T> {
    if norm_u < T::zero() || norm_v < T::zero() {
        return Err(Error::InvalidParameter("negative norm".into()));
    }
    let sq = norm_u * norm_u + norm_v * norm_v;
    let radicand = sq - (dot_uv + dot_uv);
    if radicand < -radicand_tolerance(sq) {
        return Err(Error::NegativeRadicand {
            radicand: radicand.as_f64(),
        });
    }
    Ok(radicand.max(T::zero()).sqrt())
}

/// Total order on (distance, index) pairs: ascending distance, ties by index.
#[inline]
pub fn cmp_by_distance<T: Real>(a: &(usize, T), b: &(usize, T)) -> Ordering {
    a.1.partial_cmp(&b.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// The `k` smallest-distance pairs, ascending, ties broken by index.
pub fn top_k_by_distance<T: Real>(mut cands: Vec<(usize, T)>, k: usize) -> Vec<(usize, T)> {
    if k == 0 {
        return Vec::new();
    }
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, cmp_by_distance);
        cands.truncate(k);
    }
    cands.sort_unstable_by(cmp_by_distance);
    cands
}

/// `d × N` point set stored point-major, which is the row-major layout of
/// `Xᵀ` (row `j` is point `j`), with precomputed Euclidean norms.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    points: DenseMatrix<T>,
    norms: Vec<T>,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset from `Xᵀ` (one point per row).
    pub fn from_transposed(xt: DenseMatrix<T>) -> Result<Self> {
        if xt.rows() == 0 || xt.cols() == 0 {
            return Err(Error::InvalidParameter(
                "dataset needs at least one point and one dimension".into(),
            ));
        }
        let norms = (0..xt.rows()).map(|j| norm(xt.row(j))).collect();
        Ok(Self { points: xt, norms })
    }

    pub fn from_points<R: AsRef<[T]>>(points: &[R]) -> Result<Self> {
        Self::from_transposed(DenseMatrix::from_rows(points)?)
    }

    /// Number of dimensions `d`.
    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Number of points `N`.
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[T] {
        self.points.row(j)
    }

    #[inline]
    pub fn norm(&self, j: usize) -> T {
        self.norms[j]
    }

    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    /// `Xᵀ`: the `N × d` matrix with one point per row.
    pub fn transposed(&self) -> &DenseMatrix<T> {
        &self.points
    }

    /// Subset of points in the order given.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let points = self.points.select_rows(indices)?;
        let norms = indices.iter().map(|&j| self.norms[j]).collect();
        Ok(Self { points, norms })
    }

    pub fn check_query(&self, q: &[T]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: q.len(),
            });
        }
        Ok(())
    }
}
