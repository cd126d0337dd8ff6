use coded_mrpt::{Dataset, Error, Result, RngSeed};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// I.i.d. standard normal coordinates.
    Gaussian,
    /// Unit-covariance blobs around centers uniform in `[−10, 10]^d`.
    Clustered { clusters: usize },
}

/// A seeded generator; data and held-out queries share its distribution.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    kind: SyntheticKind,
    seed: RngSeed,
    centers: Vec<Vec<f64>>,
}

impl Generator {
    pub fn new(dim: usize, kind: SyntheticKind, seed: RngSeed) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
        }
        let centers = match kind {
            SyntheticKind::Gaussian => Vec::new(),
            SyntheticKind::Clustered { clusters } => {
                if clusters == 0 {
                    return Err(Error::InvalidParameter("cluster count must be ≥ 1".into()));
                }
                let mut rng = seed.stream(0);
                (0..clusters)
                    .map(|_| (0..dim).map(|_| rng.random_range(-10.0..=10.0)).collect())
                    .collect()
            }
        };
        Ok(Self { dim, kind, seed, centers })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// `n` points from independent stream `stream` (1 for data, 2 for queries).
    pub fn points(&self, n: usize, stream: u64) -> Vec<Vec<f64>> {
        let mut rng = self.seed.stream(stream);
        (0..n)
            .map(|_| {
                let mut p: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                if !self.centers.is_empty() {
                    let c = &self.centers[rng.random_range(0..self.centers.len())];
                    p.iter_mut().zip(c).for_each(|(x, m)| *x += m);
                }
                p
            })
            .collect()
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }
}

pub fn gen_synthetic(n: usize, d: usize, kind: SyntheticKind, seed: RngSeed) -> Result<Dataset<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be ≥ 1".into()));
    }
    if let SyntheticKind::Clustered { clusters } = kind {
        if clusters > n {
            return Err(Error::InvalidParameter(format!("{clusters} clusters for {n} points")));
        }
    }
    Dataset::from_points(&Generator::new(d, kind, seed)?.points(n, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_and_deterministic() {
        let a = gen_synthetic(1, 1, SyntheticKind::Gaussian, RngSeed(3)).unwrap();
        assert!(a.point(0)[0].is_finite());
        let k = SyntheticKind::Clustered { clusters: 4 };
        assert_eq!(
            gen_synthetic(50, 3, k, RngSeed(9)).unwrap(),
            gen_synthetic(50, 3, k, RngSeed(9)).unwrap()
        );
        assert_ne!(
            gen_synthetic(50, 3, k, RngSeed(9)).unwrap(),
            gen_synthetic(50, 3, k, RngSeed(10)).unwrap()
        );
    }

    #[test]
    fn invalid_parameters() {
        assert!(gen_synthetic(0, 2, SyntheticKind::Gaussian, RngSeed(0)).is_err());
        assert!(gen_synthetic(2, 0, SyntheticKind::Gaussian, RngSeed(0)).is_err());
        assert!(gen_synthetic(2, 2, SyntheticKind::Clustered { clusters: 3 }, RngSeed(0)).is_err());
        assert!(gen_synthetic(2, 2, SyntheticKind::Clustered { clusters: 0 }, RngSeed(0)).is_err());
    }

    #[test]
    fn centers_in_box() {
        let g = Generator::new(5, SyntheticKind::Clustered { clusters: 30 }, RngSeed(1)).unwrap();
        assert!(g.centers().iter().flatten().all(|x| (-10.0..=10.0).contains(x)));
    }
}
