//! Multiple random projection trees: candidate generation by leaf voting and
//! exact refinement over the candidates.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean_dist_via_dot, top_k_by_distance, Dataset};
use crate::rng::RngSeed;
use crate::rptree::{check_sparsity, RpTree};
use crate::scalar::{dot, norm, Real};

/// Above this many points, votes are tallied in a hash map instead of a
/// dense per-point counter.
pub const DEFAULT_VOTE_MAP_THRESHOLD: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    /// Tree depth `ℓ`.
    pub depth: usize,
    /// Number of trees `T`.
    pub trees: usize,
    /// Probability `a` that a projection coordinate is nonzero.
    pub sparsity: f64,
    #[serde(default = "default_vote_map_threshold")]
    pub vote_map_threshold: usize,
}

fn default_vote_map_threshold() -> usize {
    DEFAULT_VOTE_MAP_THRESHOLD
}

impl IndexParams {
    pub fn new(depth: usize, trees: usize, sparsity: f64) -> Self {
        Self {
            depth,
            trees,
            sparsity,
            vote_map_threshold: DEFAULT_VOTE_MAP_THRESHOLD,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("index needs at least one tree".into()));
        }
        check_sparsity(self.sparsity)?;
        if self.depth == 0 || self.depth >= usize::BITS as usize || (1usize << self.depth) > n {
            return Err(Error::InvalidParameter(format!(
                "depth {} needs at least 2^{} points, dataset has {n}",
                self.depth, self.depth
            )));
        }
        Ok(())
    }
}

/// Index parameters together with a voting threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub params: IndexParams,
    pub vote_threshold: usize,
}

impl Preset {
    /// STL-10 configuration: ℓ = 7, ν = 25, T = 900, a = 0.01.
    pub fn stl10() -> Self {
        Self {
            params: IndexParams::new(7, 900, 0.01),
            vote_threshold: 25,
        }
    }

    /// GIST configuration: ℓ = 9, ν = 10, T = 900, a = 0.032.
    pub fn gist() -> Self {
        Self {
            params: IndexParams::new(9, 900, 0.032),
            vote_threshold: 10,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "stl10" | "stl-10" => Some(Self::stl10()),
            "gist" => Some(Self::gist()),
            _ => None,
        }
    }
}

/// Candidate indices `S` (ascending) and their vote counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidateSet {
    pub indices: Vec<usize>,
    pub votes: Vec<u32>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Nearest neighbors ascending by distance. `short` is set when fewer than
/// `k` candidates were available.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Neighbors<T> {
    pub entries: Vec<(usize, T)>,
    pub short: bool,
}

impl<T: Real> Neighbors<T> {
    pub fn from_candidates(cands: Vec<(usize, T)>, k: usize) -> Self {
        let short = cands.len() < k;
        Self {
            entries: top_k_by_distance(cands, k),
            short,
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct MrptIndex<T> {
    trees: Vec<RpTree<T>>,
    params: IndexParams,
    data: Arc<Dataset<T>>,
}

impl<T: Real> MrptIndex<T> {
    /// Builds `T` trees in parallel; tree `t` draws from stream `t` of `seed`.
    pub fn build(data: Arc<Dataset<T>>, params: IndexParams, seed: RngSeed) -> Result<Self> {
        params.validate(data.len())?;
        let trees = (0..params.trees)
            .into_par_iter()
            .map(|t| RpTree::build(&data, params.depth, params.sparsity, &mut seed.stream(t as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            trees,
            params,
            data,
        })
    }

    pub fn trees(&self) -> &[RpTree<T>] {
        &self.trees
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn data(&self) -> &Arc<Dataset<T>> {
        &self.data
    }

    /// Points co-located with `q` in at least `vote_threshold` trees.
    pub fn candidate_set(&self, q: &[T], vote_threshold: usize) -> Result<CandidateSet> {
        self.data.check_query(q)?;
        if vote_threshold == 0 || vote_threshold > self.trees.len() {
            return Err(Error::InvalidParameter(format!(
                "vote threshold {vote_threshold} outside [1, {}]",
                self.trees.len()
            )));
        }
        let nu = vote_threshold as u32;
        let n = self.data.len();

        let mut out = CandidateSet::default();
        if n <= self.params.vote_map_threshold {
            let mut votes = vec![0u32; n];
            for tree in &self.trees {
                for &j in tree.query(q)? {
                    votes[j] += 1;
                }
            }
            for (j, &v) in votes.iter().enumerate() {
                if v >= nu {
                    out.indices.push(j);
                    out.votes.push(v);
                }
            }
        } else {
            let mut votes: HashMap<usize, u32> = HashMap::new();
            for tree in &self.trees {
                for &j in tree.query(q)? {
                    *votes.entry(j).or_default() += 1;
                }
            }
            let mut hits: Vec<(usize, u32)> = votes.into_iter().filter(|&(_, v)| v >= nu).collect();
            hits.sort_unstable();
            (out.indices, out.votes) = hits.into_iter().unzip();
        }
        Ok(out)
    }

    /// Approximate k-NN: voting followed by exact refinement.
    pub fn query(&self, q: &[T], k: usize, vote_threshold: usize) -> Result<Neighbors<T>> {
        let s = self.candidate_set(q, vote_threshold)?;
        exact_knn(&self.data, q, k, &s.indices)
    }
}

/// The `k` points of `candidates` nearest to `q`, using precomputed norms.
pub fn exact_knn<T: Real>(
    data: &Dataset<T>,
    q: &[T],
    k: usize,
    candidates: &[usize],
) -> Result<Neighbors<T>> {
    data.check_query(q)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be ≥ 1".into()));
    }
    let q_norm = norm(q);
    let cands = candidates
        .iter()
        .map(|&j| {
            if j >= data.len() {
                return Err(Error::IndexOutOfRange {
                    index: j,
                    len: data.len(),
                });
            }
            let d = euclidean_dist_via_dot(data.norm(j), q_norm, dot(data.point(j), q))?;
            Ok((j, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Neighbors::from_candidates(cands, k))
}

/// `|found ∩ truth| / k`, counting indices only.
pub fn recall<T>(found: &Neighbors<T>, truth: &Neighbors<T>, k: usize) -> Result<f64> {
    if k == 0 || truth.entries.len() < k {
        return Err(Error::InvalidParameter(format!(
            "ground truth has {} entries, need k = {k}",
            truth.entries.len()
        )));
    }
    let mut true_ids: Vec<usize> = truth.entries[..k].iter().map(|e| e.0).collect();
    true_ids.sort_unstable();
    let hits = found
        .entries
        .iter()
        .take(k)
        .filter(|e| true_ids.binary_search(&e.0).is_ok())
        .count();
    Ok(hits as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nb(ids: &[usize]) -> Neighbors<f64> {
        Neighbors {
            entries: ids.iter().enumerate().map(|(r, &i)| (i, r as f64)).collect(),
            short: false,
        }
    }

    #[test]
    fn recall_counts_intersection() {
        let truth = nb(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(recall(&truth, &truth, 10).unwrap(), 1.0);
        assert_eq!(recall(&nb(&[10, 11, 12, 13, 14, 15, 16, 17, 18, 19]), &truth, 10).unwrap(), 0.0);
        assert!((recall(&nb(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 42]), &truth, 10).unwrap() - 0.9).abs() < 1e-15);
        assert!(recall(&truth, &nb(&[1, 2]), 10).is_err());
    }

    #[test]
    fn presets() {
        let stl = Preset::stl10();
        assert_eq!((stl.params.depth, stl.vote_threshold, stl.params.trees), (7, 25, 900));
        assert_eq!(stl.params.sparsity, 0.01);
        let gist = Preset::by_name("GIST").unwrap();
        assert_eq!((gist.params.depth, gist.vote_threshold, gist.params.trees), (9, 10, 900));
        assert_eq!(gist.params.sparsity, 0.032);
        assert!(Preset::by_name("sift").is_none());
    }

    #[test]
    fn short_results_are_flagged() {
        let data = Dataset::from_points(&[[0.0], [1.0], [2.0]]).unwrap();
        let res = exact_knn(&data, &[0.1], 5, &[2, 0]).unwrap();
        assert!(res.short);
        assert_eq!(res.indices(), vec![0, 2]);
        assert!(exact_knn(&data, &[0.1, 0.2], 1, &[0]).is_err());
    }
}
