use std::sync::Arc;

use coded_mrpt::{exact_knn, recall, Dataset, IndexParams, MrptIndex, Neighbors, RngSeed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

fn brute_force(data: &Dataset<f64>, q: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..data.len())
        .map(|j| {
            let s: f64 = data.point(j).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (s, j)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|x| x.1).collect()
}

fn index(n: usize, d: usize, params: IndexParams) -> (Arc<Dataset<f64>>, MrptIndex<f64>) {
    let data = Arc::new(Dataset::from_points(&gaussian(n, d, 11)).unwrap());
    let idx = MrptIndex::build(data.clone(), params, RngSeed(5)).unwrap();
    (data, idx)
}

#[test]
fn votes_match_leaf_recount() {
    let (_, idx) = index(500, 16, IndexParams::new(4, 20, 0.25));
    for (i, q) in gaussian(20, 16, 99).iter().enumerate() {
        let nu = 1 + i % 4;
        let mut counts = vec![0u32; 500];
        for t in idx.trees() {
            let leaf = t.leaf_of(q).unwrap();
            for &j in &t.leaves()[leaf] {
                counts[j] += 1;
            }
        }
        let s = idx.candidate_set(q, nu).unwrap();
        let expect: Vec<usize> = (0..500).filter(|&j| counts[j] >= nu as u32).collect();
        assert_eq!(s.indices, expect);
        for (&j, &v) in s.indices.iter().zip(&s.votes) {
            assert_eq!(v, counts[j]);
        }
    }
}

#[test]
fn hashmap_votes_equal_dense_votes() {
    let params = IndexParams::new(4, 15, 0.3);
    let (data, dense) = index(300, 8, params);
    let sparse = MrptIndex::build(
        data,
        IndexParams {
            vote_map_threshold: 0,
            ..params
        },
        RngSeed(5),
    )
    .unwrap();
    for q in gaussian(10, 8, 3) {
        assert_eq!(dense.candidate_set(&q, 2).unwrap(), sparse.candidate_set(&q, 2).unwrap());
    }
}

#[test]
fn candidate_sets_shrink_with_threshold() {
    let (_, idx) = index(400, 10, IndexParams::new(3, 12, 0.5));
    for q in gaussian(10, 10, 8) {
        let mut prev = idx.candidate_set(&q, 1).unwrap().indices;
        for nu in 2..=12 {
            let cur = idx.candidate_set(&q, nu).unwrap().indices;
            assert!(cur.iter().all(|j| prev.contains(j)));
            prev = cur;
        }
    }
}

#[test]
fn full_candidate_set_is_exact() {
    let (data, _) = index(300, 12, IndexParams::new(2, 1, 1.0));
    let all: Vec<usize> = (0..300).collect();
    for q in gaussian(15, 12, 21) {
        let found = exact_knn(&data, &q, 10, &all).unwrap();
        assert_eq!(found.indices(), brute_force(&data, &q, 10));
        let truth = Neighbors::from_candidates(
            brute_force(&data, &q, 10).into_iter().map(|j| (j, 0.0)).collect(),
            10,
        );
        assert_eq!(recall(&found, &truth, 10).unwrap(), 1.0);
    }
}

#[test]
fn in_dataset_query_finds_itself() {
    let (data, idx) = index(256, 8, IndexParams::new(3, 10, 0.5));
    for j in [0, 17, 255] {
        let nn = idx.query(data.point(j), 1, 1).unwrap();
        assert_eq!(nn.entries[0].0, j);
        assert_eq!(nn.entries[0].1, 0.0);
    }
}

#[test]
fn f32_index_runs() {
    let pts: Vec<Vec<f32>> = gaussian(128, 6, 4)
        .into_iter()
        .map(|p| p.into_iter().map(|x| x as f32).collect())
        .collect();
    let data = Arc::new(Dataset::from_points(&pts).unwrap());
    let idx = MrptIndex::build(data.clone(), IndexParams::new(3, 8, 0.5), RngSeed(1)).unwrap();
    let nn = idx.query(data.point(3), 3, 1).unwrap();
    assert_eq!(nn.entries[0].0, 3);
}
