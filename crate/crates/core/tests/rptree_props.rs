use coded_mrpt::{Dataset, RngSeed, RpTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_data(n: usize, d: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Dataset::from_points(&pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leaves_partition_the_points(n in 2usize..300, d in 1usize..12, depth in 1usize..6, seed: u64) {
        prop_assume!(1usize << depth <= n);
        let data = random_data(n, d, seed);
        let tree = RpTree::build_seeded(&data, depth, 0.5, RngSeed(seed)).unwrap();
        let mut all: Vec<usize> = tree.leaves().iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn leaf_sizes_are_balanced(n in 2usize..300, depth in 1usize..6, seed: u64) {
        prop_assume!(1usize << depth <= n);
        let data = random_data(n, 4, seed);
        let tree = RpTree::build_seeded(&data, depth, 1.0, RngSeed(seed)).unwrap();
        let lo = n >> depth;
        let hi = n.div_ceil(1 << depth);
        for leaf in tree.leaves() {
            prop_assert!(leaf.len() >= lo && leaf.len() <= hi, "{} not in [{lo}, {hi}]", leaf.len());
        }
    }

    #[test]
    fn every_point_routes_to_its_own_leaf(n in 2usize..200, d in 1usize..8, depth in 1usize..5, seed: u64) {
        prop_assume!(1usize << depth <= n);
        let data = random_data(n, d, seed);
        let tree = RpTree::build_seeded(&data, depth, 1.0, RngSeed(seed)).unwrap();
        for j in 0..n {
            let leaf = tree.query(data.point(j)).unwrap();
            prop_assert!(leaf.contains(&j));
        }
    }

    #[test]
    fn same_seed_same_tree(seed: u64) {
        let data = random_data(64, 6, 7);
        let a = RpTree::build_seeded(&data, 3, 0.3, RngSeed(seed)).unwrap();
        let b = RpTree::build_seeded(&data, 3, 0.3, RngSeed(seed)).unwrap();
        prop_assert_eq!(a.leaves(), b.leaves());
        prop_assert_eq!(a.medians(), b.medians());
    }
}

#[test]
fn f32_tree_partitions() {
    let pts: Vec<Vec<f32>> = (0..40).map(|i| vec![i as f32, (i * 7 % 11) as f32]).collect();
    let data = Dataset::from_points(&pts).unwrap();
    let tree = RpTree::build_seeded(&data, 3, 1.0, RngSeed(3)).unwrap();
    assert_eq!(tree.leaves().iter().map(Vec::len).sum::<usize>(), 40);
}
