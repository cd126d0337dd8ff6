use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::Serialize;

use super::CodeConfig;
use crate::rng::RngSeed;
use crate::scalar::Real;

pub const DEFAULT_WARNING_THRESHOLD: f64 = 1e8;

/// Beyond this many `(2m−1)`-subsets the search samples instead of
/// enumerating.
const EXHAUSTIVE_LIMIT: usize = 20_000;
const SAMPLED_SUBSETS: usize = 5_000;

/// 2-norm condition number of the worst interpolation system a decoder can
/// face under a code configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditioningReport {
    pub condition: f64,
    /// Worker ids of the worst subset found.
    pub worst_subset: Vec<usize>,
    pub warning: bool,
    pub threshold: f64,
    /// Whether every subset was examined.
    pub exhaustive: bool,
}

fn vandermonde_cond(nodes: &[f64]) -> f64 {
    let n = nodes.len();
    let v = DMatrix::from_fn(n, n, |i, k| nodes[i].powi(k as i32));
    let sv = v.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Lexicographic successor of a `k`-subset of `0..n`.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Worst-case Vandermonde condition over `(2m−1)`-subsets of the evaluation
/// points, flagged when above `threshold`.
pub fn conditioning_report<T: Real>(cfg: &CodeConfig<T>, threshold: f64) -> ConditioningReport {
    let betas: Vec<f64> = cfg.betas().iter().map(|b| b.as_f64()).collect();
    let p = betas.len();
    let k = cfg.recovery_threshold();

    let mut worst = (0.0f64, Vec::new());
    let mut consider = |subset: &[usize]| {
        let nodes: Vec<f64> = subset.iter().map(|&i| betas[i]).collect();
        let c = vandermonde_cond(&nodes);
        if c > worst.0 || worst.1.is_empty() {
            worst = (c, subset.to_vec());
        }
    };

    let exhaustive = binomial(p, k) <= EXHAUSTIVE_LIMIT;
    if exhaustive {
        let mut c: Vec<usize> = (0..k).collect();
        loop {
            consider(&c);
            if !next_combination(&mut c, p) {
                break;
            }
        }
    } else {
        // closely spaced nodes are the usual worst case
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| betas[a].total_cmp(&betas[b]));
        for w in order.windows(k) {
            let mut s = w.to_vec();
            s.sort_unstable();
            consider(&s);
        }
        let mut rng = RngSeed(0x636f_6e64).rng();
        for _ in 0..SAMPLED_SUBSETS {
            let mut s = sample(&mut rng, p, k).into_vec();
            s.sort_unstable();
            consider(&s);
        }
    }

    ConditioningReport {
        condition: worst.0,
        worst_subset: worst.1,
        warning: worst.0.is_nan() || worst.0 > threshold,
        threshold,
        exhaustive,
    }
}
