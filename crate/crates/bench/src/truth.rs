use coded_mrpt::{linalg::cmp_by_distance, Dataset, Error, Neighbors, Result};
use rayon::prelude::*;

/// Exact k-NN by full scan with direct differences; ties broken by index.
pub fn ground_truth(data: &Dataset<f64>, queries: &[Vec<f64>], k: usize) -> Result<Vec<Neighbors<f64>>> {
    if k == 0 || k > data.len() {
        return Err(Error::InvalidParameter(format!("k = {k} outside [1, {}]", data.len())));
    }
    for q in queries {
        data.check_query(q)?;
    }
    Ok(queries
        .par_iter()
        .map(|q| {
            let mut all: Vec<(usize, f64)> = (0..data.len())
                .map(|j| {
                    let s: f64 = data.point(j).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (j, s.sqrt())
                })
                .collect();
            all.sort_by(cmp_by_distance);
            all.truncate(k);
            Neighbors { entries: all, short: false }
        })
        .collect())
}
