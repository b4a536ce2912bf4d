//! Helpers shared by the integration tests.
#![allow(dead_code)]

use cla_core::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Symmetric positive definite with eigenvalues bounded below by `floor`.
pub fn spd(n: usize, floor: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = gaussian(n, n, rng);
    let mut a = g.matmul_t(&g).unwrap();
    a.add_diagonal(floor);
    a
}

pub fn bits(m: &DenseMatrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

/// Brute-force Top-n: sort each column's classes by descending score, lower
/// index first on ties, and check the truth's rank.
pub fn sort_oracle_top_n(
    scores: &DenseMatrix,
    truth: &[usize],
    n: usize,
) -> (f64, Vec<Option<f64>>) {
    let k = scores.rows();
    let mut hits = vec![0usize; k];
    let mut counts = vec![0usize; k];
    for (j, &t) in truth.iter().enumerate() {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            scores[(b, j)]
                .partial_cmp(&scores[(a, j)])
                .unwrap()
                .then(a.cmp(&b))
        });
        counts[t] += 1;
        if order[..n].contains(&t) {
            hits[t] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| (counts[c] > 0).then(|| 100.0 * hits[c] as f64 / counts[c] as f64))
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    (
        present.iter().sum::<f64>() / present.len() as f64,
        per_class,
    )
}
