//! Seeded synthetic zero-shot benchmarks.
//!
//! Seen class means are drawn from a standard normal in `d` dimensions, so
//! the expected distance between two of them is `√(2d)` while a noise vector
//! has norm about `σ√d`; for `σ` well below `√2` the classes stay apart.
//! Each unseen class mean is the midpoint of two seen means (pairs taken
//! from a seeded shuffle, disjoint while `k_s ≥ 2 k_u`), so unseen classes
//! are described by what the seen classes share, as zero-shot transfer
//! requires. Each semantic space is a random linear image of the class means
//! plus `σ/2` noise, so its class structure mirrors the visual one exactly at
//! `σ = 0`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{SemanticSpace, ZslDataset};
use crate::error::{ClaError, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub feature_dim: usize,
    pub k_seen: usize,
    pub k_unseen: usize,
    /// Samples per class, for seen and unseen classes alike.
    pub samples_per_class: usize,
    pub semantic_spaces: usize,
    pub semantic_dim: usize,
    /// Noise level `σ`.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            feature_dim: 16,
            k_seen: 8,
            k_unseen: 4,
            samples_per_class: 25,
            semantic_spaces: 2,
            semantic_dim: 16,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("feature_dim", self.feature_dim),
            ("samples_per_class", self.samples_per_class),
            ("semantic_spaces", self.semantic_spaces),
            ("semantic_dim", self.semantic_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ClaError::Validation(format!("{name} must be >= 1")));
        }
        if self.k_seen < 2 || self.k_unseen > self.k_seen * (self.k_seen - 1) / 2 {
            return Err(ClaError::Validation(format!(
                "{} unseen classes need at least as many distinct pairs of seen classes; k_seen = {}",
                self.k_unseen, self.k_seen
            )));
        }
        if self.k_unseen < 2 {
            return Err(ClaError::Validation(format!(
                "k_unseen must be >= 2, got {}",
                self.k_unseen
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(ClaError::Validation(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Samples of consecutive classes, `per_class` columns each.
fn draw_samples(
    means: &DenseMatrix,
    classes: std::ops::Range<usize>,
    per_class: usize,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> (DenseMatrix, Vec<usize>) {
    let first = classes.start;
    let labels: Vec<usize> = classes
        .flat_map(|c| std::iter::repeat_n(c - first, per_class))
        .collect();
    let mut x = DenseMatrix::zeros(means.rows(), labels.len());
    for (n, &c) in labels.iter().enumerate() {
        for i in 0..means.rows() {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, n)] = means[(i, first + c)] + noise * z;
        }
    }
    (x, labels)
}

/// Distinct pairs of seen classes: disjoint consecutive pairs of `order`
/// first, then every remaining pair.
fn parent_pairs(order: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = order.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            let p = (order[i], order[j]);
            if !pairs.iter().any(|&(a, b)| (a, b) == p || (b, a) == p) {
                pairs.push(p);
            }
        }
    }
    pairs
}

/// Draws a dataset; a pure function of `config`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<ZslDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (k_s, k_u) = (config.k_seen, config.k_unseen);
    let seen_means = gaussian(config.feature_dim, k_s, &mut rng);
    let mut order: Vec<usize> = (0..k_s).collect();
    order.shuffle(&mut rng);
    let mut means = DenseMatrix::zeros(config.feature_dim, k_s + k_u);
    for c in 0..k_s {
        means.set_column(c, &seen_means.column(c));
    }
    for (v, &(a, b)) in parent_pairs(&order).iter().take(k_u).enumerate() {
        let mid: Vec<f64> = (0..config.feature_dim)
            .map(|i| 0.5 * (seen_means[(i, a)] + seen_means[(i, b)]))
            .collect();
        means.set_column(k_s + v, &mid);
    }

    let semantic_spaces = (0..config.semantic_spaces)
        .map(|m| {
            let map = gaussian(config.semantic_dim, config.feature_dim, &mut rng);
            let noise =
                gaussian(config.semantic_dim, k_s + k_u, &mut rng).scale(config.noise / 2.0);
            let protos = map.matmul(&means)?.add(&noise)?;
            Ok(SemanticSpace {
                name: format!("semantic{m}"),
                seen: protos.select_columns(&(0..k_s).collect::<Vec<_>>()),
                unseen: protos.select_columns(&(k_s..k_s + k_u).collect::<Vec<_>>()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (seen_features, seen_labels) = draw_samples(
        &means,
        0..k_s,
        config.samples_per_class,
        config.noise,
        &mut rng,
    );
    let (unseen_features, unseen_truth) = draw_samples(
        &means,
        k_s..k_s + k_u,
        config.samples_per_class,
        config.noise,
        &mut rng,
    );

    let dataset = ZslDataset {
        seen_features,
        seen_labels,
        unseen_features,
        unseen_truth: Some(unseen_truth),
        semantic_spaces,
        k_seen: k_s,
        k_unseen: k_u,
    };
    dataset.validate()?;
    Ok(dataset)
}
