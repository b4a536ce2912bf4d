//! Class prototypes and class-similarity structures.
//!
//! A structure source (one semantic space, or the visual features) yields three
//! matrices: seen-seen `W_s`, unseen-unseen `W_u` and seen-unseen `W_su`. Each
//! entry is `exp(-d(z_i, z_j))` for the Mahalanobis distance
//! `d = (z_i - z_j)ᵀ Σ⁻¹ (z_i - z_j)`, divided by the sum over all entries of
//! that matrix. Sources are combined with simplex weights: `β` for `W_s`,
//! `γ` for `W_u` and `W_su`. The visual source is always the last one.

use serde::{Deserialize, Serialize};

use crate::error::{ClaError, Result};
use crate::linalg::{covariance, ridge_solve, DenseMatrix};

/// Name used for the visual-prototype source.
pub const VISUAL_SOURCE: &str = "visual";

/// Tolerance on `Σ w = 1` for fusion weights.
pub const SIMPLEX_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureConfig {
    /// Normalize each row to sum 1 instead of the whole matrix.
    pub row_normalize: bool,
    /// Relative ridge `ε` in `Σ + ε·(tr Σ / dim)·I` before inversion.
    ///
    /// With no more prototypes than dimensions plus one, the unregularized
    /// Mahalanobis distance between any two prototypes is the same (`2n`),
    /// so a small ridge leaves structures flat and dominated by noise; the
    /// default shrinks towards the average variance.
    pub covariance_ridge: f64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            row_normalize: false,
            covariance_ridge: 1.0,
        }
    }
}

/// Per-class prototype columns for one space.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPrototypes {
    pub space_name: String,
    /// `dim x k_s`
    pub seen: DenseMatrix,
    /// `dim x k_u`; columns with `available[c] == false` are zero.
    pub unseen: DenseMatrix,
    pub available: Vec<bool>,
}

/// Similarity matrices of one structure source.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureSet {
    pub source_name: String,
    /// `k_s x k_s`
    pub w_s: DenseMatrix,
    /// `k_u x k_u`
    pub w_u: DenseMatrix,
    /// `k_s x k_u`
    pub w_su: DenseMatrix,
}

impl StructureSet {
    pub fn k_seen(&self) -> usize {
        self.w_s.rows()
    }

    pub fn k_unseen(&self) -> usize {
        self.w_u.rows()
    }

    /// True when the unseen parts are the all-zero placeholder.
    pub fn unseen_is_placeholder(&self) -> bool {
        self.w_u.max_abs() == 0.0 && self.w_su.max_abs() == 0.0
    }
}

/// Simplex weights over the `M + 1` structure sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    /// Weights for the seen structure.
    pub beta: Vec<f64>,
    /// Weights for the unseen and cross structures.
    pub gamma: Vec<f64>,
}

impl FusionWeights {
    pub fn uniform(sources: usize) -> Self {
        let w = vec![1.0 / sources as f64; sources];
        FusionWeights {
            beta: w.clone(),
            gamma: w,
        }
    }

    /// Single-weight fusion over semantic sources only: the visual weight is
    /// pinned to zero and `alpha` is used for every structure.
    pub fn semantic_only(alpha: &[f64]) -> Result<Self> {
        let mut w = alpha.to_vec();
        w.push(0.0);
        check_simplex(&w, "alpha")?;
        Ok(FusionWeights {
            beta: w.clone(),
            gamma: w,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != self.gamma.len() {
            return Err(ClaError::Validation(format!(
                "beta has {} components, gamma has {}",
                self.beta.len(),
                self.gamma.len()
            )));
        }
        check_simplex(&self.beta, "beta")?;
        check_simplex(&self.gamma, "gamma")
    }
}

/// Checks `w ≥ 0` and `Σ w = 1` within [`SIMPLEX_TOLERANCE`].
pub fn check_simplex(w: &[f64], name: &str) -> Result<()> {
    if w.is_empty() {
        return Err(ClaError::Validation(format!("{name} is empty")));
    }
    if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(ClaError::Validation(format!(
            "{name} has invalid component {v}"
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(ClaError::Validation(format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Mean feature column per class, with a flag for classes that have samples.
pub fn class_prototypes(
    x: &DenseMatrix,
    labels: &[usize],
    k: usize,
) -> Result<(DenseMatrix, Vec<bool>)> {
    if labels.len() != x.cols() {
        return Err(ClaError::Dimension(format!(
            "{} labels for {} samples",
            labels.len(),
            x.cols()
        )));
    }
    let d = x.rows();
    let mut sums = DenseMatrix::zeros(d, k);
    let mut counts = vec![0usize; k];
    for (n, &c) in labels.iter().enumerate() {
        if c >= k {
            return Err(ClaError::Validation(format!(
                "label {c} of sample {n} is outside [0, {k})"
            )));
        }
        counts[c] += 1;
        for i in 0..d {
            sums[(i, c)] += x[(i, n)];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for i in 0..d {
                sums[(i, c)] *= inv;
            }
        }
    }
    Ok((sums, counts.into_iter().map(|n| n > 0).collect()))
}

/// Inverse of `Σ + ε·(tr Σ / dim)·I` for the covariance of the given columns.
///
/// Falls back to the identity when every column is identical, where all
/// pairwise differences vanish anyway.
pub fn regularized_precision(z: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    let dim = z.rows();
    let mut sigma = covariance(z)?;
    let mean_var = sigma.trace() / dim as f64;
    if mean_var.is_nan() || mean_var <= 0.0 {
        return Ok(DenseMatrix::identity(dim));
    }
    sigma.add_diagonal(ridge * mean_var);
    let inv = ridge_solve(&sigma, &DenseMatrix::identity(dim), 0.0)?;
    // Symmetrize away rounding so distances are exactly symmetric.
    Ok(DenseMatrix::from_fn(dim, dim, |i, j| {
        0.5 * (inv[(i, j)] + inv[(j, i)])
    }))
}

fn mahalanobis(a: &[f64], b: &[f64], sigma_inv: &DenseMatrix, diff: &mut [f64]) -> f64 {
    for ((d, x), y) in diff.iter_mut().zip(a).zip(b) {
        *d = x - y;
    }
    let mut acc = 0.0;
    for i in 0..diff.len() {
        if diff[i] == 0.0 {
            continue;
        }
        let row = sigma_inv.row(i);
        let mut s = 0.0;
        for (j, &dj) in diff.iter().enumerate() {
            s += row[j] * dj;
        }
        acc += diff[i] * s;
    }
    acc
}

/// Pairwise Mahalanobis distances between the columns of `z_rows` and `z_cols`.
pub fn distance_matrix(
    z_rows: &DenseMatrix,
    z_cols: &DenseMatrix,
    sigma_inv: &DenseMatrix,
) -> Result<DenseMatrix> {
    let dim = z_rows.rows();
    if z_cols.rows() != dim || sigma_inv.shape() != (dim, dim) {
        return Err(ClaError::Dimension(format!(
            "prototype dims {} and {} with a {}x{} precision matrix",
            dim,
            z_cols.rows(),
            sigma_inv.rows(),
            sigma_inv.cols()
        )));
    }
    let a = z_rows.transpose();
    let b = z_cols.transpose();
    let mut diff = vec![0.0; dim];
    let mut dist = DenseMatrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            let d = mahalanobis(a.row(i), b.row(j), sigma_inv, &mut diff);
            if !d.is_finite() {
                return Err(ClaError::Numeric(format!("distance ({i}, {j}) is {d}")));
            }
            dist[(i, j)] = d;
        }
    }
    Ok(dist)
}

/// Turns distances into normalized similarities. Entries where `mask` is false
/// are forced to zero and excluded from the normalization.
fn normalize_similarities(
    dist: &DenseMatrix,
    mask: impl Fn(usize, usize) -> bool,
    row_normalize: bool,
) -> DenseMatrix {
    let (r, c) = dist.shape();
    let mut w = DenseMatrix::zeros(r, c);
    if row_normalize {
        for i in 0..r {
            let dmin = (0..c)
                .filter(|&j| mask(i, j))
                .map(|j| dist[(i, j)])
                .fold(f64::INFINITY, f64::min);
            if !dmin.is_finite() {
                continue;
            }
            let mut total = 0.0;
            for j in (0..c).filter(|&j| mask(i, j)) {
                let e = (-(dist[(i, j)] - dmin)).exp();
                w[(i, j)] = e;
                total += e;
            }
            for j in 0..c {
                w[(i, j)] /= total;
            }
        }
        return w;
    }
    // Shifting by the smallest distance leaves the ratios unchanged and keeps
    // the largest term at exp(0) = 1, so the sum never underflows.
    let dmin = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .filter(|&(i, j)| mask(i, j))
        .map(|(i, j)| dist[(i, j)])
        .fold(f64::INFINITY, f64::min);
    if !dmin.is_finite() {
        return w;
    }
    let mut total = 0.0;
    for i in 0..r {
        for j in 0..c {
            if mask(i, j) {
                let e = (-(dist[(i, j)] - dmin)).exp();
                w[(i, j)] = e;
                total += e;
            }
        }
    }
    w.map(|v| v / total)
}

/// Normalized Gaussian-of-Mahalanobis similarities between two prototype sets.
///
/// Entry `(i, j)` is `exp(-d_ij) / Σ_{a,b} exp(-d_ab)`.
pub fn similarity_matrix(
    z_rows: &DenseMatrix,
    z_cols: &DenseMatrix,
    sigma_inv: &DenseMatrix,
) -> Result<DenseMatrix> {
    similarity_matrix_with(z_rows, z_cols, sigma_inv, false)
}

/// [`similarity_matrix`] with a choice of global or per-row normalization.
pub fn similarity_matrix_with(
    z_rows: &DenseMatrix,
    z_cols: &DenseMatrix,
    sigma_inv: &DenseMatrix,
    row_normalize: bool,
) -> Result<DenseMatrix> {
    let dist = distance_matrix(z_rows, z_cols, sigma_inv)?;
    Ok(normalize_similarities(&dist, |_, _| true, row_normalize))
}

/// Structures of one semantic space from its seen and unseen class columns.
pub fn build_semantic_structures(
    name: &str,
    seen: &DenseMatrix,
    unseen: &DenseMatrix,
    config: &StructureConfig,
) -> Result<StructureSet> {
    if seen.rows() != unseen.rows() {
        return Err(ClaError::Dimension(format!(
            "semantic space '{name}': seen dim {} != unseen dim {}",
            seen.rows(),
            unseen.rows()
        )));
    }
    let all = seen.hcat(unseen)?;
    let sigma_inv = regularized_precision(&all, config.covariance_ridge)?;
    let rn = config.row_normalize;
    Ok(StructureSet {
        source_name: name.to_string(),
        w_s: similarity_matrix_with(seen, seen, &sigma_inv, rn)?,
        w_u: similarity_matrix_with(unseen, unseen, &sigma_inv, rn)?,
        w_su: similarity_matrix_with(seen, unseen, &sigma_inv, rn)?,
    })
}

/// Structures of the visual source. Unseen prototypes flagged unavailable are
/// masked out of `W_u` and `W_su`; with none available both are zero.
pub fn build_visual_structures(
    seen: &DenseMatrix,
    unseen: &DenseMatrix,
    available: &[bool],
    config: &StructureConfig,
) -> Result<StructureSet> {
    if seen.rows() != unseen.rows() {
        return Err(ClaError::Dimension(format!(
            "visual prototypes: seen dim {} != unseen dim {}",
            seen.rows(),
            unseen.rows()
        )));
    }
    if available.len() != unseen.cols() {
        return Err(ClaError::Dimension(format!(
            "availability mask has {} entries for {} unseen classes",
            available.len(),
            unseen.cols()
        )));
    }
    let (k_s, k_u) = (seen.cols(), unseen.cols());
    let idx: Vec<usize> = (0..k_u).filter(|&c| available[c]).collect();
    let all = seen.hcat(&unseen.select_columns(&idx))?;
    let sigma_inv = regularized_precision(&all, config.covariance_ridge)?;
    let rn = config.row_normalize;

    let w_s = similarity_matrix_with(seen, seen, &sigma_inv, rn)?;
    if idx.is_empty() {
        return Ok(StructureSet {
            source_name: VISUAL_SOURCE.to_string(),
            w_s,
            w_u: DenseMatrix::zeros(k_u, k_u),
            w_su: DenseMatrix::zeros(k_s, k_u),
        });
    }
    let d_u = distance_matrix(unseen, unseen, &sigma_inv)?;
    let d_su = distance_matrix(seen, unseen, &sigma_inv)?;
    Ok(StructureSet {
        source_name: VISUAL_SOURCE.to_string(),
        w_s,
        w_u: normalize_similarities(&d_u, |i, j| available[i] && available[j], rn),
        w_su: normalize_similarities(&d_su, |_, j| available[j], rn),
    })
}

/// Visual structures before any unseen label is known.
pub fn visual_placeholder(
    seen: &DenseMatrix,
    k_unseen: usize,
    config: &StructureConfig,
) -> Result<StructureSet> {
    let unseen = DenseMatrix::zeros(seen.rows(), k_unseen);
    build_visual_structures(seen, &unseen, &vec![false; k_unseen], config)
}

fn check_sources(sources: &[StructureSet], weights: usize) -> Result<()> {
    let first = sources
        .first()
        .ok_or_else(|| ClaError::Validation("no structure sources".into()))?;
    if weights != sources.len() {
        return Err(ClaError::Validation(format!(
            "{weights} weights for {} structure sources",
            sources.len()
        )));
    }
    for s in sources {
        if s.w_s.shape() != first.w_s.shape()
            || s.w_u.shape() != first.w_u.shape()
            || s.w_su.shape() != first.w_su.shape()
        {
            return Err(ClaError::Dimension(format!(
                "source '{}' has shapes ({:?}, {:?}, {:?}), expected ({:?}, {:?}, {:?})",
                s.source_name,
                s.w_s.shape(),
                s.w_u.shape(),
                s.w_su.shape(),
                first.w_s.shape(),
                first.w_u.shape(),
                first.w_su.shape()
            )));
        }
    }
    Ok(())
}

/// `Σ_i w_i M_i` for the selected matrix of each source.
pub fn weighted_sum(
    sources: &[StructureSet],
    weights: &[f64],
    pick: impl Fn(&StructureSet) -> &DenseMatrix,
) -> Result<DenseMatrix> {
    check_sources(sources, weights.len())?;
    let (r, c) = pick(&sources[0]).shape();
    let mut acc = DenseMatrix::zeros(r, c);
    for (s, &w) in sources.iter().zip(weights) {
        acc.axpy(w, pick(s))?;
    }
    Ok(acc)
}

/// Fuses `M + 1` sources: `W_s` with `β`, `W_u` and `W_su` with `γ`.
pub fn fuse_structures(sources: &[StructureSet], weights: &FusionWeights) -> Result<StructureSet> {
    check_sources(sources, weights.beta.len())?;
    weights.validate()?;
    Ok(StructureSet {
        source_name: "fused".to_string(),
        w_s: weighted_sum(sources, &weights.beta, |s| &s.w_s)?,
        w_u: weighted_sum(sources, &weights.gamma, |s| &s.w_u)?,
        w_su: weighted_sum(sources, &weights.gamma, |s| &s.w_su)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn prototypes_one_sample_per_class() {
        let x = random(3, 4, 1);
        let (p, avail) = class_prototypes(&x, &[0, 1, 2, 3], 4).unwrap();
        assert_eq!(p, x);
        assert!(avail.iter().all(|&a| a));
    }

    #[test]
    fn prototypes_identical_samples_and_empty_class() {
        let x = DenseMatrix::from_rows(&[&[2.0, 2.0], &[-1.0, -1.0]]);
        let (p, avail) = class_prototypes(&x, &[1, 1], 3).unwrap();
        assert_eq!(p.column(1), vec![2.0, -1.0]);
        assert_eq!(p.column(0), vec![0.0, 0.0]);
        assert_eq!(avail, vec![false, true, false]);
        assert!(matches!(
            class_prototypes(&x, &[0, 3], 3),
            Err(ClaError::Validation(_))
        ));
    }

    #[test]
    fn prototypes_match_group_by_loop() {
        let x = random(4, 5, 2);
        let labels = [2, 0, 2, 1, 0];
        let (p, _) = class_prototypes(&x, &labels, 3).unwrap();
        for c in 0..3 {
            let members: Vec<usize> = (0..5).filter(|&n| labels[n] == c).collect();
            for i in 0..4 {
                let mean = members.iter().map(|&n| x[(i, n)]).sum::<f64>() / members.len() as f64;
                assert!((p[(i, c)] - mean).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn uniform_and_single_entry_similarities() {
        let z = DenseMatrix::from_rows(&[&[0.5, 0.5], &[1.0, 1.0]]);
        let w = similarity_matrix(&z, &z, &DenseMatrix::identity(2)).unwrap();
        assert!(w.as_slice().iter().all(|&v| v == 0.25));
        let one = DenseMatrix::from_rows(&[&[3.0]]);
        let w = similarity_matrix(&one, &one, &DenseMatrix::identity(1)).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn two_point_similarity_by_hand() {
        let z = DenseMatrix::from_rows(&[&[0.0, 1.0]]);
        let w = similarity_matrix(&z, &z, &DenseMatrix::identity(1)).unwrap();
        let e = (-1.0f64).exp();
        let total = 2.0 + 2.0 * e;
        let expected = [1.0 / total, e / total, e / total, 1.0 / total];
        for (got, want) in w.as_slice().iter().zip(expected) {
            assert!((got - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn semantic_cross_structure_by_hand() {
        // Prototypes 0, 1 (seen) and 2 (unseen): covariance 2/3 with 1/n.
        let seen = DenseMatrix::from_rows(&[&[0.0, 1.0]]);
        let unseen = DenseMatrix::from_rows(&[&[2.0]]);
        for ridge in [1e-6, 1.0] {
            let config = StructureConfig {
                covariance_ridge: ridge,
                ..Default::default()
            };
            let s = build_semantic_structures("att", &seen, &unseen, &config).unwrap();
            let precision = 1.0 / ((2.0 / 3.0) * (1.0 + ridge));
            let e0 = (-4.0f64 * precision).exp();
            let e1 = (-precision).exp();
            assert!((s.w_su[(0, 0)] - e0 / (e0 + e1)).abs() <= 1e-14);
            assert!((s.w_su[(1, 0)] - e1 / (e0 + e1)).abs() <= 1e-14);
            assert_eq!(s.w_u.as_slice(), &[1.0]);
        }
    }

    #[test]
    fn few_prototypes_are_equidistant_without_shrinkage() {
        // n points in general position in more than n - 1 dimensions: the
        // projection onto the centered row space makes every squared
        // distance 2n.
        let z = random(16, 12, 5);
        let precision = regularized_precision(&z, 1e-9).unwrap();
        let d = distance_matrix(&z, &z, &precision).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 0.0 } else { 24.0 };
                assert!((d[(i, j)] - want).abs() < 1e-4, "{i},{j}: {}", d[(i, j)]);
            }
        }
        let shrunk = regularized_precision(&z, 1.0).unwrap();
        let d = distance_matrix(&z, &z, &shrunk).unwrap();
        assert!((d[(0, 1)] - d[(0, 2)]).abs() > 1e-2);
    }

    #[test]
    fn equal_prototypes_give_uniform_structures() {
        let seen = DenseMatrix::from_fn(3, 4, |_, _| 1.0);
        let unseen = DenseMatrix::from_fn(3, 2, |_, _| 1.0);
        let s =
            build_semantic_structures("w2v", &seen, &unseen, &StructureConfig::default()).unwrap();
        assert!(s
            .w_s
            .as_slice()
            .iter()
            .all(|&v| (v - 1.0 / 16.0).abs() < 1e-15));
        assert!(s.w_u.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!(s.w_su.as_slice().iter().all(|&v| (v - 0.125).abs() < 1e-15));

        let s = build_semantic_structures(
            "one",
            &DenseMatrix::from_rows(&[&[1.0], &[2.0]]),
            &DenseMatrix::from_rows(&[&[5.0], &[-2.0]]),
            &StructureConfig::default(),
        )
        .unwrap();
        assert_eq!(s.w_s.as_slice(), &[1.0]);
        assert_eq!(s.w_u.as_slice(), &[1.0]);
        assert_eq!(s.w_su.as_slice(), &[1.0]);
    }

    #[test]
    fn visual_placeholder_has_zero_unseen_parts() {
        let seen = random(4, 3, 3);
        let s = visual_placeholder(&seen, 2, &StructureConfig::default()).unwrap();
        assert!(s.unseen_is_placeholder());
        assert!((s.w_s.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn visual_masking_zeroes_unassigned_class() {
        let seen = random(2, 3, 4);
        let unseen = DenseMatrix::from_rows(&[&[0.0, 9.0, 1.0], &[0.0, 9.0, -1.0]]);
        let avail = [true, false, true];
        let config = StructureConfig::default();
        let s = build_visual_structures(&seen, &unseen, &avail, &config).unwrap();
        for k in 0..3 {
            assert_eq!(s.w_u[(1, k)], 0.0);
            assert_eq!(s.w_u[(k, 1)], 0.0);
        }
        for i in 0..3 {
            assert_eq!(s.w_su[(i, 1)], 0.0);
        }
        assert!((s.w_u.sum() - 1.0).abs() < 1e-12);
        assert!((s.w_su.sum() - 1.0).abs() < 1e-12);

        // Same entries as building from the available classes alone.
        let reduced = build_visual_structures(
            &seen,
            &unseen.select_columns(&[0, 2]),
            &[true, true],
            &config,
        )
        .unwrap();
        assert!((s.w_u[(0, 2)] - reduced.w_u[(0, 1)]).abs() < 1e-15);
        assert!((s.w_su[(2, 2)] - reduced.w_su[(2, 1)]).abs() < 1e-15);

        let all = build_visual_structures(
            &seen,
            &DenseMatrix::from_fn(2, 3, |_, _| 0.7),
            &[true, true, true],
            &config,
        )
        .unwrap();
        assert!(all
            .w_u
            .as_slice()
            .iter()
            .all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn row_normalization_option() {
        let z = random(2, 4, 5);
        let w = similarity_matrix_with(&z, &z, &DenseMatrix::identity(2), true).unwrap();
        for i in 0..4 {
            assert!((w.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn structure(seed: u64) -> StructureSet {
        let seen = random(3, 4, seed);
        let unseen = random(3, 2, seed + 1000);
        build_semantic_structures(
            &format!("s{seed}"),
            &seen,
            &unseen,
            &StructureConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn one_hot_fusion_and_identical_sources() {
        let a = structure(1);
        let b = structure(2);
        let fused = fuse_structures(
            &[a.clone(), b],
            &FusionWeights {
                beta: vec![1.0, 0.0],
                gamma: vec![1.0, 0.0],
            },
        )
        .unwrap();
        assert_eq!(fused.w_s, a.w_s);
        assert_eq!(fused.w_u, a.w_u);
        assert_eq!(fused.w_su, a.w_su);

        let fused = fuse_structures(
            &[a.clone(), a.clone()],
            &FusionWeights {
                beta: vec![0.3, 0.7],
                gamma: vec![0.6, 0.4],
            },
        )
        .unwrap();
        assert!(fused.w_s.sub(&a.w_s).unwrap().max_abs() < 1e-15);
        assert!(fused.w_su.sub(&a.w_su).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn fusion_matches_elementwise_loop() {
        let sources = [structure(3), structure(4), structure(5)];
        let beta = [0.5, 0.3, 0.2];
        let gamma = [0.1, 0.1, 0.8];
        let fused = fuse_structures(
            &sources,
            &FusionWeights {
                beta: beta.to_vec(),
                gamma: gamma.to_vec(),
            },
        )
        .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|s| beta[s] * sources[s].w_s[(i, j)]).sum();
                assert!((fused.w_s[(i, j)] - want).abs() <= 1e-14);
            }
            for j in 0..2 {
                let want: f64 = (0..3).map(|s| gamma[s] * sources[s].w_su[(i, j)]).sum();
                assert!((fused.w_su[(i, j)] - want).abs() <= 1e-14);
            }
        }
        assert!((fused.w_s.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fusion_rejects_bad_weights_and_shapes() {
        let a = structure(1);
        let bad_len = FusionWeights::uniform(3);
        assert!(matches!(
            fuse_structures(&[a.clone(), a.clone()], &bad_len),
            Err(ClaError::Validation(_))
        ));
        let negative = FusionWeights {
            beta: vec![1.5, -0.5],
            gamma: vec![0.5, 0.5],
        };
        assert!(fuse_structures(&[a.clone(), a.clone()], &negative).is_err());
        let mut other = a.clone();
        other.w_u = DenseMatrix::zeros(3, 3);
        assert!(matches!(
            fuse_structures(&[a, other], &FusionWeights::uniform(2)),
            Err(ClaError::Dimension(_))
        ));
    }

    #[test]
    fn semantic_only_pins_visual_weight() {
        let w = FusionWeights::semantic_only(&[0.25, 0.75]).unwrap();
        assert_eq!(w.beta, vec![0.25, 0.75, 0.0]);
        assert!(FusionWeights::semantic_only(&[0.5, 0.6]).is_err());
    }
}
