//! Average per-class Top-n accuracy and cross-validation of `λ`.

use std::collections::BTreeMap;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ZslDataset;
use crate::error::{ClaError, Result};
use crate::linalg::DenseMatrix;
use crate::model::{fit_seen, initial_unseen_structures, predict_scores, LabelMatrix};
use crate::structure::{class_prototypes, visual_placeholder, StructureConfig};

/// Largest rank cutoff reported by [`evaluate_scores`].
pub const MAX_REPORTED_N: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Average per-class Top-n accuracy in percent, keyed by `n`.
    pub top_n_accuracy: BTreeMap<usize, f64>,
    /// Accuracy of each class in percent at the smallest reported `n` (Top-1
    /// for full reports); `None` for classes without test samples.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub n_samples: usize,
    /// Classes without test samples, excluded from the averages.
    pub absent_classes: Vec<usize>,
    pub config_digest: String,
}

impl EvaluationReport {
    /// Panics if the report has no Top-1 entry.
    pub fn top1(&self) -> f64 {
        self.top_n_accuracy[&1]
    }

    pub fn top_n(&self, n: usize) -> Option<f64> {
        self.top_n_accuracy.get(&n).copied()
    }
}

/// Whether the true class of column `col` is among the `n` best scores.
/// A class ranks ahead of the truth if it scores higher, or scores the same
/// and has a lower index.
fn in_top_n(scores: &DenseMatrix, col: usize, truth: usize, n: usize) -> bool {
    let t = scores[(truth, col)];
    let ahead = (0..scores.rows())
        .filter(|&c| {
            let s = scores[(c, col)];
            s > t || (s == t && c < truth)
        })
        .count();
    ahead < n
}

fn check_inputs(scores: &DenseMatrix, truth: &[usize], n: usize) -> Result<()> {
    let k = scores.rows();
    if scores.cols() != truth.len() {
        return Err(ClaError::Dimension(format!(
            "{} score columns but {} truth labels",
            scores.cols(),
            truth.len()
        )));
    }
    if n == 0 || n > k {
        return Err(ClaError::Validation(format!(
            "rank cutoff n = {n} is outside [1, {k}]"
        )));
    }
    crate::dataset::check_labels(truth, k, "truth label")
}

/// Per-class Top-n accuracy in percent (`None` for classes without samples)
/// and its unweighted mean over the classes present.
pub fn per_class_accuracy(
    scores: &DenseMatrix,
    truth: &[usize],
    n: usize,
) -> Result<(f64, Vec<Option<f64>>)> {
    check_inputs(scores, truth, n)?;
    let k = scores.rows();
    let mut correct = vec![0usize; k];
    let mut total = vec![0usize; k];
    for (col, &t) in truth.iter().enumerate() {
        total[t] += 1;
        if in_top_n(scores, col, t, n) {
            correct[t] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| (total[c] > 0).then(|| 100.0 * correct[c] as f64 / total[c] as f64))
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(ClaError::Validation("no test samples".into()));
    }
    Ok((
        present.iter().sum::<f64>() / present.len() as f64,
        per_class,
    ))
}

/// Report for a single rank cutoff `n`; per-class numbers are Top-n too.
pub fn per_class_top_n(
    scores: &DenseMatrix,
    truth: &[usize],
    n: usize,
) -> Result<EvaluationReport> {
    let (mean, per_class) = per_class_accuracy(scores, truth, n)?;
    Ok(report(BTreeMap::from([(n, mean)]), per_class, truth.len()))
}

/// Report for every cutoff `1..=min(5, k_u)`.
pub fn evaluate_scores(scores: &DenseMatrix, truth: &[usize]) -> Result<EvaluationReport> {
    let mut top_n = BTreeMap::new();
    let mut per_class = Vec::new();
    for n in 1..=MAX_REPORTED_N.min(scores.rows()) {
        let (mean, classes) = per_class_accuracy(scores, truth, n)?;
        if n == 1 {
            per_class = classes;
        }
        top_n.insert(n, mean);
    }
    Ok(report(top_n, per_class, truth.len()))
}

/// Top-1 report from hard label predictions.
pub fn evaluate_labels(predicted: &[usize], truth: &[usize], k: usize) -> Result<EvaluationReport> {
    if predicted.len() != truth.len() {
        return Err(ClaError::Dimension(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    crate::dataset::check_labels(predicted, k, "predicted label")?;
    let mut one_hot = DenseMatrix::zeros(k, predicted.len());
    for (n, &c) in predicted.iter().enumerate() {
        one_hot[(c, n)] = 1.0;
    }
    let (mean, per_class) = per_class_accuracy(&one_hot, truth, 1)?;
    Ok(report(BTreeMap::from([(1, mean)]), per_class, truth.len()))
}

fn report(
    top_n: BTreeMap<usize, f64>,
    per_class: Vec<Option<f64>>,
    n_samples: usize,
) -> EvaluationReport {
    let absent_classes = per_class
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_none())
        .map(|(c, _)| c)
        .collect();
    EvaluationReport {
        top_n_accuracy: top_n,
        per_class_accuracy: per_class,
        n_samples,
        absent_classes,
        config_digest: String::new(),
    }
}

/// Settings for [`cross_validate_lambda`].
#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub grid: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub max_alternations: usize,
    pub structure: StructureConfig,
}

impl Default for CrossValidation {
    fn default() -> Self {
        CrossValidation {
            grid: crate::model::LAMBDA_GRID.to_vec(),
            folds: 5,
            seed: 0,
            max_alternations: 10,
            structure: StructureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    /// `(λ, mean validation Top-1)` in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Number of pseudo-unseen classes per fold: the dataset's unseen share of
/// all classes applied to the seen classes, kept within `[1, k_s − 1]`.
pub fn pseudo_unseen_count(k_seen: usize, k_unseen: usize) -> usize {
    let share = k_seen as f64 * k_unseen as f64 / (k_seen + k_unseen) as f64;
    (share.round() as usize).clamp(1, k_seen.saturating_sub(1).max(1))
}

/// Class splits: each fold holds out a consecutive block of a seeded
/// permutation of the seen classes, wrapping around.
pub fn class_folds(
    k_seen: usize,
    k_unseen: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(ClaError::Validation(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if k_seen < folds || k_seen < 2 {
        return Err(ClaError::Validation(format!(
            "{k_seen} seen classes cannot be split into {folds} folds"
        )));
    }
    let held = pseudo_unseen_count(k_seen, k_unseen);
    let mut order: Vec<usize> = (0..k_seen).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..folds)
        .map(|f| {
            let start = f * k_seen / folds;
            let mut unseen: Vec<usize> = (0..held).map(|i| order[(start + i) % k_seen]).collect();
            unseen.sort_unstable();
            let seen = (0..k_seen).filter(|c| !unseen.contains(c)).collect();
            (seen, unseen)
        })
        .collect())
}

/// Top-1 of the initial (pre-evolution) estimate on a dataset with truth.
pub fn initial_top1(
    dataset: &ZslDataset,
    lambda: f64,
    max_alternations: usize,
    structure: &StructureConfig,
) -> Result<f64> {
    let truth = dataset
        .unseen_truth
        .as_ref()
        .ok_or_else(|| ClaError::Validation("unseen ground truth is required".into()))?;
    let semantic = dataset.semantic_structures(structure)?;
    let (seen_protos, _) =
        class_prototypes(&dataset.seen_features, &dataset.seen_labels, dataset.k_seen)?;
    let mut sources = semantic.clone();
    sources.push(visual_placeholder(
        &seen_protos,
        dataset.k_unseen,
        structure,
    )?);
    let y = LabelMatrix::from_labels(&dataset.seen_labels, dataset.k_seen)?;
    let (model, _) = fit_seen(
        &dataset.seen_features,
        &y,
        &sources,
        lambda,
        max_alternations,
    )?;
    let fused = initial_unseen_structures(dataset, &semantic, structure)?;
    let scores = predict_scores(&model, &fused.w_u, &fused.w_su, &dataset.unseen_features)?;
    Ok(per_class_accuracy(&scores, truth, 1)?.0)
}

/// Picks `λ` from the grid by class-level cross-validation on the seen
/// classes; ties go to the smaller `λ`.
pub fn cross_validate_lambda(
    dataset: &ZslDataset,
    cv: &CrossValidation,
) -> Result<LambdaSelection> {
    if cv.grid.is_empty() {
        return Err(ClaError::Validation("empty lambda grid".into()));
    }
    let folds = class_folds(dataset.k_seen, dataset.k_unseen, cv.folds, cv.seed)?;
    let splits: Vec<ZslDataset> = folds
        .iter()
        .map(|(seen, unseen)| dataset.class_split(seen, unseen))
        .collect::<Result<_>>()?;
    let mut scores = Vec::with_capacity(cv.grid.len());
    for &lambda in &cv.grid {
        let mut total = 0.0;
        for (f, split) in splits.iter().enumerate() {
            let acc = initial_top1(split, lambda, cv.max_alternations, &cv.structure)?;
            debug!("lambda {lambda}, fold {f}: top-1 {acc:.3}");
            total += acc;
        }
        let mean = total / splits.len() as f64;
        info!("lambda {lambda}: mean validation top-1 {mean:.3}");
        scores.push((lambda, mean));
    }
    let mut best = scores[0];
    for &(lambda, acc) in &scores[1..] {
        if acc > best.1 || (acc == best.1 && lambda < best.0) {
            best = (lambda, acc);
        }
    }
    Ok(LambdaSelection {
        lambda: best.0,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_scores() {
        let truth = [0, 1, 2, 1];
        let mut scores = DenseMatrix::zeros(3, 4);
        for (n, &t) in truth.iter().enumerate() {
            scores[(t, n)] = 1.0;
        }
        let r = evaluate_scores(&scores, &truth).unwrap();
        assert!(r.top_n_accuracy.values().all(|&a| a == 100.0));
        assert_eq!(r.top_n_accuracy.len(), 3);
        assert!(r.absent_classes.is_empty());
    }

    #[test]
    fn per_class_averaging() {
        // Everything predicted as class 0; class 1 has three times as many samples.
        let truth = [0, 1, 1, 1];
        let scores = DenseMatrix::from_rows(&[&[1.0; 4], &[0.0; 4]]);
        assert_eq!(per_class_top_n(&scores, &truth, 1).unwrap().top1(), 50.0);
    }

    #[test]
    fn ties_favor_lower_index() {
        let scores = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let (mean, per_class) = per_class_accuracy(&scores, &[0, 1], 1).unwrap();
        assert_eq!(per_class, vec![Some(100.0), Some(0.0)]);
        assert_eq!(mean, 50.0);
        assert_eq!(per_class_accuracy(&scores, &[0, 1], 2).unwrap().0, 100.0);
    }

    #[test]
    fn absent_classes_are_flagged() {
        let scores = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5]]);
        let r = per_class_top_n(&scores, &[0, 1], 1).unwrap();
        assert_eq!(r.absent_classes, vec![2]);
        assert_eq!(r.top1(), 100.0);
        assert_eq!(r.per_class_accuracy[2], None);
    }

    #[test]
    fn rejects_bad_cutoffs_and_labels() {
        let scores = DenseMatrix::zeros(2, 1);
        assert!(per_class_top_n(&scores, &[0], 0).is_err());
        assert!(per_class_top_n(&scores, &[0], 3).is_err());
        assert!(per_class_top_n(&scores, &[2], 1).is_err());
        assert!(per_class_top_n(&scores, &[0, 1], 1).is_err());
    }

    #[test]
    fn label_evaluation_matches_scores() {
        let r = evaluate_labels(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(
            r.per_class_accuracy,
            vec![Some(100.0), Some(100.0 * 2.0 / 3.0)]
        );
    }

    #[test]
    fn ratio_matched_fold_sizes() {
        assert_eq!(pseudo_unseen_count(40, 10), 8);
        assert_eq!(pseudo_unseen_count(8, 4), 3);
        assert_eq!(pseudo_unseen_count(2, 50), 1);
        let folds = class_folds(40, 10, 5, 3).unwrap();
        let mut covered = [0; 40];
        for (seen, unseen) in &folds {
            assert_eq!(unseen.len(), 8);
            assert_eq!(seen.len(), 32);
            for &c in unseen {
                covered[c] += 1;
            }
        }
        // Five disjoint blocks of eight cover every class once.
        assert!(covered.iter().all(|&n| n == 1));
        assert!(class_folds(3, 1, 4, 0).is_err());
        assert!(class_folds(8, 4, 1, 0).is_err());
    }
}
