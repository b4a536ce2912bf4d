//! In-memory zero-shot dataset.

use crate::error::{ClaError, Result};
use crate::linalg::DenseMatrix;
use crate::structure::{build_semantic_structures, StructureConfig, StructureSet};

/// One semantic space: a prototype column per class.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticSpace {
    pub name: String,
    /// `dim x k_s`
    pub seen: DenseMatrix,
    /// `dim x k_u`
    pub unseen: DenseMatrix,
}

/// Seen samples with labels, unseen samples, and `M` semantic spaces.
///
/// Features are stored one sample per column (`d x N`).
#[derive(Clone, Debug, PartialEq)]
pub struct ZslDataset {
    pub seen_features: DenseMatrix,
    pub seen_labels: Vec<usize>,
    pub unseen_features: DenseMatrix,
    /// Ground truth for the unseen samples, when known.
    pub unseen_truth: Option<Vec<usize>>,
    pub semantic_spaces: Vec<SemanticSpace>,
    pub k_seen: usize,
    pub k_unseen: usize,
}

impl ZslDataset {
    pub fn feature_dim(&self) -> usize {
        self.seen_features.rows()
    }

    pub fn n_seen(&self) -> usize {
        self.seen_features.cols()
    }

    pub fn n_unseen(&self) -> usize {
        self.unseen_features.cols()
    }

    /// Checks shapes and label ranges. Empty seen classes are left to
    /// training, which rejects them.
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_dim();
        if self.k_seen == 0 || self.k_unseen == 0 {
            return Err(ClaError::Validation(format!(
                "need at least one seen and one unseen class, got {} and {}",
                self.k_seen, self.k_unseen
            )));
        }
        if self.unseen_features.rows() != d {
            return Err(ClaError::Dimension(format!(
                "seen features have dim {d}, unseen features have dim {}",
                self.unseen_features.rows()
            )));
        }
        if self.seen_labels.len() != self.n_seen() {
            return Err(ClaError::Dimension(format!(
                "{} seen labels for {} seen samples",
                self.seen_labels.len(),
                self.n_seen()
            )));
        }
        check_labels(&self.seen_labels, self.k_seen, "seen label")?;
        if let Some(truth) = &self.unseen_truth {
            if truth.len() != self.n_unseen() {
                return Err(ClaError::Dimension(format!(
                    "{} unseen truth labels for {} unseen samples",
                    truth.len(),
                    self.n_unseen()
                )));
            }
            check_labels(truth, self.k_unseen, "unseen truth label")?;
        }
        if self.semantic_spaces.is_empty() {
            return Err(ClaError::Validation(
                "at least one semantic space is required".into(),
            ));
        }
        for s in &self.semantic_spaces {
            if s.seen.cols() != self.k_seen || s.unseen.cols() != self.k_unseen {
                return Err(ClaError::Dimension(format!(
                    "semantic space '{}' has {} seen and {} unseen columns, expected {} and {}",
                    s.name,
                    s.seen.cols(),
                    s.unseen.cols(),
                    self.k_seen,
                    self.k_unseen
                )));
            }
            if s.seen.rows() != s.unseen.rows() {
                return Err(ClaError::Dimension(format!(
                    "semantic space '{}': seen dim {} != unseen dim {}",
                    s.name,
                    s.seen.rows(),
                    s.unseen.rows()
                )));
            }
        }
        Ok(())
    }

    /// Structure sets of every semantic space, in order.
    pub fn semantic_structures(&self, config: &StructureConfig) -> Result<Vec<StructureSet>> {
        self.semantic_spaces
            .iter()
            .map(|s| build_semantic_structures(&s.name, &s.seen, &s.unseen, config))
            .collect()
    }

    /// Restricts the dataset to a subset of seen classes (relabelled in the
    /// given order) and moves another subset of seen classes into the unseen
    /// role, with their labels as ground truth.
    pub fn class_split(
        &self,
        pseudo_seen: &[usize],
        pseudo_unseen: &[usize],
    ) -> Result<ZslDataset> {
        let remap = |classes: &[usize]| {
            let mut map = vec![usize::MAX; self.k_seen];
            for (new, &old) in classes.iter().enumerate() {
                map[old] = new;
            }
            map
        };
        let seen_map = remap(pseudo_seen);
        let unseen_map = remap(pseudo_unseen);
        let mut seen_idx = Vec::new();
        let mut seen_labels = Vec::new();
        let mut unseen_idx = Vec::new();
        let mut truth = Vec::new();
        for (n, &c) in self.seen_labels.iter().enumerate() {
            if seen_map[c] != usize::MAX {
                seen_idx.push(n);
                seen_labels.push(seen_map[c]);
            } else if unseen_map[c] != usize::MAX {
                unseen_idx.push(n);
                truth.push(unseen_map[c]);
            }
        }
        let split = ZslDataset {
            seen_features: self.seen_features.select_columns(&seen_idx),
            seen_labels,
            unseen_features: self.seen_features.select_columns(&unseen_idx),
            unseen_truth: Some(truth),
            semantic_spaces: self
                .semantic_spaces
                .iter()
                .map(|s| SemanticSpace {
                    name: s.name.clone(),
                    seen: s.seen.select_columns(pseudo_seen),
                    unseen: s.seen.select_columns(pseudo_unseen),
                })
                .collect(),
            k_seen: pseudo_seen.len(),
            k_unseen: pseudo_unseen.len(),
        };
        split.validate()?;
        Ok(split)
    }
}

pub(crate) fn check_labels(labels: &[usize], k: usize, what: &str) -> Result<()> {
    if let Some((n, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= k) {
        return Err(ClaError::Validation(format!(
            "{what} {c} at position {n} is outside [0, {k})"
        )));
    }
    Ok(())
}
