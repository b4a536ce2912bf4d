//! End-to-end runs: train on the seen classes, then evolve the unseen
//! structures.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::ZslDataset;
use crate::error::{ClaError, Result};
use crate::eval::{evaluate_scores, EvaluationReport};
use crate::model::{
    evolve_with_sources, fit_seen, ClaModel, EvolutionState, EvolveConfig, FitTrace, LabelMatrix,
};
use crate::structure::{class_prototypes, visual_placeholder, StructureConfig, StructureSet};

/// Hyperparameters of a full run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClaConfig {
    pub lambda: f64,
    pub delta: f64,
    /// Maximum number of label estimates during evolution.
    pub p_total: usize,
    pub max_alternations: usize,
    pub structure: StructureConfig,
}

impl Default for ClaConfig {
    fn default() -> Self {
        ClaConfig {
            lambda: 1.0,
            delta: 0.1,
            p_total: 50,
            max_alternations: 10,
            structure: StructureConfig::default(),
        }
    }
}

impl ClaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ClaError::Validation(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(ClaError::Validation(format!(
                "delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        if self.p_total == 0 {
            return Err(ClaError::Validation("P must be >= 1".into()));
        }
        if self.max_alternations == 0 {
            return Err(ClaError::Validation("max_alternations must be >= 1".into()));
        }
        if !(self.structure.covariance_ridge.is_finite() && self.structure.covariance_ridge >= 0.0)
        {
            return Err(ClaError::Validation("covariance ridge must be >= 0".into()));
        }
        Ok(())
    }

    pub fn evolve_config(&self) -> EvolveConfig {
        EvolveConfig {
            delta: self.delta,
            p_total: self.p_total,
            structure: self.structure,
        }
    }

    /// Hex SHA-256 of the JSON form; identifies the configuration in reports.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Semantic sources followed by the visual source with placeholder unseen
/// parts, as used for training.
pub fn training_sources(
    dataset: &ZslDataset,
    structure: &StructureConfig,
) -> Result<Vec<StructureSet>> {
    let mut sources = dataset.semantic_structures(structure)?;
    let (seen_protos, _) =
        class_prototypes(&dataset.seen_features, &dataset.seen_labels, dataset.k_seen)?;
    sources.push(visual_placeholder(
        &seen_protos,
        dataset.k_unseen,
        structure,
    )?);
    Ok(sources)
}

/// Fits `A_s` and `β` on the seen part of `dataset`.
pub fn train(dataset: &ZslDataset, config: &ClaConfig) -> Result<(ClaModel, FitTrace)> {
    config.validate()?;
    dataset.validate()?;
    let sources = training_sources(dataset, &config.structure)?;
    let y = LabelMatrix::from_labels(&dataset.seen_labels, dataset.k_seen)?;
    fit_seen(
        &dataset.seen_features,
        &y,
        &sources,
        config.lambda,
        config.max_alternations,
    )
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub model: ClaModel,
    pub fit: FitTrace,
    pub history: Vec<EvolutionState>,
}

impl PipelineRun {
    pub fn final_state(&self) -> &EvolutionState {
        self.history
            .last()
            .expect("evolution yields at least one state")
    }

    /// Report for every evolution state, against `truth`.
    pub fn reports(&self, truth: &[usize], config: &ClaConfig) -> Result<Vec<EvaluationReport>> {
        let digest = config.digest();
        self.history
            .iter()
            .map(|s| {
                let mut r = evaluate_scores(&s.score_matrix, truth)?;
                r.config_digest = digest.clone();
                Ok(r)
            })
            .collect()
    }
}

/// Trains, then runs structure evolution on the unseen samples.
pub fn run(dataset: &ZslDataset, config: &ClaConfig) -> Result<PipelineRun> {
    let (model, fit) = train(dataset, config)?;
    let semantic = dataset.semantic_structures(&config.structure)?;
    let history = evolve_with_sources(&model, dataset, &semantic, &config.evolve_config())?;
    Ok(PipelineRun {
        model,
        fit,
        history,
    })
}
