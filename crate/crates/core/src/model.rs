//! The class label autoencoder.
//!
//! The encoder `Q_s = W_sᵀ A_s` maps features to seen-class labels and its
//! transpose decodes labels back to features. Training minimizes
//!
//! ```text
//! ‖X_s − A_sᵀ W_s Y_s‖²_F + λ ‖W_sᵀ A_s X_s − Y_s‖²_F
//! ```
//!
//! whose stationarity condition in `W = W_sᵀ A_s` is the Sylvester equation
//! `(Y_s Y_sᵀ) W + W (λ X_s X_sᵀ) = (1 + λ) Y_s X_sᵀ`. Unseen samples are
//! scored by `W_uᵀ W_suᵀ A_s X_u`, and the unseen structures are refined by
//! rebuilding the visual source from the current label estimates.

use log::{debug, info};

use crate::dataset::ZslDataset;
use crate::error::{ClaError, Result};
use crate::linalg::{ridge_solve, solve_sylvester, DenseMatrix};
use crate::simplex::{SimplexQuadratic, SimplexSolution};
use crate::structure::{
    build_visual_structures, class_prototypes, fuse_structures, visual_placeholder, weighted_sum,
    FusionWeights, StructureConfig, StructureSet,
};

/// Relative ridge used when recovering `A_s` from `W = W_sᵀ A_s`.
pub const RECOVERY_RIDGE: f64 = 1e-8;
/// Relative objective decrease below which alternation stops.
pub const ALTERNATION_TOLERANCE: f64 = 1e-8;
/// Bound on the relative stationarity residual of a trained encoder.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;

/// The cross-validation grid for `λ`.
pub const LAMBDA_GRID: [f64; 8] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0];

/// One-hot class labels, one column per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    one_hot: DenseMatrix,
}

impl LabelMatrix {
    pub fn from_labels(labels: &[usize], k: usize) -> Result<Self> {
        crate::dataset::check_labels(labels, k, "label")?;
        let mut m = DenseMatrix::zeros(k, labels.len());
        for (n, &c) in labels.iter().enumerate() {
            m[(c, n)] = 1.0;
        }
        Ok(LabelMatrix { one_hot: m })
    }

    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.one_hot
    }

    pub fn classes(&self) -> usize {
        self.one_hot.rows()
    }

    pub fn samples(&self) -> usize {
        self.one_hot.cols()
    }

    /// Samples per class.
    pub fn counts(&self) -> Vec<usize> {
        (0..self.classes())
            .map(|c| self.one_hot.row(c).iter().filter(|&&v| v == 1.0).count())
            .collect()
    }
}

/// A trained encoder together with the seen structure it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct ClaModel {
    /// `k_s x d`
    pub a_s: DenseMatrix,
    /// `k_s x k_s`
    pub fused_w_s: DenseMatrix,
    pub lambda: f64,
    /// Semantic sources in order, then the visual source.
    pub source_names: Vec<String>,
    pub beta: Vec<f64>,
}

impl ClaModel {
    pub fn k_seen(&self) -> usize {
        self.a_s.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.a_s.cols()
    }

    /// Encoder `Q_s = W_sᵀ A_s`.
    pub fn encoder(&self) -> Result<DenseMatrix> {
        self.fused_w_s.t_matmul(&self.a_s)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.a_s.rows();
        if self.fused_w_s.shape() != (k, k) {
            return Err(ClaError::Dimension(format!(
                "A_s has {k} rows but W_s is {}x{}",
                self.fused_w_s.rows(),
                self.fused_w_s.cols()
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ClaError::Validation(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.beta.len() != self.source_names.len() {
            return Err(ClaError::Validation(format!(
                "{} beta weights for {} sources",
                self.beta.len(),
                self.source_names.len()
            )));
        }
        crate::structure::check_simplex(&self.beta, "beta")
    }
}

fn check_training_shapes(x: &DenseMatrix, y: &LabelMatrix, w_s: &DenseMatrix) -> Result<()> {
    if x.cols() != y.samples() {
        return Err(ClaError::Dimension(format!(
            "{} feature columns but {} label columns",
            x.cols(),
            y.samples()
        )));
    }
    let k = y.classes();
    if w_s.shape() != (k, k) {
        return Err(ClaError::Dimension(format!(
            "seen structure is {}x{}, expected {k}x{k}",
            w_s.rows(),
            w_s.cols()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(ClaError::Validation(format!(
            "lambda must be finite and > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Solves for `A_s` with the seen structure `w_s` held fixed.
pub fn train_a_s(
    x_s: &DenseMatrix,
    y_s: &LabelMatrix,
    w_s: &DenseMatrix,
    lambda: f64,
) -> Result<DenseMatrix> {
    check_lambda(lambda)?;
    check_training_shapes(x_s, y_s, w_s)?;
    if let Some(c) = y_s.counts().iter().position(|&n| n == 0) {
        return Err(ClaError::Validation(format!(
            "seen class {c} has no training samples"
        )));
    }
    let y = y_s.as_matrix();
    let a = y.matmul_t(y)?;
    let b = x_s.matmul_t(x_s)?.scale(lambda);
    let c = y.matmul_t(x_s)?.scale(1.0 + lambda);
    let w = solve_sylvester(&a, &b, &c).map_err(|e| match e {
        ClaError::Singular(msg) => ClaError::Training(format!(
            "Sylvester system is singular for lambda = {lambda} ({msg}); try another value from the grid {LAMBDA_GRID:?}"
        )),
        other => other,
    })?;
    recover_projection(w_s, &w)
}

/// Least-squares `A_s` with `W_sᵀ A_s ≈ w`, lightly ridge-regularized.
pub fn recover_projection(w_s: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    let k = w_s.rows();
    let gram = w_s.matmul_t(w_s)?;
    let eps = RECOVERY_RIDGE * gram.trace() / k as f64;
    ridge_solve(&gram, &w_s.matmul(w)?, eps)
}

/// Calls `f` with consecutive column blocks of `x` and `y`.
fn for_column_blocks(
    x: &DenseMatrix,
    y: &DenseMatrix,
    mut f: impl FnMut(&DenseMatrix, &DenseMatrix) -> Result<()>,
) -> Result<()> {
    const BLOCK: usize = 2048;
    let n = x.cols();
    if n <= BLOCK {
        return f(x, y);
    }
    let mut start = 0;
    while start < n {
        let idx: Vec<usize> = (start..(start + BLOCK).min(n)).collect();
        f(&x.select_columns(&idx), &y.select_columns(&idx))?;
        start += BLOCK;
    }
    Ok(())
}

/// Training objective `‖X − A_sᵀ W_s Y‖² + λ ‖W_sᵀ A_s X − Y‖²`.
pub fn training_objective(
    x: &DenseMatrix,
    y: &DenseMatrix,
    w_s: &DenseMatrix,
    a_s: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    let (decoder, encoder) = reconstruction_terms(x, y, &w_s.t_matmul(a_s)?)?;
    Ok(decoder + lambda * encoder)
}

/// `(‖X − QᵀY‖², ‖QX − Y‖²)` for the encoder `q`.
fn reconstruction_terms(x: &DenseMatrix, y: &DenseMatrix, q: &DenseMatrix) -> Result<(f64, f64)> {
    if q.shape() != (y.rows(), x.rows()) || x.cols() != y.cols() {
        return Err(ClaError::Dimension(format!(
            "encoder {}x{} with features {}x{} and labels {}x{}",
            q.rows(),
            q.cols(),
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    let mut decoder = 0.0;
    let mut encoder = 0.0;
    for_column_blocks(x, y, |xb, yb| {
        decoder += xb.sub(&q.t_matmul(yb)?)?.frobenius_norm_sq();
        encoder += q.matmul(xb)?.sub(yb)?.frobenius_norm_sq();
        Ok(())
    })?;
    Ok((decoder, encoder))
}

/// Decoder and encoder losses `(‖X − QᵀY‖², ‖QX − Y‖²)` with `Q = W_sᵀ A_s`.
pub fn reconstruction_diagnostics(
    model: &ClaModel,
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<(f64, f64)> {
    reconstruction_terms(x, y, &model.encoder()?)
}

/// Relative residual of the Sylvester stationarity condition at
/// `W = w_sᵀ a_s`, i.e. `‖YYᵀW + λWXXᵀ − (1+λ)YXᵀ‖ / (1 + ‖(1+λ)YXᵀ‖)`.
pub fn stationarity_residual(
    x: &DenseMatrix,
    y: &DenseMatrix,
    w_s: &DenseMatrix,
    a_s: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    let w = w_s.t_matmul(a_s)?;
    let lhs = y
        .matmul_t(y)?
        .matmul(&w)?
        .add(&w.matmul(&x.matmul_t(x)?)?.scale(lambda))?;
    let c = y.matmul_t(x)?.scale(1.0 + lambda);
    Ok(lhs.sub(&c)?.frobenius_norm() / (1.0 + c.frobenius_norm()))
}

/// The training objective as a quadratic in the seen weights `β` with `A_s`
/// fixed.
pub fn beta_quadratic(
    x: &DenseMatrix,
    y: &LabelMatrix,
    sources: &[StructureSet],
    a_s: &DenseMatrix,
    lambda: f64,
) -> Result<SimplexQuadratic> {
    let y = y.as_matrix();
    let n = sources.len();
    // Decoder term: U_i = P_i Y with P_i = A_sᵀ W_i.
    // Encoder term: V_i = W_iᵀ Z with Z = A_s X.
    let p: Vec<DenseMatrix> = sources
        .iter()
        .map(|s| a_s.t_matmul(&s.w_s))
        .collect::<Result<_>>()?;
    let z = a_s.matmul(x)?;
    let yyt = y.matmul_t(y)?;
    let xyt = x.matmul_t(y)?;
    let zzt = z.matmul_t(&z)?;
    let zyt = z.matmul_t(y)?;

    let mut gram = DenseMatrix::zeros(n, n);
    let mut linear = vec![0.0; n];
    for i in 0..n {
        let p_i_yyt = p[i].matmul(&yyt)?;
        let zzt_w_i = zzt.matmul(&sources[i].w_s)?;
        for j in i..n {
            let dec = p[j].frobenius_dot(&p_i_yyt)?;
            let enc = sources[j].w_s.frobenius_dot(&zzt_w_i)?;
            gram[(i, j)] = dec + lambda * enc;
            gram[(j, i)] = gram[(i, j)];
        }
        linear[i] = p[i].frobenius_dot(&xyt)? + lambda * sources[i].w_s.frobenius_dot(&zyt)?;
    }
    Ok(SimplexQuadratic {
        gram,
        linear,
        constant: x.frobenius_norm_sq() + lambda * y.frobenius_norm_sq(),
    })
}

/// Minimizes the training objective over `β` on the simplex with `A_s` fixed.
pub fn optimize_beta(
    x_s: &DenseMatrix,
    y_s: &LabelMatrix,
    sources: &[StructureSet],
    a_s: &DenseMatrix,
    lambda: f64,
) -> Result<SimplexSolution> {
    if sources.is_empty() {
        return Err(ClaError::Validation("no structure sources".into()));
    }
    beta_quadratic(x_s, y_s, sources, a_s, lambda)?.minimize()
}

/// Objective values recorded during [`fit_seen`].
#[derive(Clone, Debug, Default)]
pub struct FitTrace {
    /// Objective after each `A_s` or `β` update, in order.
    pub objectives: Vec<f64>,
    /// `β` after each update (the first entry is the uniform start).
    pub betas: Vec<Vec<f64>>,
    pub alternations: usize,
}

/// Alternates `A_s` and `β` updates starting from uniform `β`.
///
/// Always finishes with an `A_s` update so the returned encoder is stationary
/// for the returned structure.
pub fn fit_seen(
    x_s: &DenseMatrix,
    y_s: &LabelMatrix,
    sources: &[StructureSet],
    lambda: f64,
    max_alternations: usize,
) -> Result<(ClaModel, FitTrace)> {
    if max_alternations == 0 {
        return Err(ClaError::Validation("max_alternations must be >= 1".into()));
    }
    if sources.is_empty() {
        return Err(ClaError::Validation("no structure sources".into()));
    }
    let y = y_s.as_matrix();
    let mut trace = FitTrace::default();
    let mut beta = vec![1.0 / sources.len() as f64; sources.len()];
    trace.betas.push(beta.clone());

    let mut w_s = weighted_sum(sources, &beta, |s| &s.w_s)?;
    let mut a_s = train_a_s(x_s, y_s, &w_s, lambda)?;
    let mut last = training_objective(x_s, y, &w_s, &a_s, lambda)?;
    trace.objectives.push(last);

    for alt in 1..=max_alternations {
        trace.alternations = alt;
        let sol = optimize_beta(x_s, y_s, sources, &a_s, lambda)?;
        beta = sol.weights;
        w_s = weighted_sum(sources, &beta, |s| &s.w_s)?;
        trace
            .objectives
            .push(training_objective(x_s, y, &w_s, &a_s, lambda)?);
        trace.betas.push(beta.clone());

        a_s = train_a_s(x_s, y_s, &w_s, lambda)?;
        let f = training_objective(x_s, y, &w_s, &a_s, lambda)?;
        trace.objectives.push(f);
        debug!("alternation {alt}: objective {f:.6e}, beta {beta:?}");
        let decrease = last - f;
        last = f;
        if decrease < ALTERNATION_TOLERANCE * last.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let model = ClaModel {
        a_s,
        fused_w_s: w_s,
        lambda,
        source_names: sources.iter().map(|s| s.source_name.clone()).collect(),
        beta,
    };
    Ok((model, trace))
}

/// Unseen-class scores `W_uᵀ W_suᵀ A_s X_u` (`k_u x N_u`).
pub fn predict_scores(
    model: &ClaModel,
    w_u: &DenseMatrix,
    w_su: &DenseMatrix,
    x_u: &DenseMatrix,
) -> Result<DenseMatrix> {
    let k_s = model.k_seen();
    let k_u = w_u.rows();
    if w_u.shape() != (k_u, k_u) || w_su.shape() != (k_s, k_u) || x_u.rows() != model.feature_dim()
    {
        return Err(ClaError::Dimension(format!(
            "model with {k_s} seen classes and dim {} cannot score W_u {}x{}, W_su {}x{}, X_u {}x{}",
            model.feature_dim(),
            w_u.rows(),
            w_u.cols(),
            w_su.rows(),
            w_su.cols(),
            x_u.rows(),
            x_u.cols()
        )));
    }
    let seen_scores = model.a_s.matmul(x_u)?;
    w_u.t_matmul(&w_su.t_matmul(&seen_scores)?)
}

/// Per column, the row of the largest score; ties go to the lowest index.
pub fn predict_labels(scores: &DenseMatrix) -> Vec<usize> {
    (0..scores.cols())
        .map(|n| {
            let mut best = 0;
            for c in 1..scores.rows() {
                if scores[(c, n)] > scores[(best, n)] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// The unseen-weight objective `‖γᵀ P_u‖² + δ ‖γᵀ P_su‖²` where the rows of
/// `P` are the flattened structures and the visual (last) row is negated.
pub fn gamma_quadratic(sources: &[StructureSet], delta: f64) -> Result<SimplexQuadratic> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(ClaError::Validation(format!(
            "delta must be finite and >= 0, got {delta}"
        )));
    }
    let n = sources.len();
    if n == 0 {
        return Err(ClaError::Validation("no structure sources".into()));
    }
    let sign = |i: usize| if i + 1 == n { -1.0 } else { 1.0 };
    let mut gram = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let u = sources[i].w_u.frobenius_dot(&sources[j].w_u)?;
            let su = sources[i].w_su.frobenius_dot(&sources[j].w_su)?;
            gram[(i, j)] = sign(i) * sign(j) * (u + delta * su);
            gram[(j, i)] = gram[(i, j)];
        }
    }
    Ok(SimplexQuadratic {
        gram,
        linear: vec![0.0; n],
        constant: 0.0,
    })
}

/// Updates the unseen weights `γ`; the visual source must be last.
pub fn update_gamma(sources: &[StructureSet], delta: f64) -> Result<SimplexSolution> {
    gamma_quadratic(sources, delta)?.minimize()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveConfig {
    /// Weight of the cross-structure term in the `γ` objective.
    pub delta: f64,
    /// Maximum number of label estimates, including the initial one.
    pub p_total: usize,
    pub structure: StructureConfig,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            delta: 0.1,
            p_total: 50,
            structure: StructureConfig::default(),
        }
    }
}

/// Snapshot after one label estimate.
#[derive(Clone, Debug)]
pub struct EvolutionState {
    pub iteration: usize,
    pub estimated_labels: Vec<usize>,
    pub gamma: Vec<f64>,
    /// The visual source used for this estimate.
    pub visual_structures: StructureSet,
    /// `k_u x N_u`
    pub score_matrix: DenseMatrix,
}

/// Runs structure evolution with semantic structures built from the dataset.
pub fn evolve(
    model: &ClaModel,
    dataset: &ZslDataset,
    config: &EvolveConfig,
) -> Result<Vec<EvolutionState>> {
    let semantic = dataset.semantic_structures(&config.structure)?;
    evolve_with_sources(model, dataset, &semantic, config)
}

/// Structure evolution: estimate labels, rebuild the visual unseen
/// structures from them, re-weight the sources, re-estimate. Stops after
/// `p_total` estimates or as soon as the labels repeat.
pub fn evolve_with_sources(
    model: &ClaModel,
    dataset: &ZslDataset,
    semantic: &[StructureSet],
    config: &EvolveConfig,
) -> Result<Vec<EvolutionState>> {
    if config.p_total == 0 {
        return Err(ClaError::Validation("P must be >= 1".into()));
    }
    if semantic.len() + 1 != model.source_names.len() {
        return Err(ClaError::Validation(format!(
            "model was trained with {} sources, got {} semantic sources plus the visual one",
            model.source_names.len(),
            semantic.len()
        )));
    }
    let k_u = dataset.k_unseen;
    let (seen_protos, _) =
        class_prototypes(&dataset.seen_features, &dataset.seen_labels, dataset.k_seen)?;

    let estimate = |sources: &[StructureSet], gamma: &[f64]| -> Result<(DenseMatrix, Vec<usize>)> {
        let w_u = weighted_sum(sources, gamma, |s| &s.w_u)?;
        let w_su = weighted_sum(sources, gamma, |s| &s.w_su)?;
        let scores = predict_scores(model, &w_u, &w_su, &dataset.unseen_features)?;
        let labels = predict_labels(&scores);
        Ok((scores, labels))
    };

    let mut sources = semantic.to_vec();
    sources.push(visual_placeholder(&seen_protos, k_u, &config.structure)?);
    let gamma = vec![1.0 / sources.len() as f64; sources.len()];
    let (scores, labels) = estimate(&sources, &gamma)?;
    let mut history = vec![EvolutionState {
        iteration: 0,
        estimated_labels: labels,
        gamma,
        visual_structures: sources.last().cloned().expect("visual source"),
        score_matrix: scores,
    }];

    for t in 1..config.p_total {
        let prev = &history[t - 1].estimated_labels;
        let (unseen_protos, available) = class_prototypes(&dataset.unseen_features, prev, k_u)?;
        let visual =
            build_visual_structures(&seen_protos, &unseen_protos, &available, &config.structure)?;
        *sources.last_mut().expect("visual source") = visual;
        let gamma = update_gamma(&sources, config.delta)?.weights;
        let (scores, labels) = estimate(&sources, &gamma)?;
        let unchanged = &labels == prev;
        debug!("evolution step {t}: gamma {gamma:?}, unchanged {unchanged}");
        history.push(EvolutionState {
            iteration: t,
            estimated_labels: labels,
            gamma,
            visual_structures: sources.last().cloned().expect("visual source"),
            score_matrix: scores,
        });
        if unchanged {
            info!("labels unchanged at step {t}; stopping");
            break;
        }
    }
    Ok(history)
}

/// Fused unseen structures for the initial estimate: uniform `γ` with the
/// visual placeholder.
pub fn initial_unseen_structures(
    dataset: &ZslDataset,
    semantic: &[StructureSet],
    config: &StructureConfig,
) -> Result<StructureSet> {
    let (seen_protos, _) =
        class_prototypes(&dataset.seen_features, &dataset.seen_labels, dataset.k_seen)?;
    let mut sources = semantic.to_vec();
    sources.push(visual_placeholder(&seen_protos, dataset.k_unseen, config)?);
    fuse_structures(&sources, &FusionWeights::uniform(sources.len()))
}
