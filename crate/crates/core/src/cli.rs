//! Batch command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and validation errors, 2 for
//! missing, unreadable or malformed files. `CLA_LOG` (`quiet`, `info`,
//! `debug`) sets the log level on stderr; results go to stdout.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};

use crate::error::{ClaError, Result};
use crate::eval::{
    cross_validate_lambda, evaluate_labels, evaluate_scores, CrossValidation, EvaluationReport,
};
use crate::io::{
    format_number, load_dataset, load_labels, load_matrix_auto, load_model, save_dataset,
    save_labels, save_matrix, save_model, save_report, MatrixFormat,
};
use crate::model::{
    evolve_with_sources, initial_unseen_structures, predict_labels, predict_scores, LAMBDA_GRID,
};
use crate::pipeline::{train, ClaConfig};
use crate::structure::StructureConfig;
use crate::synth::{generate_synthetic, SyntheticConfig};

#[derive(Debug, Parser)]
#[command(
    name = "cla",
    about = "Class label autoencoder for zero-shot classification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Fit the seen-class encoder and save the model.
    Train(TrainArgs),
    /// Score unseen samples with the initial structures.
    Predict(PredictArgs),
    /// Run structure evolution and log each iteration.
    Evolve(EvolveArgs),
    /// Build an accuracy report from scores or predicted labels.
    Evaluate(EvaluateArgs),
    /// Choose lambda by cross-validation over seen classes.
    Tune(TuneArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => MatrixFormat::TextCsv,
            FormatArg::Bin => MatrixFormat::BinaryV1,
        }
    }
}

#[derive(Debug, Args)]
struct StructureArgs {
    /// Normalize similarity rows instead of whole matrices.
    #[arg(long)]
    row_normalize: bool,
    /// Relative covariance ridge for the Mahalanobis distance.
    #[arg(long, allow_negative_numbers = true, default_value_t = StructureConfig::default().covariance_ridge)]
    covariance_ridge: f64,
}

impl StructureArgs {
    fn config(&self) -> StructureConfig {
        StructureConfig {
            row_normalize: self.row_normalize,
            covariance_ridge: self.covariance_ridge,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    k_seen: usize,
    #[arg(long, default_value_t = 4)]
    k_unseen: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 25)]
    samples_per_class: usize,
    /// Number of semantic spaces.
    #[arg(long, default_value_t = 2)]
    spaces: usize,
    #[arg(long, default_value_t = 16)]
    semantic_dim: usize,
    /// Noise level sigma.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value = "bin")]
    format: FormatArg,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    max_alternations: usize,
    #[command(flatten)]
    structure: StructureArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    structure: StructureArgs,
}

#[derive(Debug, Args)]
struct EvolveArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Trained model; trains one with --lambda when absent.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.1)]
    delta: f64,
    /// Maximum number of label estimates.
    #[arg(long, default_value_t = 50)]
    p: usize,
    #[arg(long, default_value_t = 10)]
    max_alternations: usize,
    #[command(flatten)]
    structure: StructureArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Score matrix (k_u x N_u).
    #[arg(
        long,
        conflicts_with = "predictions",
        required_unless_present = "predictions"
    )]
    scores: Option<PathBuf>,
    /// Predicted labels; requires --classes.
    #[arg(long, requires = "classes")]
    predictions: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_alternations: usize,
    /// Writes tune.txt here when given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    structure: StructureArgs,
}

fn init_logging() -> Result<()> {
    let level = match std::env::var("CLA_LOG").as_deref() {
        Err(_) | Ok("info") => LevelFilter::Info,
        Ok("quiet") => LevelFilter::Off,
        Ok("debug") => LevelFilter::Debug,
        Ok(other) => {
            return Err(ClaError::Validation(format!(
                "CLA_LOG must be quiet, info or debug, got '{other}'"
            )))
        }
    };
    // A second initialization (several runs in one process) keeps the first.
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    log::set_max_level(level);
    Ok(())
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_logging().and_then(|()| dispatch(cli.command));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io_or_format() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evolve(a) => evolve(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Tune(a) => tune(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| ClaError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| ClaError::io(path, e))
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        feature_dim: a.dim,
        k_seen: a.k_seen,
        k_unseen: a.k_unseen,
        samples_per_class: a.samples_per_class,
        semantic_spaces: a.spaces,
        semantic_dim: a.semantic_dim,
        noise: a.noise,
        seed: a.seed,
    };
    let dataset = generate_synthetic(&config)?;
    let manifest = save_dataset(&dataset, &a.out, a.format.into())?;
    let json = serde_json::to_string_pretty(&config).expect("config serializes");
    write_text(&a.out.join("synthetic.json"), &json)?;
    println!("manifest={}", manifest.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let dataset = load_dataset(&a.manifest)?;
    let config = ClaConfig {
        lambda: a.lambda,
        max_alternations: a.max_alternations,
        structure: a.structure.config(),
        ..ClaConfig::default()
    };
    let (model, trace) = train(&dataset, &config)?;
    save_model(&model, a.out.join("model.claz"))?;
    let mut log = String::new();
    for (i, f) in trace.objectives.iter().enumerate() {
        log.push_str(&format!("step{i}={}\n", format_number(*f)));
    }
    write_text(&a.out.join("fit_trace.txt"), &log)?;
    let beta: Vec<String> = model.beta.iter().map(|b| format_number(*b)).collect();
    println!("lambda={}", format_number(model.lambda));
    println!("beta={}", beta.join(","));
    println!(
        "objective={}",
        format_number(*trace.objectives.last().expect("objective recorded"))
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let dataset = load_dataset(&a.manifest)?;
    let model = load_model(&a.model)?;
    let structure = a.structure.config();
    let semantic = dataset.semantic_structures(&structure)?;
    let fused = initial_unseen_structures(&dataset, &semantic, &structure)?;
    let scores = predict_scores(&model, &fused.w_u, &fused.w_su, &dataset.unseen_features)?;
    let labels = predict_labels(&scores);
    save_matrix(a.out.join("scores.bin"), &scores, MatrixFormat::BinaryV1)?;
    save_labels(a.out.join("labels.csv"), &labels)?;
    println!("predicted={}", labels.len());
    if let Some(truth) = &dataset.unseen_truth {
        println!(
            "top1={}",
            format_number(evaluate_scores(&scores, truth)?.top1())
        );
    }
    Ok(())
}

fn evolve(a: EvolveArgs) -> Result<()> {
    let dataset = load_dataset(&a.manifest)?;
    let config = ClaConfig {
        lambda: a.lambda,
        delta: a.delta,
        p_total: a.p,
        max_alternations: a.max_alternations,
        structure: a.structure.config(),
    };
    config.validate()?;
    let model = match &a.model {
        Some(path) => load_model(path)?,
        None => train(&dataset, &config)?.0,
    };
    let semantic = dataset.semantic_structures(&config.structure)?;
    let history = evolve_with_sources(&model, &dataset, &semantic, &config.evolve_config())?;
    let mut log = String::new();
    let mut last_report: Option<EvaluationReport> = None;
    for state in &history {
        let gamma: Vec<String> = state.gamma.iter().map(|g| format_number(*g)).collect();
        let mut line = format!("iteration={} gamma={}", state.iteration, gamma.join(","));
        if let Some(truth) = &dataset.unseen_truth {
            let mut report = evaluate_scores(&state.score_matrix, truth)?;
            report.config_digest = config.digest();
            line.push_str(&format!(" top1={}", format_number(report.top1())));
            last_report = Some(report);
        }
        println!("{line}");
        log.push_str(&line);
        log.push('\n');
    }
    let last = history.last().expect("at least one state");
    write_text(&a.out.join("evolution.txt"), &log)?;
    save_matrix(
        a.out.join("scores.bin"),
        &last.score_matrix,
        MatrixFormat::BinaryV1,
    )?;
    save_labels(a.out.join("labels.csv"), &last.estimated_labels)?;
    if let Some(report) = last_report {
        save_report(&report, &a.out, "report")?;
    }
    info!("{} label estimates", history.len());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let truth = load_labels(&a.truth)?;
    let report = match (&a.scores, &a.predictions, a.classes) {
        (Some(scores), _, _) => evaluate_scores(&load_matrix_auto(scores)?, &truth)?,
        (None, Some(pred), Some(k)) => evaluate_labels(&load_labels(pred)?, &truth, k)?,
        _ => {
            return Err(ClaError::Validation(
                "need --scores, or --predictions with --classes".into(),
            ))
        }
    };
    save_report(&report, &a.out, "report")?;
    for (n, acc) in &report.top_n_accuracy {
        println!("top{n}={}", format_number(*acc));
    }
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let dataset = load_dataset(&a.manifest)?;
    let cv = CrossValidation {
        grid: LAMBDA_GRID.to_vec(),
        folds: a.folds,
        seed: a.seed,
        max_alternations: a.max_alternations,
        structure: a.structure.config(),
    };
    let selection = cross_validate_lambda(&dataset, &cv)?;
    let mut text = String::new();
    for (lambda, acc) in &selection.scores {
        text.push_str(&format!(
            "lambda={} top1={}\n",
            format_number(*lambda),
            format_number(*acc)
        ));
    }
    text.push_str(&format!(
        "chosen_lambda={}\n",
        format_number(selection.lambda)
    ));
    print!("{text}");
    if let Some(out) = &a.out {
        write_text(&out.join("tune.txt"), &text)?;
    }
    Ok(())
}
