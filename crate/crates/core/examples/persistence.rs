//! Writes a dataset, a trained model and a report to disk, reads them back
//! and checks the predictions are unchanged.

use cla_core::io::{load_dataset, load_model, save_dataset, save_model, save_report, MatrixFormat};
use cla_core::model::evolve;
use cla_core::pipeline::train;
use cla_core::synth::{generate_synthetic, SyntheticConfig};
use cla_core::ClaConfig;

fn main() -> cla_core::Result<()> {
    let dir = std::env::temp_dir().join(format!("cla-persistence-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| cla_core::ClaError::Io {
        path: dir.clone(),
        source: e,
    })?;

    let ds = generate_synthetic(&SyntheticConfig {
        noise: 0.5,
        seed: 11,
        ..Default::default()
    })?;
    let manifest = save_dataset(&ds, &dir, MatrixFormat::BinaryV1)?;
    println!("dataset manifest: {}", manifest.display());
    let reloaded = load_dataset(&manifest)?;
    assert_eq!(reloaded, ds);

    let config = ClaConfig::default();
    let (model, _) = train(&reloaded, &config)?;
    let model_path = dir.join("model.claz");
    save_model(&model, &model_path)?;
    let model_back = load_model(&model_path)?;

    let a = evolve(&model, &reloaded, &config.evolve_config())?;
    let b = evolve(&model_back, &reloaded, &config.evolve_config())?;
    let same = a.len() == b.len()
        && a.iter()
            .zip(&b)
            .all(|(x, y)| x.score_matrix == y.score_matrix);
    println!(
        "model file {} bytes; evolution identical after reload: {same}",
        std::fs::metadata(&model_path).map_or(0, |m| m.len())
    );

    let truth = reloaded.unseen_truth.as_ref().expect("saved with truth");
    let mut report =
        cla_core::eval::evaluate_scores(&b.last().expect("one state").score_matrix, truth)?;
    report.config_digest = config.digest();
    save_report(&report, &dir, "report")?;
    print!(
        "{}",
        std::fs::read_to_string(dir.join("report.txt")).unwrap_or_default()
    );

    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
