//! Chooses the reconstruction trade-off by class-level cross-validation on
//! the seen classes.

use cla_core::eval::{class_folds, cross_validate_lambda, CrossValidation};
use cla_core::synth::{generate_synthetic, SyntheticConfig};

fn main() -> cla_core::Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        k_seen: 10,
        k_unseen: 4,
        samples_per_class: 15,
        noise: 0.8,
        seed: 2,
        ..Default::default()
    })?;
    let cv = CrossValidation::default();
    for (f, (seen, unseen)) in class_folds(ds.k_seen, ds.k_unseen, cv.folds, cv.seed)?
        .iter()
        .enumerate()
    {
        println!("fold {f}: train on {seen:?}, validate on {unseen:?}");
    }

    let selection = cross_validate_lambda(&ds, &cv)?;
    for (lambda, acc) in &selection.scores {
        println!("lambda={lambda:<8} mean validation top1={acc:.3}");
    }
    println!("chosen lambda = {}", selection.lambda);
    Ok(())
}
