//! Runs the full protocol on a dataset described by a manifest: tune λ on the
//! seen classes, train, evolve, and report average per-class accuracy.
//!
//!     cargo run --release --example reproduce_from_manifest -- path/to/manifest.toml

use cla_core::eval::{cross_validate_lambda, CrossValidation};
use cla_core::io::{format_number, load_dataset};
use cla_core::pipeline::run;
use cla_core::ClaConfig;

fn main() -> cla_core::Result<()> {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: reproduce_from_manifest <manifest.toml>");
        std::process::exit(1);
    };
    let ds = load_dataset(&path)?;
    let Some(truth) = ds.unseen_truth.clone() else {
        eprintln!("{path}: the manifest needs unseen_truth to report accuracy");
        std::process::exit(1);
    };

    let selection = cross_validate_lambda(&ds, &CrossValidation::default())?;
    println!("chosen lambda = {}", format_number(selection.lambda));
    let config = ClaConfig {
        lambda: selection.lambda,
        ..Default::default()
    };
    let result = run(&ds, &config)?;
    let reports = result.reports(&truth, &config)?;
    let last = reports.last().expect("one state");
    println!("initial top1 = {}", format_number(reports[0].top1()));
    println!(
        "final top1   = {} after {} estimates",
        format_number(last.top1()),
        reports.len()
    );
    for (n, acc) in &last.top_n_accuracy {
        println!("top{n} = {}", format_number(*acc));
    }
    Ok(())
}
