//! Per-iteration accuracy of structure evolution on a noisy benchmark.
//!
//!     cargo run --example evolution_trace -- [noise] [seed] [--row-normalize]

use cla_core::pipeline::run;
use cla_core::synth::{generate_synthetic, SyntheticConfig};
use cla_core::ClaConfig;

fn main() -> cla_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let positional: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    let noise = positional
        .first()
        .map_or(0.8, |s| s.parse().expect("noise is a number"));
    let seed = positional
        .get(1)
        .map_or(0, |s| s.parse().expect("seed is an integer"));

    let ds = generate_synthetic(&SyntheticConfig {
        noise,
        seed,
        ..Default::default()
    })?;
    let mut config = ClaConfig::default();
    config.structure.row_normalize = args.iter().any(|a| a == "--row-normalize");

    let result = run(&ds, &config)?;
    let truth = ds.unseen_truth.as_ref().expect("synthetic data has truth");
    let reports = result.reports(truth, &config)?;
    for (state, report) in result.history.iter().zip(&reports) {
        let gamma: Vec<String> = state.gamma.iter().map(|g| format!("{g:.3}")).collect();
        println!(
            "t={:<2} gamma=[{}] top1={:.3}",
            state.iteration,
            gamma.join(", "),
            report.top1()
        );
    }
    let (first, last) = (reports[0].top1(), reports[reports.len() - 1].top1());
    println!(
        "noise {noise} seed {seed}: {first:.3} -> {last:.3} after {} estimates",
        reports.len()
    );
    Ok(())
}
