//! Train and evolve on a noiseless synthetic benchmark, where every unseen
//! class should be recovered.

use cla_core::pipeline::run;
use cla_core::synth::{generate_synthetic, SyntheticConfig};
use cla_core::ClaConfig;

fn main() -> cla_core::Result<()> {
    let ds = generate_synthetic(&SyntheticConfig::default())?;
    println!(
        "d={} k_s={} k_u={} seen samples={} unseen samples={} spaces={}",
        ds.feature_dim(),
        ds.k_seen,
        ds.k_unseen,
        ds.n_seen(),
        ds.n_unseen(),
        ds.semantic_spaces.len()
    );

    let config = ClaConfig::default();
    let result = run(&ds, &config)?;
    println!("beta {:?}", result.model.beta);
    println!("training objective trace {:?}", result.fit.objectives);

    let truth = ds.unseen_truth.as_ref().expect("synthetic data has truth");
    for (state, report) in result.history.iter().zip(result.reports(truth, &config)?) {
        println!(
            "t={} gamma={:?} top1={:.3} top2={:.3}",
            state.iteration,
            state.gamma,
            report.top1(),
            report.top_n(2).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
