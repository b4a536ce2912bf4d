//! Builds per-source class similarity structures and fuses them with simplex
//! weights.

use cla_core::structure::{
    build_visual_structures, class_prototypes, fuse_structures, FusionWeights, StructureConfig,
};
use cla_core::synth::{generate_synthetic, SyntheticConfig};

fn main() -> cla_core::Result<()> {
    let ds = generate_synthetic(&SyntheticConfig {
        k_seen: 4,
        k_unseen: 3,
        noise: 0.3,
        seed: 1,
        ..Default::default()
    })?;
    let config = StructureConfig::default();

    let mut sources = ds.semantic_structures(&config)?;
    for s in &sources {
        println!("{}: W_su (seen x unseen)\n{:.4}\n", s.source_name, s.w_su);
    }

    // The visual source from class means; with ground-truth labels every
    // unseen class has a prototype.
    let (seen, _) = class_prototypes(&ds.seen_features, &ds.seen_labels, ds.k_seen)?;
    let truth = ds.unseen_truth.as_ref().expect("synthetic data has truth");
    let (unseen, available) = class_prototypes(&ds.unseen_features, truth, ds.k_unseen)?;
    sources.push(build_visual_structures(
        &seen, &unseen, &available, &config,
    )?);
    println!("visual: W_u\n{:.4}\n", sources[2].w_u);

    let weights = FusionWeights {
        beta: vec![0.5, 0.3, 0.2],
        gamma: vec![0.25, 0.25, 0.5],
    };
    let fused = fuse_structures(&sources, &weights)?;
    println!("fused W_s (beta {:?})\n{:.4}", weights.beta, fused.w_s);
    println!(
        "sums: W_s {:.12}, W_u {:.12}, W_su {:.12}",
        fused.w_s.sum(),
        fused.w_u.sum(),
        fused.w_su.sum()
    );
    Ok(())
}
