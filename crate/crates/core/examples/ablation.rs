//! Runs the full pipeline and each single-component ablation on one graph.
//!
//!     cargo run --release --example ablation

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::eval::error_summary;
use rotsync::pipeline::{run_pipeline, Ablation, PipelineConfig};
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let scene = synthesize(
        &SynthParams { n: 25, density: 0.5, noise_sigma_deg: 5.0, outlier_ratio: 0.2 },
        &mut ChaCha8Rng::seed_from_u64(2),
    )?;
    let mut base = PipelineConfig::default();
    base.solver.depth_candidates = vec![2, 4];
    base.solver.iterations = 3000;

    let mut variants = vec![("full".to_string(), base.clone())];
    for a in Ablation::ALL {
        variants.push((a.to_string(), base.clone().with(a)));
    }
    for (name, cfg) in variants {
        let out = run_pipeline(&scene.graph, &cfg)?;
        let e = error_summary(&out.orientations, &scene.ground_truth.orientations);
        println!(
            "{name:>24}: mean {:6.2} deg, median {:6.2} deg, depth {:?}",
            e.mean_deg,
            e.median_deg,
            out.selected_depth()
        );
    }
    Ok(())
}
