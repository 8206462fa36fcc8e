//! Generate a noisy view graph with outliers and recover the absolute orientations.
//!
//!     cargo run --example quickstart

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::eval::error_summary;
use rotsync::pipeline::{run_pipeline, PipelineConfig};
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let params = SynthParams {
        n: 30,
        density: 0.5,
        noise_sigma_deg: 5.0,
        outlier_ratio: 0.2,
    };
    let scene = synthesize(&params, &mut ChaCha8Rng::seed_from_u64(1))?;
    println!("{} cameras, {} relative rotations", scene.graph.n(), scene.graph.num_edges());

    let mut config = PipelineConfig::default();
    config.solver.depth_candidates = vec![2, 4];
    let out = run_pipeline(&scene.graph, &config)?;

    let err = error_summary(&out.orientations, &scene.ground_truth.orientations);
    println!("selected depth {:?}", out.selected_depth());
    println!("mean {:.2} deg, median {:.2} deg", err.mean_deg, err.median_deg);
    Ok(())
}
