//! Watches the block weights while training, with and without reweighting.
//!
//!     cargo run --example reweighting

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::build_observation_matrix;
use rotsync::dmf::{optimize_with_monitor, SolverConfig};
use rotsync::eval::error_summary;
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let scene = synthesize(
        &SynthParams { n: 20, density: 0.6, noise_sigma_deg: 2.0, outlier_ratio: 0.25 },
        &mut ChaCha8Rng::seed_from_u64(21),
    )?;
    let obs = build_observation_matrix(&scene.graph);
    let outlier_pairs: Vec<(usize, usize)> = scene
        .graph
        .edges()
        .iter()
        .zip(&scene.outlier_labels)
        .filter(|(_, &o)| o)
        .map(|(e, _)| (e.i, e.j))
        .collect();

    for reweight in [true, false] {
        let config = SolverConfig {
            iterations: 2000,
            warmup: 400,
            reweight,
            ..SolverConfig::default()
        };
        let mut outlier_weight = Vec::new();
        let result = optimize_with_monitor(&obs, &config, 2, &mut |snap| {
            if snap.iteration % 400 == 0 {
                let w: f64 = outlier_pairs.iter().map(|&(i, j)| snap.weights[(i, j)]).sum();
                outlier_weight.push((snap.iteration, w / outlier_pairs.len() as f64));
            }
        })?;
        let e = error_summary(&result.orientations, &scene.ground_truth.orientations);
        println!("reweight {reweight}: mean error {:.2} deg", e.mean_deg);
        for (t, w) in outlier_weight {
            println!("  step {t:5}: mean outlier weight {w:.2e}");
        }
    }
    Ok(())
}
