//! Trains several factorization depths and shows how the discriminator picks one.
//!
//!     cargo run --example depth_selection

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::dmf::{graph_discriminator, solve, SolverConfig};
use rotsync::eval::error_summary;
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let scene = synthesize(
        &SynthParams { n: 20, density: 0.6, noise_sigma_deg: 3.0, outlier_ratio: 0.1 },
        &mut ChaCha8Rng::seed_from_u64(11),
    )?;
    let config = SolverConfig {
        iterations: 2000,
        warmup: 400,
        depth_candidates: vec![2, 4, 6],
        ..SolverConfig::default()
    };
    let result = solve(&scene.graph, &config)?;
    for c in &result.candidates {
        println!(
            "depth {}: discriminator {:.3}, final loss {:.3}",
            c.depth,
            c.discriminator.unwrap_or(f64::NAN),
            c.final_loss.unwrap_or(f64::NAN)
        );
    }
    let chosen = &result.selected;
    let e = error_summary(&chosen.orientations, &scene.ground_truth.orientations);
    println!("selected depth {} with mean error {:.2} deg", chosen.depth, e.mean_deg);
    println!(
        "ground truth scores {:.3} on the same edges",
        graph_discriminator(&scene.graph, &scene.ground_truth.orientations)
    );
    Ok(())
}
