//! Eigenvector synchronization next to the factorization solver.
//!
//!     cargo run --example spectral_baseline

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::eval::error_summary;
use rotsync::pipeline::{run_pipeline, Ablation, Method, PipelineConfig};
use rotsync::spectral::spectral_solve;
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let clean = synthesize(
        &SynthParams { n: 12, density: 1.0, noise_sigma_deg: 0.0, outlier_ratio: 0.0 },
        &mut ChaCha8Rng::seed_from_u64(5),
    )?;
    let r = spectral_solve(&clean.graph)?;
    let e = error_summary(&r.orientations, &clean.ground_truth.orientations);
    println!("complete noise-free graph: eigenvalues {:.3?}, error {:.1e} deg", r.top_eigenvalues, e.mean_deg);

    let noisy = synthesize(
        &SynthParams { n: 30, density: 0.4, noise_sigma_deg: 5.0, outlier_ratio: 0.1 },
        &mut ChaCha8Rng::seed_from_u64(5),
    )?;
    let mut cfg = PipelineConfig::default().with(Ablation::NoFilter);
    cfg.solver.depth_candidates = vec![2];
    for method in [Method::Spectral, Method::Dmf] {
        cfg.method = method;
        let out = run_pipeline(&noisy.graph, &cfg)?;
        let e = error_summary(&out.orientations, &noisy.ground_truth.orientations);
        println!("{method}: mean {:.2} deg, median {:.2} deg", e.mean_deg, e.median_deg);
    }
    Ok(())
}
