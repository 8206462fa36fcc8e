//! Training monitors on a small noisy graph: implicit regularization alone does
//! not bring the unconstrained product down to rank 3, the bottleneck does.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::build_observation_matrix;
use rotsync::dmf::{optimize_with_monitor, ModelKind, SolverConfig};
use rotsync::synth::{synthesize, SynthParams};

fn sigma_ratio(g: &DMatrix<f64>) -> f64 {
    let mut sv: Vec<f64> = g.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv[3] / sv[0]
}

fn rank_trace(model: ModelKind) -> Vec<f64> {
    let s = synthesize(
        &SynthParams { n: 10, density: 0.6, noise_sigma_deg: 10.0, outlier_ratio: 0.2 },
        &mut ChaCha8Rng::seed_from_u64(12),
    )
    .unwrap();
    let obs = build_observation_matrix(&s.graph);
    let cfg = SolverConfig {
        iterations: 3000,
        warmup: 600,
        model,
        ..SolverConfig::default()
    };
    let mut trace = Vec::new();
    optimize_with_monitor(&obs, &cfg, 4, &mut |snap| {
        if snap.iteration % 500 == 0 {
            trace.push(sigma_ratio(&snap.g_hat()));
        }
    })
    .unwrap();
    trace
}

#[test]
fn bottleneck_holds_rank_three() {
    let trace = rank_trace(ModelKind::Constrained);
    assert_eq!(trace.len(), 7);
    assert!(trace.iter().all(|&r| r < 1e-10), "{trace:?}");
}

#[test]
fn unconstrained_product_stays_above_rank_three() {
    let trace = rank_trace(ModelKind::Vanilla);
    assert!(trace.iter().all(|&r| r > 1e-2), "{trace:?}");
}
