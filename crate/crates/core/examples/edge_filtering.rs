//! Spanning-tree outlier filtering, compared against the planted outlier labels.
//!
//!     cargo run --example edge_filtering

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::filter::{edge_attributes, run_edge_filter, triplet_errors, EdgeOrdering, FilterConfig};
use rotsync::synth::{synthesize, SynthParams};

fn main() -> rotsync::Result<()> {
    let params = SynthParams {
        n: 40,
        density: 0.5,
        noise_sigma_deg: 5.0,
        outlier_ratio: 0.3,
    };
    let scene = synthesize(&params, &mut ChaCha8Rng::seed_from_u64(3))?;
    let planted = scene.outlier_labels.iter().filter(|&&o| o).count();

    let attrs = edge_attributes(&triplet_errors(&scene.graph))?;
    println!("median loop error {:.3}", attrs.epsilon);

    for ordering in [EdgeOrdering::SupportThenError, EdgeOrdering::ErrorOnly] {
        let outcome = run_edge_filter(&scene.graph, &FilterConfig { ordering, ..FilterConfig::default() })?;
        let removed: HashSet<(usize, usize)> = outcome.stats.removed.iter().copied().collect();
        let (mut hit, mut lost) = (0, 0);
        for (e, &outlier) in scene.graph.edges().iter().zip(&scene.outlier_labels) {
            match (removed.contains(&(e.i, e.j)), outlier) {
                (true, true) => hit += 1,
                (true, false) => lost += 1,
                _ => {}
            }
        }
        println!(
            "{ordering:?}: removed {hit} of {planted} outliers and {lost} inliers, {} edges left",
            outcome.stats.kept_edges
        );
    }
    Ok(())
}
