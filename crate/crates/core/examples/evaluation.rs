//! Gauge alignment: errors do not depend on the global frame of the estimate.
//!
//!     cargo run --example evaluation

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::eval::{error_summary, gauge_align};
use rotsync::so3::{geodesic_distance, random_perturbation, random_rotation, Rotation};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let truth: Vec<Rotation> = (0..50).map(|_| random_rotation(&mut rng)).collect();
    let gauge = random_rotation(&mut rng);
    // 3 degrees of noise per axis, expressed in a different frame
    let estimate: Vec<Rotation> = truth
        .iter()
        .map(|r| (r * &random_perturbation(3.0, &mut rng)) * gauge)
        .collect();

    let raw: f64 = estimate
        .iter()
        .zip(&truth)
        .map(|(e, t)| geodesic_distance(e, t).to_degrees())
        .sum::<f64>()
        / truth.len() as f64;
    let align = gauge_align(&estimate, &truth);
    let s = error_summary(&estimate, &truth);
    println!("unaligned mean error {raw:.2} deg");
    println!("recovered gauge is {:.3} deg from the true one", geodesic_distance(&align, &gauge).to_degrees());
    println!("aligned: mean {:.2} deg, median {:.2} deg", s.mean_deg, s.median_deg);
}
