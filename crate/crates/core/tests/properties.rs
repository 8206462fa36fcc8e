use nalgebra::{DMatrix, Matrix3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rotsync::dmf::reweight;
use rotsync::eval::error_summary;
use rotsync::filter::{run_edge_filter, FilterConfig};
use rotsync::io::{format_dataset, parse_dataset, GraphFormat};
use rotsync::so3::{
    chordal_distance, exp_map, geodesic_distance, log_map, project_to_so3, random_rotation, AxisAngle, Rotation,
};
use rotsync::synth::{synthesize, SynthParams};
use rotsync::{build_observation_matrix, is_connected};

fn rotation_from_seed(seed: u64) -> Rotation {
    random_rotation(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn scene(n: usize, density: f64, noise: f64, outliers: f64, seed: u64) -> rotsync::synth::SyntheticScene {
    synthesize(
        &SynthParams { n, density, noise_sigma_deg: noise, outlier_ratio: outliers },
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_inverts_exp_below_pi(x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64, scale in 0.0..3.1f64) {
        let v = nalgebra::Vector3::new(x, y, z);
        prop_assume!(v.norm() > 1e-6);
        let w = AxisAngle(v.normalize() * scale);
        let back = log_map(&exp_map(&w));
        prop_assert!((back.0 - w.0).norm() < 1e-9);
    }

    #[test]
    fn chordal_matches_angle(a in any::<u64>(), b in any::<u64>()) {
        let (r1, r2) = (rotation_from_seed(a), rotation_from_seed(b));
        let theta = geodesic_distance(&r1, &r2);
        let expected = 2.0 * 2f64.sqrt() * (theta / 2.0).sin();
        prop_assert!((chordal_distance(&r1, &r2) - expected).abs() < 1e-9);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&theta));
    }

    #[test]
    fn projection_returns_rotations(entries in prop::array::uniform9(-2.0..2.0f64)) {
        let m = Matrix3::from_row_slice(&entries);
        prop_assume!(m.determinant().abs() > 1e-3);
        let r = project_to_so3(&m).unwrap();
        let q = r.matrix();
        prop_assert!((q.transpose() * q - Matrix3::identity()).norm() < 1e-9);
        prop_assert!((q.determinant() - 1.0).abs() < 1e-9);
        // idempotent on rotations
        prop_assert!((project_to_so3(q).unwrap().matrix() - q).norm() < 1e-12);
    }

    #[test]
    fn error_is_invariant_to_the_gauge(seed in any::<u64>(), g in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt: Vec<Rotation> = (0..6).map(|_| random_rotation(&mut rng)).collect();
        let pred: Vec<Rotation> = (0..6).map(|_| random_rotation(&mut rng)).collect();
        let q = rotation_from_seed(g);
        let moved: Vec<Rotation> = pred.iter().map(|p| p * &q).collect();
        let a = error_summary(&pred, &gt);
        let b = error_summary(&moved, &gt);
        prop_assert!((a.mean_deg - b.mean_deg).abs() < 1e-7);
    }

    #[test]
    fn plain_text_round_trip(seed in any::<u64>(), n in 3usize..12) {
        let s = scene(n, 0.5, 3.0, 0.2, seed);
        let text = format_dataset(&s.graph, Some(&s.ground_truth), GraphFormat::Plain).unwrap();
        let back = parse_dataset(&text, GraphFormat::Plain, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back.graph.num_edges(), s.graph.num_edges());
        for (a, b) in back.graph.edges().iter().zip(s.graph.edges()) {
            prop_assert_eq!((a.i, a.j), (b.i, b.j));
            prop_assert!((a.rot.matrix() - b.rot.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn reweighting_never_increases_weights(seed in any::<u64>(), scale in 0.0..2.0f64) {
        let s = scene(6, 0.8, 5.0, 0.3, seed);
        let obs = build_observation_matrix(&s.graph);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let g_hat = DMatrix::from_fn(18, 18, |_, _| scale * rand::Rng::random::<f64>(&mut rng));
        let w = reweight(&obs, &g_hat);
        prop_assert!(w.iter().zip(obs.weights().iter()).all(|(a, b)| a <= b));
        prop_assert_eq!(&w, &w.transpose());
    }

    #[test]
    fn filter_keeps_a_connected_spanning_tree(seed in any::<u64>(), outliers in 0.0..0.5f64) {
        let s = scene(12, 0.5, 5.0, outliers, seed);
        let out = run_edge_filter(&s.graph, &FilterConfig::default()).unwrap();
        prop_assert!(is_connected(&out.graph));
        prop_assert_eq!(out.tree.num_tree_edges(), 11);
        for (k, e) in s.graph.edges().iter().enumerate() {
            if out.tree.tree_edges[k] {
                prop_assert!(out.graph.has_edge(e.i, e.j));
            }
        }
        prop_assert_eq!(out.stats.kept_edges + out.stats.removed_edges, s.graph.num_edges());
    }
}
