//! Gauge alignment and angular error statistics.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::so3::{geodesic_distance, project_to_so3, Rotation};
use crate::stats::{mean, median};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean_deg: f64,
    pub median_deg: f64,
    pub per_vertex_deg: Vec<f64>,
    /// Right gauge applied to the ground truth, as a row-major 3×3 matrix in
    /// serialized form.
    #[serde(with = "rotation_rows")]
    pub align: Rotation,
}

/// Closed-form `argmin_R Σ ‖R_i^pred − R_i^gt R‖_F²`.
///
/// Panics if the slices differ in length or are empty.
pub fn gauge_align(pred: &[Rotation], gt: &[Rotation]) -> Rotation {
    assert_eq!(pred.len(), gt.len(), "prediction and ground truth differ in length");
    assert!(!pred.is_empty(), "nothing to align");
    let m: Matrix3<f64> = gt
        .iter()
        .zip(pred)
        .map(|(g, p)| g.matrix().transpose() * p.matrix())
        .sum();
    // a rank-deficient sum only happens for adversarial inputs; any rotation is optimal then
    project_to_so3(&m).unwrap_or_else(|_| Rotation::identity())
}

pub fn error_summary(pred: &[Rotation], gt: &[Rotation]) -> ErrorSummary {
    let align = gauge_align(pred, gt);
    let per_vertex_deg: Vec<f64> = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| geodesic_distance(p, &(g * &align)).to_degrees())
        .collect();
    summarize(per_vertex_deg, align)
}

/// [`error_summary`] over the vertices that have a reference orientation; the
/// per-vertex list follows that subset. `None` when no vertex has one.
pub fn error_summary_partial(pred: &[Rotation], gt: &[Option<Rotation>]) -> Option<ErrorSummary> {
    assert_eq!(pred.len(), gt.len(), "prediction and ground truth differ in length");
    let (p, g): (Vec<Rotation>, Vec<Rotation>) = pred
        .iter()
        .zip(gt)
        .filter_map(|(p, g)| g.map(|g| (*p, g)))
        .unzip();
    (!p.is_empty()).then(|| error_summary(&p, &g))
}

fn summarize(per_vertex_deg: Vec<f64>, align: Rotation) -> ErrorSummary {
    ErrorSummary {
        mean_deg: mean(&per_vertex_deg).unwrap_or(0.0),
        median_deg: median(&per_vertex_deg).unwrap_or(0.0),
        per_vertex_deg,
        align,
    }
}

mod rotation_rows {
    use super::Rotation;
    use nalgebra::Matrix3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &Rotation, s: S) -> Result<S::Ok, S::Error> {
        let m = r.matrix();
        let rows: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rotation, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        let m = Matrix3::from_fn(|i, j| rows[i][j]);
        Rotation::from_matrix(m)
            .map(|(r, _)| r)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{exp_map, random_rotation, rot_z, AxisAngle};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_set(n: usize, rng: &mut ChaCha8Rng) -> Vec<Rotation> {
        (0..n).map(|_| random_rotation(rng)).collect()
    }

    fn cost(pred: &[Rotation], gt: &[Rotation], q: &Rotation) -> f64 {
        pred.iter()
            .zip(gt)
            .map(|(p, g)| (p.matrix() - (g * q).matrix()).norm_squared())
            .sum()
    }

    #[test]
    fn identity_and_exact_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gt = random_set(6, &mut rng);
        assert!((gauge_align(&gt, &gt).matrix() - Matrix3::identity()).norm() < 1e-12);
        let q = random_rotation(&mut rng);
        let pred: Vec<Rotation> = gt.iter().map(|g| g * &q).collect();
        assert!((gauge_align(&pred, &gt).matrix() - q.matrix()).norm() < 1e-12);
        let s = error_summary(&pred, &gt);
        assert!(s.per_vertex_deg.iter().all(|&e| e < 1e-6));
    }

    #[test]
    fn single_vertex_is_plain_procrustes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (p, g) = (random_rotation(&mut rng), random_rotation(&mut rng));
        let a = gauge_align(&[p], &[g]);
        assert!((a.matrix() - g.transpose().matrix() * p.matrix()).norm() < 1e-12);
    }

    #[test]
    fn ten_and_twenty_degrees() {
        // residuals 10° and 20° about opposite x directions around a common gauge
        // tilt: the optimal gauge rotates by -5° about x, which leaves 15° and 15°.
        let gt = vec![Rotation::identity(), rot_z(0.3)];
        let pred = vec![
            exp_map(&AxisAngle::new(10f64.to_radians(), 0.0, 0.0)),
            gt[1] * exp_map(&AxisAngle::new(-20f64.to_radians(), 0.0, 0.0)),
        ];
        let s = error_summary(&pred, &gt);
        assert_abs_diff_eq!(s.per_vertex_deg[0], 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.per_vertex_deg[1], 15.0, epsilon = 1e-9);

        // an explicit 10° / 20° pair measured against a fixed gauge
        let summary = summarize(vec![10.0, 20.0], Rotation::identity());
        assert_eq!((summary.mean_deg, summary.median_deg), (15.0, 15.0));
    }

    #[test]
    fn alignment_beats_random_gauges() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let gt = random_set(5, &mut rng);
            let pred = random_set(5, &mut rng);
            let best = cost(&pred, &gt, &gauge_align(&pred, &gt));
            for _ in 0..50 {
                let q = random_rotation(&mut rng);
                assert!(best <= cost(&pred, &gt, &q) + 1e-9);
            }
        }
    }

    #[test]
    fn summary_is_gauge_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = random_set(8, &mut rng);
        let pred: Vec<Rotation> = gt
            .iter()
            .map(|g| g * &crate::so3::random_perturbation(15.0, &mut rng))
            .collect();
        let base = error_summary(&pred, &gt);
        let q = random_rotation(&mut rng);
        let moved: Vec<Rotation> = pred.iter().map(|p| p * &q).collect();
        let s = error_summary(&moved, &gt);
        assert_abs_diff_eq!(s.mean_deg, base.mean_deg, epsilon = 1e-9);
        assert_abs_diff_eq!(s.median_deg, base.median_deg, epsilon = 1e-9);
        let both: Vec<Rotation> = gt.iter().map(|g| g * &q).collect();
        let s = error_summary(&moved, &both);
        assert_abs_diff_eq!(s.mean_deg, base.mean_deg, epsilon = 1e-9);
    }

    #[test]
    fn partial_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gt = random_set(5, &mut rng);
        let pred = random_set(5, &mut rng);
        let masked: Vec<Option<Rotation>> = gt.iter().enumerate().map(|(i, g)| (i % 2 == 0).then_some(*g)).collect();
        let s = error_summary_partial(&pred, &masked).unwrap();
        let direct = error_summary(&[pred[0], pred[2], pred[4]], &[gt[0], gt[2], gt[4]]);
        assert_eq!(s, direct);
        assert!(error_summary_partial(&pred, &[None; 5]).is_none());
    }

    #[test]
    fn serde_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt = random_set(3, &mut rng);
        let s = error_summary(&random_set(3, &mut rng), &gt);
        let text = serde_json::to_string(&s).unwrap();
        let back: ErrorSummary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
