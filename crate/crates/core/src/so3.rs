//! Rotations in SO(3): metrics, exponential/logarithm maps, projection and sampling.
//!
//! Rotations are stored as 3×3 matrices because everything downstream (block
//! observation matrices, factorization) works on matrices. Quaternions only show
//! up at the edges, for file IO and for sampling.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Orthonormality / determinant tolerance applied when wrapping raw matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Below this trace offset from -1 the logarithm switches to the quaternion branch.
const NEAR_PI_TRACE: f64 = 1e-6;

/// Ratio σ_min/σ_max under which a matrix is treated as rank-deficient.
const SINGULAR_RATIO: f64 = 1e-12;

/// A proper rotation: orthonormal 3×3 matrix with determinant +1.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

/// Tangent-space vector: unit axis scaled by the rotation angle in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle(pub Vector3<f64>);

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "Rotation[[{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}]]",
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)]
        )
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix without any check. Callers guarantee the invariants.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Wraps a raw matrix, re-projecting it onto SO(3) when it misses the
    /// 1e-9 orthonormality/determinant tolerance. The flag reports whether a
    /// projection happened.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<(Self, bool)> {
        if is_rotation(&m, ROTATION_TOLERANCE) {
            return Ok((Rotation(m), false));
        }
        let r = project_to_so3(&m)?;
        log::warn!("matrix is not a rotation within {ROTATION_TOLERANCE:e}; re-projected onto SO(3)");
        Ok((r, true))
    }

    /// Rotation from a (not necessarily normalized) quaternion in w, x, y, z order.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::InvalidParam(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        let (w, x, y, z) = (w / norm, x / norm, y / norm, z / norm);
        let m = Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        Ok(Rotation(m))
    }

    /// Unit quaternion `[w, x, y, z]` with `w >= 0` (Shepperd's method).
    pub fn to_quaternion(&self) -> [f64; 4] {
        let m = &self.0;
        let tr = m.trace();
        let (d0, d1, d2) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
        let mut q = if tr >= d0 && tr >= d1 && tr >= d2 {
            let s = 2.0 * (1.0 + tr).sqrt();
            [
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            ]
        } else if d0 >= d1 && d0 >= d2 {
            let s = 2.0 * (1.0 + d0 - d1 - d2).sqrt();
            [
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            ]
        } else if d1 >= d2 {
            let s = 2.0 * (1.0 - d0 + d1 - d2).sqrt();
            [
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            ]
        } else {
            let s = 2.0 * (1.0 - d0 - d1 + d2).sqrt();
            [
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            ]
        };
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        for c in &mut q {
            *c *= sign / norm;
        }
        q
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        log_map(self).angle()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rotation> for &'a Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &'a Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl AxisAngle {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AxisAngle(Vector3::new(x, y, z))
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

/// Skew-symmetric cross-product matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// True when `m` is orthonormal with determinant +1 within `tol`.
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    m.iter().all(|v| v.is_finite())
        && (m.transpose() * m - Matrix3::identity()).norm() <= tol
        && (m.determinant() - 1.0).abs() <= tol
}

/// Logarithm map SO(3) → so(3). The returned angle lies in `[0, π]`.
pub fn log_map(r: &Rotation) -> AxisAngle {
    let m = &r.0;
    let tr = m.trace();
    if tr < -1.0 + NEAR_PI_TRACE {
        // sin θ → 0 here, so go through the quaternion instead.
        let [w, x, y, z] = r.to_quaternion();
        let v = Vector3::new(x, y, z);
        let s = v.norm();
        if s == 0.0 {
            return AxisAngle(Vector3::zeros());
        }
        let angle = 2.0 * s.atan2(w);
        return AxisAngle(v * (angle / s));
    }
    let axis = vee(&(m - m.transpose())) * 0.5;
    let sin = axis.norm();
    let cos = 0.5 * (tr - 1.0);
    let angle = sin.atan2(cos);
    let scale = if angle < 1e-6 {
        1.0 + angle * angle / 6.0
    } else {
        angle / sin
    };
    AxisAngle(axis * scale)
}

/// Exponential map so(3) → SO(3) (Rodrigues' formula).
pub fn exp_map(v: &AxisAngle) -> Rotation {
    let theta = v.0.norm();
    let k = skew(&v.0);
    let k2 = k * k;
    let (a, b) = if theta < 1e-6 {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Rotation(Matrix3::identity() + k * a + k2 * b)
}

/// Angle of `r1 · r2ᵀ` in radians, in `[0, π]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    log_map(&Rotation(r1.0 * r2.0.transpose())).angle()
}

/// Frobenius distance `‖r1 − r2‖_F`.
pub fn chordal_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    (r1.0 - r2.0).norm()
}

/// Chordal distance corresponding to a geodesic angle: `2√2 · sin(θ/2)`.
pub fn chordal_from_angle(theta: f64) -> f64 {
    2.0 * 2f64.sqrt() * (0.5 * theta).sin()
}

/// Nearest rotation in Frobenius norm: `U · diag(1, 1, det(UVᵀ)) · Vᵀ`.
///
/// Matrices that already are rotations (to 1e-12) are returned untouched, which
/// makes the projection exactly idempotent.
pub fn project_to_so3(m: &Matrix3<f64>) -> Result<Rotation> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularInput(f64::NAN));
    }
    if is_rotation(m, 1e-12) {
        return Ok(Rotation(*m));
    }
    let svd = m.svd(true, true);
    let sv = svd.singular_values;
    let (mut smax, mut smin, mut imin) = (sv[0], sv[0], 0);
    for k in 1..3 {
        smax = smax.max(sv[k]);
        if sv[k] < smin {
            smin = sv[k];
            imin = k;
        }
    }
    if smax <= 0.0 || smin <= SINGULAR_RATIO * smax {
        return Err(Error::SingularInput(if smax > 0.0 { smin / smax } else { 0.0 }));
    }
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut d = Matrix3::identity();
    d[(imin, imin)] = (u * v_t).determinant().signum();
    Ok(Rotation(u * d * v_t))
}

/// Haar-uniform random rotation (normalized Gaussian quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let norm2: f64 = q.iter().map(|c| c * c).sum();
        if norm2 > 1e-12 {
            return Rotation::from_quaternion(q[0], q[1], q[2], q[3])
                .expect("quaternion has nonzero norm");
        }
    }
}

/// `exp_map` of an isotropic Gaussian tangent vector with per-axis standard
/// deviation `sigma_deg` degrees.
pub fn random_perturbation<R: Rng + ?Sized>(sigma_deg: f64, rng: &mut R) -> Rotation {
    if sigma_deg <= 0.0 {
        return Rotation::identity();
    }
    let normal = Normal::new(0.0, sigma_deg.to_radians()).expect("finite positive sigma");
    let v = Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
    exp_map(&AxisAngle(v))
}

/// Rotation by `angle` radians about the z axis.
pub fn rot_z(angle: f64) -> Rotation {
    exp_map(&AxisAngle::new(0.0, 0.0, angle))
}

/// Rotation by `angle` radians about the x axis.
pub fn rot_x(angle: f64) -> Rotation {
    exp_map(&AxisAngle::new(angle, 0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Rotation3, Unit, UnitQuaternion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Reference log map through nalgebra's quaternion conversion.
    fn quaternion_log(r: &Rotation) -> Vector3<f64> {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r.matrix()));
        q.scaled_axis()
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(log_map(&Rotation::identity()).0, Vector3::zeros());
    }

    #[test]
    fn log_quarter_turn_about_z() {
        let r = Rotation(Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0));
        let v = log_map(&r).0;
        let oracle = quaternion_log(&r);
        assert_abs_diff_eq!(oracle, Vector3::new(0.0, 0.0, PI / 2.0), epsilon = 1e-12);
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
    }

    #[test]
    fn log_half_turn_about_x() {
        let r = Rotation(Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0));
        let v = log_map(&r).0;
        let oracle = quaternion_log(&r);
        assert_abs_diff_eq!(oracle.norm(), PI, epsilon = 1e-12);
        // axis sign is ambiguous at π; compare up to sign
        assert!((v - oracle).norm() < 1e-9 || (v + oracle).norm() < 1e-9);
        assert_abs_diff_eq!(v, Vector3::new(PI, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn log_near_pi_matches_quaternion_oracle() {
        let axis = Unit::new_normalize(Vector3::new(0.3, -0.5, 0.8));
        for eps in [1e-3, 1e-5, 1e-7, 1e-9] {
            let v = axis.into_inner() * (PI - eps);
            let r = exp_map(&AxisAngle(v));
            let back = log_map(&r).0;
            let oracle = quaternion_log(&r);
            assert!((back - oracle).norm() < 1e-7, "eps {eps}: {back:?} vs {oracle:?}");
            assert!((back.norm() - (PI - eps)).abs() < 1e-7);
        }
    }

    #[test]
    fn exp_zero_and_quarter_turn() {
        assert_eq!(exp_map(&AxisAngle::new(0.0, 0.0, 0.0)), Rotation::identity());
        let r = exp_map(&AxisAngle::new(0.0, 0.0, PI / 2.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_small_is_first_order() {
        for &s in &[1e-2, 1e-3, 1e-4] {
            let v = Vector3::new(0.3, -0.2, 0.5) * s;
            let r = exp_map(&AxisAngle(v));
            let err = (r.matrix() - (Matrix3::identity() + skew(&v))).norm();
            assert!(err <= v.norm_squared(), "err {err} for |v| {}", v.norm());
        }
    }

    #[test]
    fn geodesic_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random_rotation(&mut rng);
        assert_eq!(geodesic_distance(&r, &r), 0.0);
        let axis = Unit::new_normalize(Vector3::new(1.0, 2.0, -0.5));
        let r3 = exp_map(&AxisAngle(axis.into_inner() * PI / 3.0));
        assert_abs_diff_eq!(geodesic_distance(&Rotation::identity(), &r3), PI / 3.0, epsilon = 1e-12);
        for _ in 0..100 {
            let a = random_rotation(&mut rng);
            let b = random_rotation(&mut rng);
            let tr = (a.matrix() * b.matrix().transpose()).trace();
            let oracle = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
            // acos loses precision near 0 and π; compare only in its well-conditioned range
            if oracle > 1e-3 && oracle < PI - 1e-3 {
                assert_abs_diff_eq!(geodesic_distance(&a, &b), oracle, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn chordal_examples() {
        let r = rot_z(0.4);
        assert_eq!(chordal_distance(&r, &r), 0.0);
        let q = rot_z(PI / 2.0);
        assert_abs_diff_eq!(chordal_distance(&Rotation::identity(), &q), 2.0, epsilon = 1e-12);
        let h = rot_x(PI);
        assert_abs_diff_eq!(chordal_distance(&Rotation::identity(), &h), 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(chordal_from_angle(PI / 2.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random_rotation(&mut rng);
        assert_eq!(project_to_so3(r.matrix()).unwrap(), r);
        let p = project_to_so3(&(r.matrix() * 2.0)).unwrap();
        assert!(chordal_distance(&p, &r) < 1e-12);

        let noise = Matrix3::from_fn(|_, _| rng.random::<f64>() - 0.5);
        let p = project_to_so3(&(r.matrix() + noise * 1e-3)).unwrap();
        assert!(geodesic_distance(&p, &r) < 1e-2);
    }

    #[test]
    fn projection_beats_sampled_rotations() {
        // brute-force certificate of the Procrustes optimum
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let m = Matrix3::from_fn(|_, _| rng.random::<f64>() * 2.0 - 1.0);
            let p = project_to_so3(&m).unwrap();
            let best = (m - p.matrix()).norm();
            for _ in 0..500 {
                let q = random_rotation(&mut rng);
                assert!((m - q.matrix()).norm() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn projection_rejects_singular() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(project_to_so3(&m), Err(Error::SingularInput(_))));
        assert!(project_to_so3(&Matrix3::zeros()).is_err());
    }

    #[test]
    fn projection_fixes_reflections() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        let p = project_to_so3(&m).unwrap();
        assert!(is_rotation(p.matrix(), 1e-12));
    }

    #[test]
    fn from_matrix_reprojects_sloppy_input() {
        let r = rot_z(0.3);
        let (same, flagged) = Rotation::from_matrix(*r.matrix()).unwrap();
        assert!(!flagged);
        assert_eq!(same, r);
        let (fixed, flagged) = Rotation::from_matrix(r.matrix() * 1.001).unwrap();
        assert!(flagged);
        assert!(is_rotation(fixed.matrix(), 1e-12));
    }

    #[test]
    fn quaternion_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            let [w, x, y, z] = r.to_quaternion();
            assert!(w >= 0.0);
            let back = Rotation::from_quaternion(w, x, y, z).unwrap();
            assert!((back.matrix() - r.matrix()).norm() < 1e-14);
            let oracle = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r.matrix()));
            let s = if oracle.w < 0.0 { -1.0 } else { 1.0 };
            assert_abs_diff_eq!(w, s * oracle.w, epsilon = 1e-12);
            assert_abs_diff_eq!(x, s * oracle.i, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_rotation_is_deterministic_and_haar() {
        let a = random_rotation(&mut ChaCha8Rng::seed_from_u64(9));
        let b = random_rotation(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let r = random_rotation(&mut rng);
            assert!(is_rotation(r.matrix(), 1e-9));
            sum += r.matrix().trace();
        }
        assert!((sum / n as f64).abs() < 0.05);
    }

    #[test]
    fn perturbation_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        assert_eq!(random_perturbation(0.0, &mut rng), Rotation::identity());

        // Monte-Carlo oracle for the mean angle: ‖N(0, σ²I₃)‖ sampled directly,
        // without going through exp/log. Chi(3) mean is σ·2√(2/π).
        let sigma = 5.0f64.to_radians();
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut oracle_rng = ChaCha8Rng::seed_from_u64(22);
        let n = 10_000;
        let oracle: f64 = (0..n)
            .map(|_| {
                Vector3::new(
                    normal.sample(&mut oracle_rng),
                    normal.sample(&mut oracle_rng),
                    normal.sample(&mut oracle_rng),
                )
                .norm()
            })
            .sum::<f64>()
            / n as f64;
        assert!((oracle - sigma * 2.0 * (2.0 / PI).sqrt()).abs() < 0.02 * oracle);

        let mean: f64 = (0..n)
            .map(|_| {
                let r = random_perturbation(5.0, &mut rng);
                assert!(is_rotation(r.matrix(), 1e-9));
                r.angle()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - oracle).abs() < 0.03 * oracle, "mean {mean} vs oracle {oracle}");
    }
}
