//! Eigenvector synchronization: orientations from the top three eigenvectors
//! of the block observation matrix.
//!
//! On a complete noise-free graph `G = X Xᵀ` with `Xᵀ X = n I`, so the leading
//! eigenspace is spanned by the columns of `X` and recovery is exact. Missing
//! blocks are left at zero on incomplete graphs, which makes the method a
//! heuristic there.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{build_observation_matrix, fix_handedness, is_connected, ViewGraph};
use crate::so3::{project_to_so3, Rotation};

/// Relative residual `‖G v − λ v‖ / ‖G‖_F` at which an eigenpair is accepted.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub orientations: Vec<Rotation>,
    /// `λ_1 ≥ λ_2 ≥ λ_3 ≥ λ_4`. Missing eigenvalues (n = 1) are reported as 0.
    pub top_eigenvalues: [f64; 4],
}

/// Leading eigenpairs of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// One eigenvector per column, unit norm.
    pub vectors: DMatrix<f64>,
    pub iterations: usize,
}

/// Top `k` eigenpairs of the symmetric matrix `a`, one at a time: each pair is
/// the leading Ritz pair of a Lanczos run (full reorthogonalization) restricted
/// to the orthogonal complement of the pairs already found. `max_iter` caps the
/// Lanczos steps of every single run.
pub fn top_eigenpairs(a: &DMatrix<f64>, k: usize, max_iter: usize) -> Result<EigenPairs> {
    assert!(a.is_square(), "matrix must be square");
    let dim = a.nrows();
    let k = k.min(dim);
    let tol = RESIDUAL_TOLERANCE * a.norm();
    // a fixed-seed start keeps the result independent of any caller RNG
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut found: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut iterations = 0;
    for _ in 0..k {
        let (value, vector, steps) = leading_pair(a, &found, max_iter, tol, &mut rng)?;
        iterations += steps;
        values.push(value);
        found.push(vector);
    }
    Ok(EigenPairs {
        values,
        vectors: DMatrix::from_columns(&found),
        iterations,
    })
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    // two passes of classical Gram-Schmidt are enough for working precision
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(v);
            v.axpy(-c, b, 1.0);
        }
    }
}

fn leading_pair(
    a: &DMatrix<f64>,
    locked: &[DVector<f64>],
    max_iter: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, DVector<f64>, usize)> {
    let dim = a.nrows();
    let room = dim - locked.len();
    let mut q = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
    orthogonalize(&mut q, locked);
    q /= q.norm();
    let mut basis: Vec<DVector<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    for step in 1..=max_iter {
        let current = basis.last().expect("non-empty");
        let mut w = a * current;
        alpha.push(current.dot(&w));
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let b = w.norm();

        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let top = (0..m)
            .max_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]))
            .expect("m >= 1");
        let estimate = b * eig.eigenvectors[(m - 1, top)].abs();
        // an invariant Krylov subspace makes every Ritz pair exact
        let exhausted = m == room || b == 0.0;
        if estimate < tol || exhausted {
            let mut v = DVector::zeros(dim);
            for (j, qj) in basis.iter().enumerate() {
                v.axpy(eig.eigenvectors[(j, top)], qj, 1.0);
            }
            orthogonalize(&mut v, locked);
            v /= v.norm();
            let rayleigh = v.dot(&(a * &v));
            if (a * &v - &v * rayleigh).norm() < tol || exhausted {
                return Ok((rayleigh, v, step));
            }
        }
        beta.push(b);
        basis.push(w / b);
    }
    Err(Error::NoConvergence(max_iter))
}

/// Synchronizes the graph from the leading eigenvectors of `G̃`.
pub fn spectral_solve(graph: &ViewGraph) -> Result<SpectralResult> {
    let n = graph.n();
    if n == 0 {
        return Err(Error::InvalidParam("empty graph".into()));
    }
    if !is_connected(graph) {
        return Err(Error::Disconnected);
    }
    let obs = build_observation_matrix(graph);
    let cap = 10 * 3 * n;
    let pairs = top_eigenpairs(obs.g(), 4, cap)?;
    let mut top_eigenvalues = [0.0; 4];
    for (slot, &v) in top_eigenvalues.iter_mut().zip(&pairs.values) {
        *slot = v;
    }

    let mut x = pairs.vectors.columns(0, 3).into_owned() * (n as f64).sqrt();
    fix_handedness(&mut x);
    let orientations = (0..n)
        .map(|i| {
            let block: Matrix3<f64> = x.fixed_view::<3, 3>(3 * i, 0).into_owned();
            project_to_so3(&block).map_err(|_| Error::SingularBlock(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralResult {
        orientations,
        top_eigenvalues,
    })
}
