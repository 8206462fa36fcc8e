//! Unconstrained deep matrix factorization `Ĝ = W_1 ⋯ W_d` with square 3n×3n
//! factors. It has neither the width-3 bottleneck nor the symmetric sharing and
//! exists to reproduce the overfitting behaviour those constraints prevent.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::validate_depth;
use super::objective::BlockSource;
use crate::error::{Error, Result};
use crate::graph::{fix_handedness, ObservationMatrix};
use crate::so3::{project_to_so3, Rotation};

#[derive(Clone, Debug, PartialEq)]
pub struct VanillaStack {
    pub factors: Vec<DMatrix<f64>>,
}

/// Symmetric part of a dense estimate, block by block.
pub(crate) struct Symmetrized<'a>(pub &'a DMatrix<f64>);

impl BlockSource for Symmetrized<'_> {
    fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        let a = self.0.fixed_view::<3, 3>(3 * i, 3 * j);
        let b = self.0.fixed_view::<3, 3>(3 * j, 3 * i);
        (a + b.transpose()) * 0.5
    }
}

pub fn init_vanilla<R: Rng + ?Sized>(n: usize, depth: usize, init_scale: f64, rng: &mut R) -> Result<VanillaStack> {
    validate_depth(depth)?;
    let size = 3 * n;
    let factors = (0..depth)
        .map(|_| {
            if init_scale == 0.0 {
                return DMatrix::zeros(size, size);
            }
            let normal = Normal::new(0.0, init_scale).expect("valid scale");
            let data: Vec<f64> = (0..size * size).map(|_| normal.sample(rng)).collect();
            DMatrix::from_vec(size, size, data)
        })
        .collect();
    Ok(VanillaStack { factors })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl VanillaStack {
    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    /// `S_k = W_{k+1} ⋯ W_d` for k = 0..d (the last entry is the identity).
    fn suffix_products(&self) -> Vec<DMatrix<f64>> {
        let d = self.factors.len();
        let size = self.factors[0].nrows();
        let mut out = vec![DMatrix::identity(size, size)];
        for k in (1..d).rev() {
            let next = &self.factors[k] * out.last().expect("non-empty");
            out.push(next);
        }
        out.reverse();
        out
    }

    pub fn product(&self) -> DMatrix<f64> {
        &self.factors[0] * &self.suffix_products()[0]
    }

    /// Weighted masked ℓ1 loss over every observed block and its gradients.
    pub(crate) fn loss_and_gradient(&self, obs: &ObservationMatrix) -> (f64, DMatrix<f64>, Vec<DMatrix<f64>>) {
        let suffix = self.suffix_products();
        let g_hat = &self.factors[0] * &suffix[0];
        let size = g_hat.nrows();
        let mut d = DMatrix::zeros(size, size);
        let mut value = 0.0;
        let mut visit = |i: usize, j: usize, w: f64| {
            for r in 0..3 {
                for c in 0..3 {
                    let (a, b) = (3 * i + r, 3 * j + c);
                    let res = g_hat[(a, b)] - obs.g()[(a, b)];
                    value += w * res.abs();
                    d[(a, b)] = w * sign(res);
                }
            }
        };
        for i in 0..obs.n() {
            visit(i, i, obs.weight(i, i));
        }
        for &(i, j) in obs.pairs() {
            visit(i, j, obs.weight(i, j));
            visit(j, i, obs.weight(i, j));
        }
        let mut grads = Vec::with_capacity(self.factors.len());
        let mut upstream = d;
        for (k, w) in self.factors.iter().enumerate() {
            if k + 1 < self.factors.len() {
                grads.push(&upstream * suffix[k].transpose());
                upstream = w.transpose() * upstream;
            } else {
                grads.push(upstream.clone());
            }
        }
        (value, g_hat, grads)
    }
}

/// Orientations from a dense estimate: top three eigenvectors of its symmetric
/// part, scaled by √n, block-wise projected onto SO(3).
pub fn dense_orientations(g_hat: &DMatrix<f64>) -> Result<Vec<Rotation>> {
    let n = g_hat.nrows() / 3;
    let sym = (g_hat + g_hat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let scale = (n as f64).sqrt();
    let mut x = DMatrix::from_fn(3 * n, 3, |r, c| eig.eigenvectors[(r, idx[c])] * scale);
    fix_handedness(&mut x);
    (0..n)
        .map(|i| {
            let block: Matrix3<f64> = x.fixed_view::<3, 3>(3 * i, 0).into_owned();
            project_to_so3(&block).map_err(|_| Error::SingularBlock(i))
        })
        .collect()
}
