//! Weighted masked ℓ1 loss, its subgradient and the reweighting rule.

use nalgebra::{DMatrix, Matrix3};

use super::factors::{gram_block, FactorStack};
use crate::graph::ObservationMatrix;
use crate::stats::median;

/// Anything that can hand out 3×3 blocks of an estimate `Ĝ`.
pub(crate) trait BlockSource {
    fn block(&self, i: usize, j: usize) -> Matrix3<f64>;
}

impl BlockSource for DMatrix<f64> {
    fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        self.fixed_view::<3, 3>(3 * i, 3 * j).into_owned()
    }
}

/// `Ĝ = H Hᵀ` evaluated lazily, block by block.
pub(crate) struct Gram<'a>(pub &'a DMatrix<f64>);

impl BlockSource for Gram<'_> {
    fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        gram_block(self.0, i, j)
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn abs_sum(m: &Matrix3<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

pub(crate) fn loss_of<S: BlockSource>(src: &S, obs: &ObservationMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..obs.n() {
        total += obs.weight(i, i) * abs_sum(&(src.block(i, i) - obs.block(i, i)));
    }
    for &(i, j) in obs.pairs() {
        // (i, j) and (j, i) carry transposed residuals with equal ℓ1 mass
        total += 2.0 * obs.weight(i, j) * abs_sum(&(src.block(i, j) - obs.block(i, j)));
    }
    total
}

/// `Σ_{observed blocks} w_ij · Σ |ĝ − g̃|`, over the full 3n×3n mask (each
/// off-diagonal pair contributes both of its blocks).
pub fn loss(g_hat: &DMatrix<f64>, obs: &ObservationMatrix) -> f64 {
    loss_of(g_hat, obs)
}

/// `∂L/∂H = (D + Dᵀ) H` with `D = w ⊙ Ω ⊙ sign(H Hᵀ − G̃)`, built block-wise.
pub(crate) fn grad_h(h: &DMatrix<f64>, obs: &ObservationMatrix) -> DMatrix<f64> {
    let mut d_h = DMatrix::zeros(h.nrows(), 3);
    let hb = |k: usize| h.fixed_view::<3, 3>(3 * k, 0).into_owned();
    for i in 0..obs.n() {
        let s = (gram_block(h, i, i) - obs.block(i, i)).map(sign) * (2.0 * obs.weight(i, i));
        let upd = s * hb(i);
        let mut row = d_h.fixed_view_mut::<3, 3>(3 * i, 0);
        row += upd;
    }
    for &(i, j) in obs.pairs() {
        let s = (gram_block(h, i, j) - obs.block(i, j)).map(sign) * (2.0 * obs.weight(i, j));
        let to_i = s * hb(j);
        let to_j = s.transpose() * hb(i);
        let mut row = d_h.fixed_view_mut::<3, 3>(3 * i, 0);
        row += to_i;
        let mut row = d_h.fixed_view_mut::<3, 3>(3 * j, 0);
        row += to_j;
    }
    d_h
}

/// Subgradient of `loss ∘ forward` with respect to every factor (`sign(0) = 0`).
pub fn gradient(stack: &FactorStack, obs: &ObservationMatrix) -> Vec<DMatrix<f64>> {
    let suffix = stack.suffix_products();
    let d_h = grad_h(&suffix[0], obs);
    stack.backprop(&suffix, &d_h)
}

/// Loss value and factor gradients from one forward pass.
#[cfg(test)]
pub(crate) fn loss_and_gradient(stack: &FactorStack, obs: &ObservationMatrix) -> (f64, DMatrix<f64>, Vec<DMatrix<f64>>) {
    let suffix = stack.suffix_products();
    let h = &suffix[0];
    let value = loss_of(&Gram(h), obs);
    let d_h = grad_h(h, obs);
    let grads = stack.backprop(&suffix, &d_h);
    (value, suffix[0].clone(), grads)
}

/// Chordal residual `‖g̃_ij − ĝ_ij‖_F` for every observed off-diagonal pair.
pub(crate) fn block_errors<S: BlockSource>(src: &S, obs: &ObservationMatrix) -> Vec<f64> {
    obs.pairs()
        .iter()
        .map(|&(i, j)| (obs.block(i, j) - src.block(i, j)).norm())
        .collect()
}

/// Applies one reweighting step in place and returns `τ`.
///
/// `τ` is the median block residual; blocks with residual above `τ` are scaled
/// by `τ / e`, the rest keep their weight. With `τ = 0` nothing changes, which
/// keeps every weight strictly positive.
pub(crate) fn reweight_in_place<S: BlockSource>(obs: &mut ObservationMatrix, src: &S) -> Option<f64> {
    let errors = block_errors(src, obs);
    let tau = median(&errors)?;
    if tau > 0.0 {
        let pairs = obs.pairs().to_vec();
        for (&(i, j), &e) in pairs.iter().zip(&errors) {
            if e > tau {
                let w = obs.weight(i, j) * (tau / e);
                obs.set_weight(i, j, w);
            }
        }
    }
    Some(tau)
}

/// Weights after one reweighting step against the estimate `g_hat`.
pub fn reweight(obs: &ObservationMatrix, g_hat: &DMatrix<f64>) -> DMatrix<f64> {
    let mut next = obs.clone();
    reweight_in_place(&mut next, g_hat);
    next.weights().clone()
}
