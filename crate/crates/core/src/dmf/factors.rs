use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::validate_depth;
use crate::error::Result;

/// Factors `W_1 … W_{d/2}` of `H = ∏ W_i`, so that `Ĝ = H Hᵀ`.
///
/// All factors but the last are `3n×w` / `w×w` (w = 3n unless a reduced hidden
/// width is requested); the last one has exactly 3 columns, which caps
/// `rank(Ĝ)` at 3 whatever the entries are.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorStack {
    depth: usize,
    pub factors: Vec<DMatrix<f64>>,
}

impl FactorStack {
    pub fn from_factors(depth: usize, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        validate_depth(depth)?;
        assert_eq!(factors.len(), depth / 2, "a depth-{depth} stack has {} factors", depth / 2);
        for w in factors.windows(2) {
            assert_eq!(w[0].ncols(), w[1].nrows(), "factor shapes do not chain");
        }
        assert_eq!(factors.last().map(|f| f.ncols()), Some(3), "last factor must have 3 columns");
        Ok(FactorStack { depth, factors })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Rows of `H`, i.e. 3n.
    pub fn rows(&self) -> usize {
        self.factors[0].nrows()
    }

    pub fn n(&self) -> usize {
        self.rows() / 3
    }

    /// `H = W_1 ⋯ W_{d/2}`, evaluated right to left so every product has 3 columns.
    pub fn product(&self) -> DMatrix<f64> {
        self.suffix_products().swap_remove(0)
    }

    /// `P_k = W_k ⋯ W_last` for every k; `P_0 = H`.
    pub(crate) fn suffix_products(&self) -> Vec<DMatrix<f64>> {
        let m = self.factors.len();
        let mut out: Vec<DMatrix<f64>> = Vec::with_capacity(m);
        out.push(self.factors[m - 1].clone());
        for k in (0..m - 1).rev() {
            let next = &self.factors[k] * out.last().expect("non-empty");
            out.push(next);
        }
        out.reverse();
        out
    }

    /// Chain rule from `∂L/∂H` to every factor:
    /// `∂L/∂W_k = (W_1 ⋯ W_{k-1})ᵀ · ∂L/∂H · (W_{k+1} ⋯ W_last)ᵀ`.
    pub(crate) fn backprop(&self, suffix: &[DMatrix<f64>], d_h: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let m = self.factors.len();
        let mut grads = Vec::with_capacity(m);
        let mut upstream = d_h.clone();
        for k in 0..m {
            if k + 1 < m {
                grads.push(&upstream * suffix[k + 1].transpose());
                upstream = self.factors[k].transpose() * upstream;
            } else {
                grads.push(upstream.clone());
            }
        }
        grads
    }
}

/// Gaussian factors with standard deviation `init_scale`. `hidden_width`
/// overrides the 3n width of the intermediate factors.
pub fn init_factors<R: Rng + ?Sized>(
    n: usize,
    depth: usize,
    init_scale: f64,
    hidden_width: Option<usize>,
    rng: &mut R,
) -> Result<FactorStack> {
    validate_depth(depth)?;
    let rows = 3 * n;
    let width = hidden_width.unwrap_or(rows);
    let m = depth / 2;
    let mut factors = Vec::with_capacity(m);
    let mut sample = |r: usize, c: usize| -> DMatrix<f64> {
        if init_scale == 0.0 {
            return DMatrix::zeros(r, c);
        }
        let normal = Normal::new(0.0, init_scale).expect("valid scale");
        // column-major fill keeps the draw order independent of nalgebra internals
        let data: Vec<f64> = (0..r * c).map(|_| normal.sample(rng)).collect();
        DMatrix::from_vec(r, c, data)
    };
    let mut in_rows = rows;
    for k in 0..m {
        let cols = if k + 1 == m { 3 } else { width };
        factors.push(sample(in_rows, cols));
        in_rows = cols;
    }
    FactorStack::from_factors(depth, factors)
}

/// `(H, Ĝ = H Hᵀ)`. `Ĝ` is symmetrized so it is bit-exactly symmetric.
pub fn forward(stack: &FactorStack) -> (DMatrix<f64>, DMatrix<f64>) {
    let h = stack.product();
    let g = &h * h.transpose();
    let g_hat = (&g + g.transpose()) * 0.5;
    (h, g_hat)
}

/// Block `(i, j)` of the Gram matrix `H Hᵀ` without forming it.
#[inline]
pub(crate) fn gram_block(h: &DMatrix<f64>, i: usize, j: usize) -> Matrix3<f64> {
    let hi = h.fixed_view::<3, 3>(3 * i, 0);
    let hj = h.fixed_view::<3, 3>(3 * j, 0);
    hi * hj.transpose()
}
