use nalgebra::DMatrix;

use super::config::OptimizerKind;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-16;

/// First-order update rule applied to a list of parameter matrices.
pub(crate) enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        m: Vec<DMatrix<f64>>,
        v: Vec<DMatrix<f64>>,
    },
}

impl Optimizer {
    pub(crate) fn new(kind: OptimizerKind, lr: f64, params: &[DMatrix<f64>]) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                step: 0,
                m: params.iter().map(|p| DMatrix::zeros(p.nrows(), p.ncols())).collect(),
                v: params.iter().map(|p| DMatrix::zeros(p.nrows(), p.ncols())).collect(),
            },
        }
    }

    pub(crate) fn step(&mut self, params: &mut [DMatrix<f64>], grads: &[DMatrix<f64>]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= g * *lr;
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let c1 = 1.0 - BETA1.powi(*step);
                let c2 = 1.0 - BETA2.powi(*step);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                    for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *p -= *lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = vec![DMatrix::from_element(2, 2, 3.0)];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05, &p);
        for _ in 0..2000 {
            let g = vec![p[0].clone() * 2.0];
            opt.step(&mut p, &g);
        }
        assert!(p[0].norm() < 1e-3);
    }

    #[test]
    fn sgd_step() {
        let mut p = vec![DMatrix::from_element(1, 1, 1.0)];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &p);
        opt.step(&mut p, &[DMatrix::from_element(1, 1, 2.0)]);
        assert!((p[0][0] - 0.8).abs() < 1e-15);
    }
}
