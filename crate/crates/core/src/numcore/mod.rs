//! Dense numeric kernel: matrices, activations, parameter blocks with gradient
//! slots, optimizers, a seeded counter-based RNG and a finite-difference
//! gradient checker.

mod gradcheck;
mod linalg;
mod matrix;
mod optim;
mod rng;

pub use gradcheck::{grad_check, GradCheckReport};
pub use linalg::Cholesky;
pub use matrix::{axpy, dot, Matrix};
pub use optim::{sgd_step, Adam, Direction, Optimizer, OptimizerKind};
pub use rng::Rng;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("gradient probe failed at {block}[{index}]: objective is not finite")]
    Probe { block: String, index: usize },
}

/// A named learnable tensor and its gradient accumulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamBlock {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        ParamBlock::new(name, Matrix::zeros(rows, cols))
    }

    /// Uniform(−1/√fan_in, 1/√fan_in) initialization.
    pub fn fan_in_uniform(name: impl Into<String>, rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.uniform_range(-bound, bound))
            .collect();
        ParamBlock::new(name, Matrix::from_vec(rows, cols, data).expect("shape"))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything exposing its learnable blocks in a fixed, declared order.
pub trait Parameterized {
    fn blocks(&self) -> Vec<&ParamBlock>;
    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock>;

    fn zero_grad(&mut self) {
        for b in self.blocks_mut() {
            b.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.value.len()).sum()
    }

    /// Little-endian bytes of every parameter value, in block order.
    fn value_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * self.num_params());
        for b in self.blocks() {
            for v in b.value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    fn check_finite(&self) -> Result<(), NumError> {
        for b in self.blocks() {
            if !b.value.is_finite() {
                return Err(NumError::NonFinite {
                    context: format!("parameter {}", b.name),
                });
            }
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Matrix) -> Matrix {
    x.map(logistic)
}

pub fn tanh_act(x: &Matrix) -> Matrix {
    x.map(f64::tanh)
}

/// In-place softmax with max subtraction.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn activation_fixed_points() {
        assert_eq!(logistic(0.0), 0.5);
        let s = softmax_rows(&Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]));
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let t = tanh_act(&Matrix::from_rows(&[vec![1e6, -1e6]]));
        assert_eq!(t.data(), &[1.0, -1.0]);
        let big = sigmoid(&Matrix::from_rows(&[vec![800.0, -800.0]]));
        assert!(big.is_finite());
        assert_eq!(big.get(0, 0), 1.0);
        assert_eq!(big.get(0, 1), 0.0);
    }

    #[test]
    fn param_block_init_respects_fan_in() {
        let mut rng = super::Rng::new(1);
        let b = ParamBlock::fan_in_uniform("w", 8, 16, &mut rng);
        assert!(b.value.data().iter().all(|v| v.abs() <= 0.25));
        assert_eq!(b.grad.shape(), (8, 16));
    }

    proptest! {
        #[test]
        fn softmax_rows_are_probability_vectors(
            rows in proptest::collection::vec(proptest::collection::vec(-700.0f64..700.0, 1..6), 1..5)
        ) {
            let width = rows[0].len();
            let rows: Vec<Vec<f64>> = rows.into_iter().filter(|r| r.len() == width).collect();
            let m = Matrix::from_rows(&rows);
            let s = softmax_rows(&m);
            for r in 0..s.rows() {
                let row = s.row(r);
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn sigmoid_and_tanh_stay_in_range(x in -30.0f64..30.0) {
            let s = logistic(x);
            prop_assert!(s > 0.0 && s < 1.0);
            let t = x.tanh();
            prop_assert!(t.abs() <= 1.0);
            // strict below the point where f64 rounds tanh to ±1
            if x.abs() < 15.0 {
                prop_assert!(t > -1.0 && t < 1.0);
            }
        }
    }
}
