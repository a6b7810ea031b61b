//! RMSE, MAPE and SMAPE over H-step prediction sequences, aggregated as an
//! unweighted mean over samples.
//!
//! SMAPE here is `mean(|y − ŷ| / |y + ŷ|)` with no factor of two.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {truth} targets vs {pred} predictions")]
    Length { truth: usize, pred: usize },
    #[error("{metric} undefined: zero denominator at step {step}")]
    Undefined { metric: &'static str, step: usize },
    #[error("no samples to evaluate")]
    Empty,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), MetricError> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(MetricError::Length {
            truth: y.len(),
            pred: yhat.len(),
        });
    }
    Ok(())
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    let s: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / y.len() as f64)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    mse(y, yhat).map(f64::sqrt)
}

pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    let mut s = 0.0;
    for (k, (a, b)) in y.iter().zip(yhat).enumerate() {
        if *a == 0.0 {
            return Err(MetricError::Undefined { metric: "MAPE", step: k + 1 });
        }
        s += ((a - b) / a).abs();
    }
    Ok(s / y.len() as f64)
}

pub fn smape(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    let mut s = 0.0;
    for (k, (a, b)) in y.iter().zip(yhat).enumerate() {
        let den = (a + b).abs();
        if den == 0.0 {
            return Err(MetricError::Undefined { metric: "SMAPE", step: k + 1 });
        }
        s += (a - b).abs() / den;
    }
    Ok(s / y.len() as f64)
}

/// Dataset-level summary.
///
/// `rmse`, `mape` and `smape` are means of the per-sequence values.
/// `per_step_rmse[k]` pools squared errors of step `k` over samples, and
/// `pooled_rmse` pools all of them; the mean of `per_step_rmse²` equals
/// `pooled_rmse²`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub mape: f64,
    pub smape: f64,
    pub per_step_rmse: Vec<f64>,
    pub pooled_rmse: f64,
    pub n_samples: usize,
}

impl MetricReport {
    pub fn evaluate(truth: &[Vec<f64>], preds: &[Vec<f64>]) -> Result<Self, MetricError> {
        if truth.len() != preds.len() {
            return Err(MetricError::Length {
                truth: truth.len(),
                pred: preds.len(),
            });
        }
        if truth.is_empty() {
            return Err(MetricError::Empty);
        }
        let h = truth[0].len();
        let n = truth.len() as f64;
        let (mut r, mut m, mut s) = (0.0, 0.0, 0.0);
        let mut step_sq = vec![0.0; h];
        for (y, yhat) in truth.iter().zip(preds) {
            if y.len() != h {
                return Err(MetricError::Length { truth: h, pred: y.len() });
            }
            r += rmse(y, yhat)?;
            m += mape(y, yhat)?;
            s += smape(y, yhat)?;
            for (k, (a, b)) in y.iter().zip(yhat).enumerate() {
                step_sq[k] += (a - b) * (a - b);
            }
        }
        let per_step_mse: Vec<f64> = step_sq.iter().map(|v| v / n).collect();
        let pooled = per_step_mse.iter().sum::<f64>() / h as f64;
        Ok(MetricReport {
            rmse: r / n,
            mape: m / n,
            smape: s / n,
            per_step_rmse: per_step_mse.iter().map(|v| v.sqrt()).collect(),
            pooled_rmse: pooled.sqrt(),
            n_samples: truth.len(),
        })
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "rmse" => Some(self.rmse),
            "mape" => Some(self.mape),
            "smape" => Some(self.smape),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction_is_zero() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        assert_eq!(mape(&y, &y).unwrap(), 0.0);
        assert_eq!(smape(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn single_step_hand_values() {
        assert_eq!(rmse(&[2.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(mape(&[2.0], &[1.0]).unwrap(), 0.5);
        assert!((smape(&[2.0], &[1.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_denominators_are_errors() {
        assert_eq!(
            mape(&[1.0, 0.0], &[1.0, 1.0]),
            Err(MetricError::Undefined { metric: "MAPE", step: 2 })
        );
        assert_eq!(
            smape(&[1.0, -1.0], &[1.0, 1.0]),
            Err(MetricError::Undefined { metric: "SMAPE", step: 2 })
        );
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn mape_is_not_symmetric() {
        let a = mape(&[2.0], &[1.0]).unwrap();
        let b = mape(&[1.0], &[2.0]).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn report_pools_per_step() {
        let truth = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let preds = vec![vec![1.5, 2.0], vec![3.0, 5.0]];
        let r = MetricReport::evaluate(&truth, &preds).unwrap();
        assert_eq!(r.n_samples, 2);
        let mean_sq: f64 = r.per_step_rmse.iter().map(|v| v * v).sum::<f64>() / 2.0;
        assert!((mean_sq.sqrt() - r.pooled_rmse).abs() < 1e-9);
        assert!(r.rmse <= r.pooled_rmse + 1e-12);
        let zero = MetricReport::evaluate(&truth, &truth).unwrap();
        assert_eq!((zero.rmse, zero.mape, zero.smape), (0.0, 0.0, 0.0));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|h| {
            (
                proptest::collection::vec(0.1f64..10.0, h),
                proptest::collection::vec(0.1f64..10.0, h),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetries((y, yhat) in pair()) {
            prop_assert_eq!(rmse(&y, &yhat).unwrap(), rmse(&yhat, &y).unwrap());
            prop_assert!((smape(&y, &yhat).unwrap() - smape(&yhat, &y).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn scale_behaviour((y, yhat) in pair(), c in 0.01f64..100.0) {
            let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
            let ps: Vec<f64> = yhat.iter().map(|v| v * c).collect();
            let r0 = rmse(&y, &yhat).unwrap();
            prop_assert!((rmse(&ys, &ps).unwrap() - c * r0).abs() <= 1e-9 * (1.0 + c * r0));
            prop_assert!((mape(&ys, &ps).unwrap() - mape(&y, &yhat).unwrap()).abs() < 1e-12);
            prop_assert!((smape(&ys, &ps).unwrap() - smape(&y, &yhat).unwrap()).abs() < 1e-12);
        }
    }
}
