use serde::{Deserialize, Serialize};

use super::{AuxError, Forecaster};
use crate::data::{ScalerParams, WindowedDataset};

/// Action order used throughout: the two auxiliary models, then the decoder.
pub const POOL_NAMES: [&str; 3] = ["MSVR", "MLP", "Decoder"];

/// Original-scale predictions indexed `(sample, pool slot, step)`. The last
/// slot belongs to the decoder and stays NaN until filled during decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastCube {
    names: Vec<String>,
    n_samples: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl ForecastCube {
    pub fn build<F: Forecaster>(
        pool: &[F],
        data: &WindowedDataset,
        scaler: &ScalerParams,
    ) -> Result<ForecastCube, AuxError> {
        let h = data.horizon;
        let mut names: Vec<String> = pool.iter().map(|m| m.name().to_string()).collect();
        names.push("Decoder".into());
        let slots = names.len();
        let mut values = vec![f64::NAN; data.len() * slots * h];
        for (i, s) in data.samples.iter().enumerate() {
            for (a, model) in pool.iter().enumerate() {
                let p = model.predict(&s.window)?;
                if p.len() != h {
                    return Err(AuxError::Dimension {
                        expected: h,
                        got: p.len(),
                    });
                }
                let base = (i * slots + a) * h;
                for (k, v) in p.iter().enumerate() {
                    values[base + k] = scaler.invert_value(0, *v);
                }
            }
        }
        let cube = ForecastCube {
            names,
            n_samples: data.len(),
            horizon: h,
            values,
        };
        cube.check_complete()?;
        Ok(cube)
    }

    /// Cube from explicit auxiliary predictions `aux[i][a][k]`.
    pub fn from_predictions(names: &[&str], aux: &[Vec<Vec<f64>>], horizon: usize) -> Result<ForecastCube, AuxError> {
        let mut all: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        all.push("Decoder".into());
        let slots = all.len();
        let mut values = vec![f64::NAN; aux.len() * slots * horizon];
        for (i, models) in aux.iter().enumerate() {
            if models.len() != names.len() {
                return Err(AuxError::Dimension {
                    expected: names.len(),
                    got: models.len(),
                });
            }
            for (a, p) in models.iter().enumerate() {
                if p.len() != horizon {
                    return Err(AuxError::Dimension {
                        expected: horizon,
                        got: p.len(),
                    });
                }
                let base = (i * slots + a) * horizon;
                values[base..base + horizon].copy_from_slice(p);
            }
        }
        Ok(ForecastCube {
            names: all,
            n_samples: aux.len(),
            horizon,
            values,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Pool size including the decoder slot.
    pub fn n_models(&self) -> usize {
        self.names.len()
    }

    pub fn decoder_slot(&self) -> usize {
        self.names.len() - 1
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, sample: usize, model: usize, step: usize) -> f64 {
        self.values[(sample * self.names.len() + model) * self.horizon + step]
    }

    /// All `H` predictions of one model for one sample.
    pub fn series(&self, sample: usize, model: usize) -> &[f64] {
        let base = (sample * self.names.len() + model) * self.horizon;
        &self.values[base..base + self.horizon]
    }

    pub fn set_decoder(&mut self, sample: usize, preds: &[f64]) {
        let slot = self.decoder_slot();
        let base = (sample * self.names.len() + slot) * self.horizon;
        self.values[base..base + self.horizon].copy_from_slice(preds);
    }

    /// Every auxiliary entry is finite.
    pub fn check_complete(&self) -> Result<(), AuxError> {
        for i in 0..self.n_samples {
            for a in 0..self.decoder_slot() {
                if let Some(k) = self.series(i, a).iter().position(|v| !v.is_finite()) {
                    return Err(AuxError::Hole {
                        sample: i,
                        model: self.names[a].clone(),
                        step: k + 1,
                    });
                }
            }
        }
        Ok(())
    }
}
