use serde::{Deserialize, Serialize};

use super::{DataError, ScalerParams, TimeSeries};
use crate::numcore::Matrix;

/// Chronological split fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.64,
            val_frac: 0.16,
            test_frac: 0.20,
        }
    }
}

impl SplitSpec {
    /// Segment boundaries `[0, a)`, `[a, b)`, `[b, n)`.
    pub fn bounds(&self, n: usize) -> Result<[(usize, usize); 3], DataError> {
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 || [self.train_frac, self.val_frac, self.test_frac].iter().any(|f| *f < 0.0) {
            return Err(DataError::Invalid(format!("split fractions must be non-negative and sum to 1 (got {sum})")));
        }
        let a = (n as f64 * self.train_frac).round() as usize;
        let b = ((n as f64 * (self.train_frac + self.val_frac)).round() as usize).max(a).min(n);
        Ok([(0, a), (a, b), (b, n)])
    }
}

/// One supervised sample: `lags × channels` history ending at `anchor`
/// (inclusive) and the next `horizon` target values.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub window: Matrix,
    pub target: Vec<f64>,
    /// Index of the last observed row in the full series.
    pub anchor: usize,
}

impl Sample {
    /// y_t, the last observed target value.
    pub fn last_observed(&self) -> f64 {
        self.window.get(self.window.rows() - 1, 0)
    }

    /// Row-major flattening of the history window.
    pub fn flat_window(&self) -> &[f64] {
        self.window.data()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub samples: Vec<Sample>,
    pub lags: usize,
    pub horizon: usize,
    pub channels: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Stride-1 windows over rows `[start, end)` of `series`.
    pub fn from_segment(
        series: &TimeSeries,
        start: usize,
        end: usize,
        lags: usize,
        horizon: usize,
    ) -> WindowedDataset {
        let m = series.channels();
        let mut samples = Vec::new();
        if end >= start + lags + horizon {
            for first in start..=end - lags - horizon {
                let anchor = first + lags - 1;
                let mut window = Matrix::zeros(lags, m);
                for j in 0..lags {
                    for c in 0..m {
                        window.set(j, c, series.channel(c)[first + j]);
                    }
                }
                let target = series.values[anchor + 1..anchor + 1 + horizon].to_vec();
                samples.push(Sample {
                    window,
                    target,
                    anchor,
                });
            }
        }
        WindowedDataset {
            samples,
            lags,
            horizon,
            channels: m,
        }
    }
}

/// Splits the series chronologically, then windows each segment on its own
/// so no sample crosses a boundary.
pub fn window_and_split(
    series: &TimeSeries,
    lags: usize,
    horizon: usize,
    spec: &SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset), DataError> {
    if lags == 0 || horizon == 0 {
        return Err(DataError::Invalid("lags and horizon must be positive".into()));
    }
    let bounds = spec.bounds(series.len())?;
    let names = ["train", "val", "test"];
    let mut sets = Vec::with_capacity(3);
    for (&(s, e), name) in bounds.iter().zip(names) {
        let ds = WindowedDataset::from_segment(series, s, e, lags, horizon);
        if ds.is_empty() {
            return Err(DataError::TaskSize {
                segment: name,
                len: e - s,
                needed: lags + horizon,
            });
        }
        sets.push(ds);
    }
    let test = sets.pop().unwrap();
    let val = sets.pop().unwrap();
    let train = sets.pop().unwrap();
    Ok((train, val, test))
}

/// Scaled, windowed and split data ready for training.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub raw: TimeSeries,
    pub scaler: ScalerParams,
    pub train: WindowedDataset,
    pub val: WindowedDataset,
    pub test: WindowedDataset,
}

impl PreparedData {
    pub fn split(&self, which: crate::Split) -> &WindowedDataset {
        match which {
            crate::Split::Train => &self.train,
            crate::Split::Val => &self.val,
            crate::Split::Test => &self.test,
        }
    }

    /// Target channel back in original units.
    pub fn to_original(&self, v: f64) -> f64 {
        self.scaler.invert_value(0, v)
    }

    pub fn to_scaled(&self, v: f64) -> f64 {
        self.scaler.apply_value(0, v)
    }
}

/// Fits the scaler on the training segment only, scales the whole series and
/// windows it.
pub fn prepare(
    series: &TimeSeries,
    lags: usize,
    horizon: usize,
    spec: &SplitSpec,
) -> Result<PreparedData, DataError> {
    series.validate()?;
    let [(ts, te), _, _] = spec.bounds(series.len())?;
    let scaler = ScalerParams::fit(&series.slice(ts, te))?;
    let scaled = scaler.apply(series);
    let (train, val, test) = window_and_split(&scaled, lags, horizon, spec)?;
    Ok(PreparedData {
        raw: series.clone(),
        scaler,
        train,
        val,
        test,
    })
}
