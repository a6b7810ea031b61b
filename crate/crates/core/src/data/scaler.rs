use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeries};

/// Per-channel min-max parameters fit on the training slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(train: &TimeSeries) -> Result<Self, DataError> {
        let mut min = Vec::with_capacity(train.channels());
        let mut max = Vec::with_capacity(train.channels());
        for c in 0..train.channels() {
            let ch = train.channel(c);
            let lo = ch.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(DataError::DegenerateChannel {
                    channel: c,
                    value: lo,
                });
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(ScalerParams { min, max })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    #[inline]
    pub fn range(&self, channel: usize) -> f64 {
        self.max[channel] - self.min[channel]
    }

    #[inline]
    pub fn apply_value(&self, channel: usize, x: f64) -> f64 {
        (x - self.min[channel]) / self.range(channel)
    }

    #[inline]
    pub fn invert_value(&self, channel: usize, v: f64) -> f64 {
        v * self.range(channel) + self.min[channel]
    }

    /// Scales every channel; values outside the training range are not clipped.
    pub fn apply(&self, series: &TimeSeries) -> TimeSeries {
        let mut out = series.clone();
        out.values.iter_mut().for_each(|v| *v = self.apply_value(0, *v));
        for (c, (_, ch)) in out.exogenous.iter_mut().enumerate() {
            ch.iter_mut().for_each(|v| *v = self.apply_value(c + 1, *v));
        }
        out
    }

    pub fn invert(&self, channel: usize, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert_value(channel, v)).collect()
    }
}
