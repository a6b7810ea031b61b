//! Series generation and ingestion, min-max scaling, windowing and
//! chronological splitting.

mod csv_io;
mod mackey_glass;
mod scaler;
mod window;

pub use csv_io::{load_csv, write_series_csv};
pub use mackey_glass::{mackey_glass, DecaySign, MackeyGlassConfig};
pub use scaler::ScalerParams;
pub use window::{prepare, window_and_split, PreparedData, Sample, SplitSpec, WindowedDataset};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("integration diverged at t = {t} (value {value})")]
    Divergence { t: f64, value: f64 },
    #[error("invalid generator setting: {0}")]
    Generator(String),
    #[error("{path}: missing column `{column}`")]
    Schema { path: PathBuf, column: String },
    #[error("{path}: row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}, column `{column}` is empty (missing values are not imputed)")]
    Gap {
        path: PathBuf,
        row: usize,
        column: String,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("channel {channel} is constant on the training slice (min = max = {value})")]
    DegenerateChannel { channel: usize, value: f64 },
    #[error("series too short: {len} observations cannot give {needed} in segment `{segment}`")]
    TaskSize {
        segment: &'static str,
        len: usize,
        needed: usize,
    },
    #[error("invalid series: {0}")]
    Invalid(String),
}

/// An observed series: the target channel `y` plus optional exogenous
/// channels of equal length. Channel 0 is always the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub frequency: String,
    pub values: Vec<f64>,
    pub exogenous: Vec<(String, Vec<f64>)>,
}

impl TimeSeries {
    pub fn univariate(name: impl Into<String>, values: Vec<f64>) -> Self {
        TimeSeries {
            name: name.into(),
            frequency: String::new(),
            values,
            exogenous: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channels(&self) -> usize {
        1 + self.exogenous.len()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        if c == 0 {
            &self.values
        } else {
            &self.exogenous[c - 1].1
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for c in 0..self.channels() {
            let ch = self.channel(c);
            if ch.len() != self.len() {
                return Err(DataError::Invalid(format!(
                    "channel {c} has length {} but target has {}",
                    ch.len(),
                    self.len()
                )));
            }
            if let Some(i) = ch.iter().position(|v| !v.is_finite()) {
                return Err(DataError::Invalid(format!("non-finite value in channel {c} at {i}")));
            }
        }
        Ok(())
    }

    /// Rows `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            frequency: self.frequency.clone(),
            values: self.values[start..end].to_vec(),
            exogenous: self
                .exogenous
                .iter()
                .map(|(n, v)| (n.clone(), v[start..end].to_vec()))
                .collect(),
        }
    }
}
