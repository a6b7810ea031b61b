//! Auxiliary forecaster pool: multi-output SVR, a direct multi-output MLP,
//! and the per-sample prediction cube consumed by the decoder.

mod cube;
mod mlp;
mod msvr;

pub use cube::{ForecastCube, POOL_NAMES};
pub use mlp::{train_direct_mlp, Activation, DirectMlp, MlpConfig, MlpTrace};
pub use msvr::{train_msvr, MsvrConfig, MsvrModel, MsvrPrimal, MsvrTrace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{Matrix, NumError};

#[derive(Debug, Error)]
pub enum AuxError {
    #[error("window has {got} values, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("empty training set")]
    Empty,
    #[error("invalid setting: {0}")]
    Config(String),
    #[error("{model}: {source}")]
    Numeric {
        model: &'static str,
        #[source]
        source: NumError,
    },
    #[error("{model} training diverged at epoch {epoch} (loss {loss})")]
    Divergence {
        model: &'static str,
        epoch: usize,
        loss: f64,
    },
    #[error("forecast cube has a hole at sample {sample}, model `{model}`, step {step}")]
    Hole {
        sample: usize,
        model: String,
        step: usize,
    },
}

impl AuxError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, AuxError::Numeric { .. } | AuxError::Divergence { .. })
    }
}

/// Shared prediction contract of every pool member. Windows and outputs are
/// in the normalized space the model was trained in.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &'static str;
    fn input_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn predict(&self, window: &Matrix) -> Result<Vec<f64>, AuxError>;
}

pub(crate) fn check_window(expected: usize, window: &Matrix) -> Result<(), AuxError> {
    if window.len() != expected {
        return Err(AuxError::Dimension {
            expected,
            got: window.len(),
        });
    }
    Ok(())
}

/// A trained, frozen pool member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AuxModel {
    Msvr(MsvrModel),
    Mlp(DirectMlp),
}

impl Forecaster for AuxModel {
    fn name(&self) -> &'static str {
        match self {
            AuxModel::Msvr(m) => m.name(),
            AuxModel::Mlp(m) => m.name(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            AuxModel::Msvr(m) => m.input_dim(),
            AuxModel::Mlp(m) => m.input_dim(),
        }
    }

    fn horizon(&self) -> usize {
        match self {
            AuxModel::Msvr(m) => m.horizon(),
            AuxModel::Mlp(m) => m.horizon(),
        }
    }

    fn predict(&self, window: &Matrix) -> Result<Vec<f64>, AuxError> {
        match self {
            AuxModel::Msvr(m) => m.predict(window),
            AuxModel::Mlp(m) => m.predict(window),
        }
    }
}
