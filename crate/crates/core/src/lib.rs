//! Sequence-to-sequence recurrent forecasting where each decoder input is
//! chosen by a learned policy from a pool of auxiliary forecasters and the
//! decoder itself, together with the free-running, teacher-forcing and
//! scheduled-sampling baselines and the surrounding experiment machinery.

pub mod auxmodels;
pub mod data;
pub mod metrics;
pub mod numcore;
pub mod rlpolicy;
pub mod s2s;
pub mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dataset split selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Num(#[from] numcore::NumError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error(transparent)]
    Aux(#[from] auxmodels::AuxError),
    #[error(transparent)]
    S2s(#[from] s2s::S2sError),
    #[error(transparent)]
    Policy(#[from] rlpolicy::PolicyError),
    #[error(transparent)]
    Train(#[from] trainer::TrainError),
}

impl Error {
    /// True for failures of the numerics (divergence, non-finite values) as
    /// opposed to bad input or configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Num(_) => true,
            Error::Data(data::DataError::Divergence { .. }) => true,
            Error::Aux(e) => e.is_numeric(),
            Error::S2s(e) => e.is_numeric(),
            Error::Policy(e) => e.is_numeric(),
            Error::Train(e) => e.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
