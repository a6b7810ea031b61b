//! Training orchestration: the alternating policy/RNN rounds, the baseline
//! regimes, evaluation, random search and checkpoint files.

mod baseline;
mod checkpoint;
mod config;
mod eval;
mod pg;
mod run;
mod search;
mod synthetic;

pub use baseline::{train_baseline, BaselineOutcome, EpochLog};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ss_schedule, RegimeSpec, TrainConfig};
pub use eval::{evaluate, selection_percentages, Evaluation};
pub use pg::{train_pg, PgOutcome, RoundLog};
pub use run::{run_regime, RunOutcome};
pub use search::{mlp_space, msvr_space, random_search, search_pool, ParamRange, PoolSearch, SearchOutcome, SearchSpace, Trial};
pub use synthetic::{synthetic_dominance, SyntheticTask};

use thiserror::Error;

use crate::auxmodels::{AuxError, AuxModel, ForecastCube};
use crate::data::{DataError, PreparedData};
use crate::metrics::MetricError;
use crate::numcore::{NumError, Rng};
use crate::rlpolicy::{PolicyError, PolicyParams};
use crate::s2s::{S2sError, SeqParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("regime {0} needs the auxiliary forecast cubes")]
    MissingPool(RegimeSpec),
    #[error("random search exhausted: all {trials} trials failed")]
    SearchExhausted { trials: usize },
    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    S2s(#[from] S2sError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Aux(#[from] AuxError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl TrainError {
    pub fn is_numeric(&self) -> bool {
        match self {
            TrainError::Num(_) | TrainError::Data(DataError::Divergence { .. }) => true,
            TrainError::S2s(e) => e.is_numeric(),
            TrainError::Policy(e) => e.is_numeric(),
            TrainError::Aux(e) => e.is_numeric(),
            TrainError::Round { source, .. } | TrainError::Epoch { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    fn at_round(self, round: usize) -> TrainError {
        TrainError::Round {
            round,
            source: Box::new(self),
        }
    }

    fn at_epoch(self, epoch: usize) -> TrainError {
        TrainError::Epoch {
            epoch,
            source: Box::new(self),
        }
    }
}

const INIT_STREAM: u64 = 0x494e4954;
const POLICY_STREAM: u64 = 0x504f4c59;
const TRAIN_STREAM: u64 = 0x5452414e;

/// Initial network weights for `seed`. Every regime trained with the same
/// seed starts from these.
pub fn init_seq(cfg: &TrainConfig, channels: usize, seed: u64) -> Result<SeqParams, TrainError> {
    let mut rng = Rng::new(seed).split(INIT_STREAM);
    Ok(SeqParams::new(cfg.cell, channels, cfg.hidden_enc, cfg.hidden_dec, &mut rng)?)
}

/// Initial policy for `seed` over `actions` pool slots.
pub fn init_policy(cfg: &TrainConfig, actions: usize, seed: u64) -> PolicyParams {
    let mut rng = Rng::new(seed).split(POLICY_STREAM);
    PolicyParams::new(cfg.hidden_dec, cfg.policy_hidden, actions, &mut rng)
}

fn train_rng(seed: u64) -> Rng {
    Rng::new(seed).split(TRAIN_STREAM)
}

/// Original-scale forecasts of the frozen pool on every split.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolCubes {
    pub train: ForecastCube,
    pub val: ForecastCube,
    pub test: ForecastCube,
}

impl PoolCubes {
    pub fn build(pool: &[AuxModel], data: &PreparedData) -> Result<PoolCubes, TrainError> {
        Ok(PoolCubes {
            train: ForecastCube::build(pool, &data.train, &data.scaler)?,
            val: ForecastCube::build(pool, &data.val, &data.scaler)?,
            test: ForecastCube::build(pool, &data.test, &data.scaler)?,
        })
    }

    pub fn split(&self, which: crate::Split) -> &ForecastCube {
        match which {
            crate::Split::Train => &self.train,
            crate::Split::Val => &self.val,
            crate::Split::Test => &self.test,
        }
    }
}

/// Every pool slot's forecasts mapped back into the normalized space,
/// `out[i][a][k]`.
pub(crate) fn scaled_aux(cube: &ForecastCube, scaler: &crate::data::ScalerParams) -> Vec<Vec<Vec<f64>>> {
    (0..cube.n_samples())
        .map(|i| {
            (0..cube.decoder_slot())
                .map(|a| cube.series(i, a).iter().map(|&v| scaler.apply_value(0, v)).collect())
                .collect()
        })
        .collect()
}
