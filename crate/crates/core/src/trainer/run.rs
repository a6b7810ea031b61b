use super::{evaluate, init_policy, init_seq, train_baseline, train_pg, EpochLog, PoolCubes, RegimeSpec, RoundLog, TrainConfig, TrainError};
use crate::data::PreparedData;
use crate::metrics::MetricReport;
use crate::rlpolicy::PolicyParams;
use crate::s2s::SeqParams;

/// One trained (regime, seed) cell of an experiment.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub regime: RegimeSpec,
    pub seed: u64,
    pub seq: SeqParams,
    pub policy: Option<PolicyParams>,
    pub val_rmse: f64,
    pub test: MetricReport,
    pub rounds: Vec<RoundLog>,
    pub epochs: Vec<EpochLog>,
}

/// Trains `regime` from the shared initialization of `seed` and scores the
/// best-validation weights on the test split.
pub fn run_regime(
    base: &TrainConfig,
    regime: RegimeSpec,
    seed: u64,
    data: &PreparedData,
    cubes: Option<&PoolCubes>,
) -> Result<RunOutcome, TrainError> {
    let cfg = TrainConfig {
        regime,
        seed,
        ..base.clone()
    };
    let init = init_seq(&cfg, data.train.channels, seed)?;
    let (seq, policy, val_rmse, rounds, epochs) = if regime == RegimeSpec::Pg {
        let cubes = cubes.ok_or(TrainError::MissingPool(regime))?;
        let pol = init_policy(&cfg, cubes.train.n_models(), seed);
        let out = train_pg(&cfg, data, cubes, init, pol)?;
        (out.seq, Some(out.policy), out.best_val_rmse, out.logs, Vec::new())
    } else {
        let out = train_baseline(&cfg, data, cubes, init)?;
        (out.params, None, out.best_val_rmse, Vec::new(), out.history)
    };
    let test = evaluate(&seq, regime, policy.as_ref(), &data.test, cubes.map(|c| &c.test), &data.scaler)?.report;
    Ok(RunOutcome {
        regime,
        seed,
        seq,
        policy,
        val_rmse,
        test,
        rounds,
        epochs,
    })
}
