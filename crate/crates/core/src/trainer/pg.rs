use log::debug;
use serde::{Deserialize, Serialize};

use super::baseline::rnn_epoch;
use super::{evaluate, selection_percentages, train_rng, Evaluation, PoolCubes, RegimeSpec, TrainConfig, TrainError};
use crate::auxmodels::ForecastCube;
use crate::data::{PreparedData, ScalerParams, WindowedDataset};
use crate::metrics::MetricReport;
use crate::numcore::Parameterized;
use crate::rlpolicy::{collect_trajectories, reinforce_update, PgEnv, PolicyAgent, PolicyParams, SelectMode};
use crate::s2s::{decode_sequence, encode, Feed, Phase, Regime, SeqParams};

/// What happened in one policy round plus one RNN round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    /// 1-based.
    pub round: usize,
    pub pool_names: Vec<String>,
    /// Test-mode RMSE of every pool slot on the training split, decoder last.
    pub pool_rmse_train: Vec<f64>,
    pub pool_rmse_val: Vec<f64>,
    /// `selection_train[k][a]`: percent of samples choosing slot `a` after step `k+1`.
    pub selection_train: Vec<Vec<f64>>,
    pub selection_val: Vec<Vec<f64>>,
    /// Mean `R(τ)` over the last policy epoch.
    pub mean_return: f64,
    /// Mean sequence loss over the last RNN epoch.
    pub rnn_loss: f64,
    /// Decoder RMSE on validation; drives early stopping.
    pub val_rmse: f64,
    /// Network weights byte-identical before and after the policy epochs.
    pub seq_frozen: bool,
    /// Policy weights byte-identical before and after the RNN epochs.
    pub policy_frozen: bool,
}

#[derive(Clone, Debug)]
pub struct PgOutcome {
    pub seq: SeqParams,
    pub policy: PolicyParams,
    pub logs: Vec<RoundLog>,
    /// Round of the returned snapshot; 0 means the initial weights.
    pub best_round: usize,
    pub best_val_rmse: f64,
}

fn pool_rmse(eval: &Evaluation, cube: &ForecastCube) -> Result<Vec<f64>, TrainError> {
    let mut out = Vec::with_capacity(cube.n_models());
    for a in 0..cube.decoder_slot() {
        let preds: Vec<Vec<f64>> = (0..cube.n_samples()).map(|i| cube.series(i, a).to_vec()).collect();
        out.push(MetricReport::evaluate(&eval.truth, &preds)?.rmse);
    }
    out.push(eval.report.rmse);
    Ok(out)
}

fn eval_pg(
    seq: &SeqParams,
    policy: &PolicyParams,
    data: &WindowedDataset,
    cube: &ForecastCube,
    scaler: &ScalerParams,
) -> Result<(Evaluation, Vec<f64>, Vec<Vec<f64>>), TrainError> {
    let ev = evaluate(seq, RegimeSpec::Pg, Some(policy), data, Some(cube), scaler)?;
    let rmse = pool_rmse(&ev, cube)?;
    let sel = selection_percentages(&ev.actions, cube.n_models(), data.horizon);
    Ok((ev, rmse, sel))
}

/// Alternating training. Each round first updates the policy for
/// `policy_epochs` with the networks frozen, then the networks for
/// `rnn_epochs` with the policy frozen. Stops after `max_rounds` or
/// `patience` rounds without validation improvement and returns the best
/// round's weights. The policy persists across rounds.
pub fn train_pg(
    cfg: &TrainConfig,
    data: &PreparedData,
    cubes: &PoolCubes,
    init_seq: SeqParams,
    init_policy: PolicyParams,
) -> Result<PgOutcome, TrainError> {
    cfg.validate()?;
    let n_actions = cubes.train.n_models();
    if init_policy.actions() != n_actions || init_policy.state_dim() != init_seq.decoder_hidden() {
        return Err(TrainError::Config {
            key: "policy.hidden".into(),
            message: format!(
                "policy maps {} inputs to {} actions, pool has {n_actions} slots and the decoder state {} units",
                init_policy.state_dim(),
                init_policy.actions(),
                init_seq.decoder_hidden()
            ),
        });
    }
    if data.train.is_empty() || data.val.is_empty() {
        return Err(TrainError::Aux(crate::auxmodels::AuxError::Empty));
    }
    let mut seq = init_seq;
    let mut policy = init_policy;
    let mut logs = Vec::new();
    let initial_val = evaluate(&seq, RegimeSpec::Pg, Some(&policy), &data.val, Some(&cubes.val), &data.scaler)?;
    let mut best = (seq.clone(), policy.clone());
    let mut best_rmse = initial_val.report.rmse;
    let mut best_round = 0;
    let mut since = 0;

    let mut env = PgEnv::new(&data.train.samples, &cubes.train, &data.scaler);
    let mut opt = crate::numcore::Optimizer::new(cfg.rnn_optimizer);
    let mut rng = train_rng(cfg.seed);
    let h = data.train.horizon;

    for round in 1..=cfg.max_rounds {
        let mut step = || -> Result<RoundLog, TrainError> {
            // policy epochs, networks frozen
            let seq_bytes = seq.value_bytes();
            env.cache_encodings(&seq)?;
            let mut mean_return = 0.0;
            for epoch in 0..cfg.policy_epochs {
                let order = rng.permutation(env.len());
                let mut total = 0.0;
                for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                    let stream = rng.split(((round as u64) << 40) | ((epoch as u64) << 24) | b as u64);
                    let trs = collect_trajectories(&policy, &seq, &env, chunk, &cfg.reward, cfg.action_rule, &stream)?;
                    total += trs.iter().map(|t| t.total_return(cfg.reward.gamma)).sum::<f64>();
                    reinforce_update(&mut policy, &trs, cfg.l1, cfg.reward.gamma, cfg.skip_explored)?;
                }
                mean_return = total / env.len() as f64;
            }
            env.clear_encodings();
            let seq_frozen = seq.value_bytes() == seq_bytes;

            // network epochs, policy frozen
            let policy_bytes = policy.value_bytes();
            let mut rnn_loss = 0.0;
            for _ in 0..cfg.rnn_epochs {
                rnn_loss = rnn_epoch(&mut seq, &mut opt, cfg.l2, cfg.batch_size, &data.train, &mut rng, |seq, i, rng| {
                    let s = &data.train.samples[i];
                    let enc = encode(seq, &s.window)?;
                    let mut agent = PolicyAgent::new(&policy, 0.0, SelectMode::Train, cfg.action_rule);
                    let feed = Feed::new(Regime::PolicyGradient, Phase::Train)
                        .aux(&env.aux_scaled[i])
                        .selector(&mut agent);
                    let dec = decode_sequence(seq, &enc, s.last_observed(), h, feed, rng)?;
                    Ok((enc, dec))
                })?;
            }
            let policy_frozen = policy.value_bytes() == policy_bytes;

            let (_, pool_rmse_train, selection_train) =
                eval_pg(&seq, &policy, &data.train, &cubes.train, &data.scaler)?;
            let (val, pool_rmse_val, selection_val) = eval_pg(&seq, &policy, &data.val, &cubes.val, &data.scaler)?;
            Ok(RoundLog {
                round,
                pool_names: cubes.train.names().to_vec(),
                pool_rmse_train,
                pool_rmse_val,
                selection_train,
                selection_val,
                mean_return,
                rnn_loss,
                val_rmse: val.report.rmse,
                seq_frozen,
                policy_frozen,
            })
        };
        let log = step().map_err(|e| e.at_round(round))?;
        debug!(
            "PG round {round}: return {:.4} loss {:.3e} val rmse {:.4e}",
            log.mean_return, log.rnn_loss, log.val_rmse
        );
        let improved = log.val_rmse < best_rmse;
        if improved {
            best_rmse = log.val_rmse;
            best = (seq.clone(), policy.clone());
            best_round = round;
            since = 0;
        } else {
            since += 1;
        }
        logs.push(log);
        if !improved && since >= cfg.patience {
            break;
        }
    }
    Ok(PgOutcome {
        seq: best.0,
        policy: best.1,
        logs,
        best_round,
        best_val_rmse: best_rmse,
    })
}
