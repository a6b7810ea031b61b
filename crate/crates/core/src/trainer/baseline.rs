use log::debug;
use serde::{Deserialize, Serialize};

use super::{evaluate, scaled_aux, train_rng, PoolCubes, RegimeSpec, TrainConfig, TrainError};
use crate::data::{PreparedData, WindowedDataset};
use crate::numcore::{Direction, Optimizer, Parameterized, Rng};
use crate::s2s::{bptt, DecodeTrace, EncoderTrace, SeqParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Truth probability used this epoch (scheduled sampling only).
    pub p: Option<f64>,
    pub train_loss: f64,
    pub val_rmse: f64,
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub params: SeqParams,
    pub history: Vec<EpochLog>,
    /// Epoch of the returned snapshot; 0 means the initial weights.
    pub best_epoch: usize,
    pub best_val_rmse: f64,
}

/// One pass over `data` in shuffled mini-batches. `run` produces the
/// forward traces of sample `i`; gradients are averaged over each batch.
pub(crate) fn rnn_epoch<F>(
    seq: &mut SeqParams,
    opt: &mut Optimizer,
    lr: f64,
    batch: usize,
    data: &WindowedDataset,
    rng: &mut Rng,
    mut run: F,
) -> Result<f64, TrainError>
where
    F: FnMut(&SeqParams, usize, &mut Rng) -> Result<(EncoderTrace, DecodeTrace), TrainError>,
{
    let order = rng.permutation(data.len());
    let mut total = 0.0;
    for chunk in order.chunks(batch.max(1)) {
        seq.zero_grad();
        let scale = 1.0 / chunk.len() as f64;
        for &i in chunk {
            let (enc, dec) = run(seq, i, rng)?;
            total += bptt(seq, &enc, &dec, &data.samples[i].target, scale)?;
        }
        opt.step(&mut seq.blocks_mut(), lr, Direction::Descent)?;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Epoch loop for FR, TF, SS and the `Teach_*` regimes with validation
/// early stopping. Returns the best-validation weights.
pub fn train_baseline(
    cfg: &TrainConfig,
    data: &PreparedData,
    cubes: Option<&PoolCubes>,
    init: SeqParams,
) -> Result<BaselineOutcome, TrainError> {
    cfg.validate()?;
    let regime = cfg.regime;
    if regime == RegimeSpec::Pg {
        return Err(TrainError::Config {
            key: "train.regime".into(),
            message: "PG is trained with train_pg".into(),
        });
    }
    if regime.needs_pool() && cubes.is_none() {
        return Err(TrainError::MissingPool(regime));
    }
    if data.train.is_empty() || data.val.is_empty() {
        return Err(TrainError::Aux(crate::auxmodels::AuxError::Empty));
    }
    let aux = cubes.map(|c| scaled_aux(&c.train, &data.scaler)).unwrap_or_default();
    let val_cube = cubes.map(|c| &c.val);
    let val_rmse = |seq: &SeqParams| -> Result<f64, TrainError> {
        Ok(evaluate(seq, regime, None, &data.val, val_cube, &data.scaler)?.report.rmse)
    };

    let mut seq = init;
    let mut best = seq.clone();
    let mut best_rmse = val_rmse(&seq)?;
    let mut best_epoch = 0;
    let mut since = 0;
    let mut history = Vec::new();
    let mut opt = Optimizer::new(cfg.rnn_optimizer);
    let mut rng = train_rng(cfg.seed);
    let h = data.train.horizon;

    for epoch in 1..=cfg.epochs {
        let p = cfg.ss_probability(epoch - 1);
        let decoding = regime.decoding(p);
        let loss = rnn_epoch(&mut seq, &mut opt, cfg.l2, cfg.batch_size, &data.train, &mut rng, |seq, i, rng| {
            let s = &data.train.samples[i];
            let mut feed = crate::s2s::Feed::new(decoding, crate::s2s::Phase::Train).truth(&s.target);
            if regime.needs_pool() {
                feed = feed.aux(&aux[i]);
            }
            Ok(crate::s2s::forward(seq, &s.window, h, feed, rng)?)
        })
        .map_err(|e| e.at_epoch(epoch))?;
        let v = val_rmse(&seq).map_err(|e| e.at_epoch(epoch))?;
        debug!("{regime} epoch {epoch}: loss {loss:.3e} val rmse {v:.4e}");
        history.push(EpochLog {
            epoch,
            p: (regime == RegimeSpec::Ss).then_some(p),
            train_loss: loss,
            val_rmse: v,
        });
        if v < best_rmse {
            best_rmse = v;
            best = seq.clone();
            best_epoch = epoch;
            since = 0;
        } else {
            since += 1;
            if since >= cfg.patience {
                break;
            }
        }
    }
    Ok(BaselineOutcome {
        params: best,
        history,
        best_epoch,
        best_val_rmse: best_rmse,
    })
}
