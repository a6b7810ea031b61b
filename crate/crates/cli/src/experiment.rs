//! Turning a spec into prepared data and a frozen auxiliary pool.

use std::collections::BTreeMap;

use log::info;
use pgs2s::auxmodels::{train_direct_mlp, train_msvr, Activation, AuxModel, MlpConfig, MsvrConfig};
use pgs2s::data::{load_csv, mackey_glass, prepare, MackeyGlassConfig, PreparedData, TimeSeries};
use pgs2s::trainer::{search_pool, synthetic_dominance, PoolCubes, PoolSearch};

use crate::spec::{DatasetRef, ExperimentSpec};
use crate::CliError;

/// Data plus the pool every regime of an experiment shares.
#[derive(Debug)]
pub struct Experiment {
    pub data: PreparedData,
    /// Empty for the synthetic task, whose cubes are constructed directly.
    pub pool: Vec<AuxModel>,
    pub cubes: Option<PoolCubes>,
    pub search: Option<PoolSearch>,
}

pub fn load_series(dataset: &DatasetRef) -> Result<TimeSeries, CliError> {
    match dataset {
        DatasetRef::MackeyGlass {
            n,
            delay,
            dt,
            sample_every,
            sign,
        } => Ok(mackey_glass(&MackeyGlassConfig {
            n: *n,
            delay: *delay,
            dt: *dt,
            sample_every: *sample_every,
            sign: *sign,
            ..MackeyGlassConfig::default()
        })?),
        DatasetRef::Csv { path, target, exogenous } => {
            let ex: Vec<&str> = exogenous.iter().map(String::as_str).collect();
            Ok(load_csv(path, target, &ex)?)
        }
        DatasetRef::Synthetic { .. } => Err(CliError::Config {
            key: "dataset.kind".into(),
            message: "the synthetic task has no standalone series".into(),
        }),
    }
}

fn fixed_value<T: std::str::FromStr>(fixed: &BTreeMap<String, String>, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = fixed.get(key).map(String::as_str).unwrap_or_default();
    raw.parse().map_err(|e: T::Err| CliError::Config {
        key: format!("pool.{key}"),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn fit_fixed_pool(spec: &ExperimentSpec, data: &PreparedData) -> Result<Vec<AuxModel>, CliError> {
    let f = &spec.pool.fixed;
    let msvr = MsvrConfig {
        c: fixed_value(f, "msvr.C")?,
        epsilon: fixed_value(f, "msvr.epsilon")?,
        gamma: fixed_value(f, "msvr.gamma")?,
        ..MsvrConfig::default()
    };
    let mlp = MlpConfig {
        hidden: fixed_value(f, "mlp.hidden")?,
        lr: fixed_value(f, "mlp.lr")?,
        activation: fixed_value::<Activation>(f, "mlp.activation")?,
        epochs: spec.pool.mlp_epochs,
        seed: spec.pool.seed,
        ..MlpConfig::default()
    };
    let (m, _) = train_msvr(&data.train, &msvr).map_err(pgs2s::trainer::TrainError::from)?;
    let (p, _) = train_direct_mlp(&data.train, &data.val, &mlp).map_err(pgs2s::trainer::TrainError::from)?;
    Ok(vec![AuxModel::Msvr(m), AuxModel::Mlp(p)])
}

/// Prepares the data and, when `with_pool` is set, fits or searches the
/// pool and forecasts every split with it.
pub fn build_experiment(spec: &ExperimentSpec, with_pool: bool) -> Result<Experiment, CliError> {
    let (lags, horizon) = (spec.train.lags, spec.train.horizon);
    if let DatasetRef::Synthetic { n, dominant, seed } = spec.dataset {
        let task = synthetic_dominance(n, lags, horizon, dominant, seed)?;
        return Ok(Experiment {
            data: task.data,
            pool: Vec::new(),
            cubes: Some(task.cubes),
            search: None,
        });
    }
    let series = load_series(&spec.dataset)?;
    let data = prepare(&series, lags, horizon, &spec.split)?;
    if !with_pool {
        return Ok(Experiment {
            data,
            pool: Vec::new(),
            cubes: None,
            search: None,
        });
    }
    let (pool, search) = if spec.pool.search_budget > 0 {
        info!("searching the pool: {} trials per family", spec.pool.search_budget);
        let s = search_pool(&data, spec.pool.search_budget, spec.pool.seed, spec.pool.mlp_epochs)?;
        (vec![AuxModel::Msvr(s.msvr.clone()), AuxModel::Mlp(s.mlp.clone())], Some(s))
    } else {
        (fit_fixed_pool(spec, &data)?, None)
    };
    let cubes = PoolCubes::build(&pool, &data)?;
    Ok(Experiment {
        data,
        pool,
        cubes: Some(cubes),
        search,
    })
}

/// Rebuilds an experiment around a pool that was already trained.
pub fn rebuild_with_pool(spec: &ExperimentSpec, pool: Vec<AuxModel>) -> Result<Experiment, CliError> {
    let mut exp = build_experiment(spec, false)?;
    if !pool.is_empty() {
        exp.cubes = Some(PoolCubes::build(&pool, &exp.data)?);
        exp.pool = pool;
    }
    Ok(exp)
}
