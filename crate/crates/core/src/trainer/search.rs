use std::collections::BTreeMap;

use log::info;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::auxmodels::{train_direct_mlp, train_msvr, Activation, DirectMlp, Forecaster, MlpConfig, MsvrConfig, MsvrModel};
use crate::data::{PreparedData, WindowedDataset};
use crate::metrics::MetricReport;
use crate::numcore::Rng;

/// Sampling distribution of one searched key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamRange {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    /// Inclusive integer range.
    Int { lo: i64, hi: i64 },
    Choice(Vec<String>),
}

impl ParamRange {
    fn sample(&self, rng: &mut Rng) -> String {
        match self {
            ParamRange::Uniform { lo, hi } => rng.uniform_range(*lo, *hi).to_string(),
            ParamRange::LogUniform { lo, hi } => rng.uniform_range(lo.ln(), hi.ln()).exp().to_string(),
            ParamRange::Int { lo, hi } => (lo + rng.below((hi - lo + 1) as usize) as i64).to_string(),
            ParamRange::Choice(opts) => opts[rng.below(opts.len())].clone(),
        }
    }

    fn check(&self, key: &str) -> Result<(), TrainError> {
        let ok = match self {
            ParamRange::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            ParamRange::LogUniform { lo, hi } => *lo > 0.0 && hi.is_finite() && lo <= hi,
            ParamRange::Int { lo, hi } => lo <= hi,
            ParamRange::Choice(opts) => !opts.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(TrainError::Config {
                key: key.to_string(),
                message: format!("empty or invalid search range {self:?}"),
            })
        }
    }
}

impl std::str::FromStr for ParamRange {
    type Err = String;

    /// `uniform:LO:HI`, `log:LO:HI`, `int:LO:HI` or `choice:A|B|C`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| format!("bad range `{s}`"))?;
        let pair = |rest: &str| -> Result<(f64, f64), String> {
            let (a, b) = rest.split_once(':').ok_or_else(|| format!("bad range `{s}`"))?;
            Ok((
                a.trim().parse().map_err(|e| format!("{a}: {e}"))?,
                b.trim().parse().map_err(|e| format!("{b}: {e}"))?,
            ))
        };
        match kind.trim() {
            "uniform" => pair(rest).map(|(lo, hi)| ParamRange::Uniform { lo, hi }),
            "log" | "loguniform" => pair(rest).map(|(lo, hi)| ParamRange::LogUniform { lo, hi }),
            "int" => pair(rest).map(|(lo, hi)| ParamRange::Int {
                lo: lo as i64,
                hi: hi as i64,
            }),
            "choice" => Ok(ParamRange::Choice(rest.split('|').map(|v| v.trim().to_string()).collect())),
            other => Err(format!("unknown range kind `{other}`")),
        }
    }
}

/// Keys and their ranges, sampled in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<(String, ParamRange)>,
}

impl SearchSpace {
    pub fn new() -> Self {
        SearchSpace::default()
    }

    pub fn with(mut self, key: &str, range: ParamRange) -> Self {
        self.params.push((key.to_string(), range));
        self
    }

    pub fn sample(&self, rng: &mut Rng) -> BTreeMap<String, String> {
        self.params.iter().map(|(k, r)| (k.clone(), r.sample(rng))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: BTreeMap<String, String>,
    /// Validation RMSE; `None` when the trial failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub trials: Vec<Trial>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn best_score(&self) -> f64 {
        self.trials[self.best].score.expect("best trial succeeded")
    }

    /// Median over the successful trials (mean of the middle pair when even).
    pub fn median_score(&self) -> f64 {
        let mut s: Vec<f64> = self.trials.iter().filter_map(|t| t.score).collect();
        s.sort_by(|a, b| a.total_cmp(b));
        let n = s.len();
        if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    }
}

/// Samples `budget` settings from `space`, scores each with `objective`
/// (lower is better) and keeps the full trial table. Failed or non-finite
/// trials are recorded and skipped.
pub fn random_search<F, E>(space: &SearchSpace, budget: usize, seed: u64, mut objective: F) -> Result<SearchOutcome, TrainError>
where
    F: FnMut(&BTreeMap<String, String>) -> Result<f64, E>,
    E: std::fmt::Display,
{
    if budget == 0 {
        return Err(TrainError::Config {
            key: "search.budget".into(),
            message: "must be at least 1".into(),
        });
    }
    for (k, r) in &space.params {
        r.check(k)?;
    }
    let mut rng = Rng::new(seed).split(0x53524348);
    let mut trials = Vec::with_capacity(budget);
    for index in 0..budget {
        let params = space.sample(&mut rng);
        let (score, error) = match objective(&params) {
            Ok(v) if v.is_finite() => (Some(v), None),
            Ok(v) => (None, Some(format!("non-finite score {v}"))),
            Err(e) => (None, Some(e.to_string())),
        };
        info!("trial {index}: {params:?} -> {score:?}");
        trials.push(Trial {
            index,
            params,
            score,
            error,
        });
    }
    let best = trials
        .iter()
        .filter_map(|t| t.score.map(|s| (t.index, s)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(TrainError::SearchExhausted { trials: budget })?;
    Ok(SearchOutcome { trials, best })
}

/// The searched and refitted auxiliary pool.
#[derive(Clone, Debug)]
pub struct PoolSearch {
    pub msvr: MsvrModel,
    pub mlp: DirectMlp,
    pub msvr_trials: SearchOutcome,
    pub mlp_trials: SearchOutcome,
}

fn val_rmse<F: Forecaster>(model: &F, data: &PreparedData) -> Result<f64, TrainError> {
    let val: &WindowedDataset = &data.val;
    let mut truth = Vec::with_capacity(val.len());
    let mut preds = Vec::with_capacity(val.len());
    for s in &val.samples {
        truth.push(data.scaler.invert(0, &s.target));
        preds.push(data.scaler.invert(0, &model.predict(&s.window)?));
    }
    Ok(MetricReport::evaluate(&truth, &preds)?.rmse)
}

pub fn msvr_space() -> SearchSpace {
    SearchSpace::new()
        .with("msvr.C", ParamRange::LogUniform { lo: 0.5, hi: 100.0 })
        .with("msvr.epsilon", ParamRange::LogUniform { lo: 1e-3, hi: 3e-2 })
        .with("msvr.gamma", ParamRange::LogUniform { lo: 5e-3, hi: 0.5 })
}

pub fn mlp_space() -> SearchSpace {
    SearchSpace::new()
        .with("mlp.hidden", ParamRange::Choice(vec!["16".into(), "32".into(), "64".into()]))
        .with("mlp.lr", ParamRange::LogUniform { lo: 1e-3, hi: 1e-2 })
        .with("mlp.activation", ParamRange::Choice(vec!["tanh".into(), "sigmoid".into()]))
}

fn get<T: std::str::FromStr>(p: &BTreeMap<String, String>, key: &str) -> Result<T, TrainError>
where
    T::Err: std::fmt::Display,
{
    let raw = p.get(key).ok_or_else(|| TrainError::Config {
        key: key.to_string(),
        message: "missing".into(),
    })?;
    raw.parse().map_err(|e: T::Err| TrainError::Config {
        key: key.to_string(),
        message: e.to_string(),
    })
}

fn msvr_config(p: &BTreeMap<String, String>) -> Result<MsvrConfig, TrainError> {
    Ok(MsvrConfig {
        c: get(p, "msvr.C")?,
        epsilon: get(p, "msvr.epsilon")?,
        gamma: get(p, "msvr.gamma")?,
        ..MsvrConfig::default()
    })
}

fn mlp_config(p: &BTreeMap<String, String>, epochs: usize, seed: u64) -> Result<MlpConfig, TrainError> {
    Ok(MlpConfig {
        hidden: get(p, "mlp.hidden")?,
        lr: get(p, "mlp.lr")?,
        activation: get::<Activation>(p, "mlp.activation")?,
        epochs,
        seed,
        ..MlpConfig::default()
    })
}

/// Random search over MSVR and MLP settings, each scored by validation
/// RMSE in the original scale; returns the best model of each family.
pub fn search_pool(data: &PreparedData, budget: usize, seed: u64, mlp_epochs: usize) -> Result<PoolSearch, TrainError> {
    let mut best_msvr: Option<(f64, MsvrModel)> = None;
    let msvr_trials = random_search(&msvr_space(), budget, seed, |p| -> Result<f64, TrainError> {
        let (m, _) = train_msvr(&data.train, &msvr_config(p)?)?;
        let v = val_rmse(&m, data)?;
        if best_msvr.as_ref().is_none_or(|(b, _)| v < *b) {
            best_msvr = Some((v, m));
        }
        Ok(v)
    })?;
    let mut best_mlp: Option<(f64, DirectMlp)> = None;
    let mlp_trials = random_search(&mlp_space(), budget, seed.wrapping_add(1), |p| -> Result<f64, TrainError> {
        let (m, _) = train_direct_mlp(&data.train, &data.val, &mlp_config(p, mlp_epochs, seed)?)?;
        let v = val_rmse(&m, data)?;
        if best_mlp.as_ref().is_none_or(|(b, _)| v < *b) {
            best_mlp = Some((v, m));
        }
        Ok(v)
    })?;
    Ok(PoolSearch {
        msvr: best_msvr.expect("search succeeded").1,
        mlp: best_mlp.expect("search succeeded").1,
        msvr_trials,
        mlp_trials,
    })
}
