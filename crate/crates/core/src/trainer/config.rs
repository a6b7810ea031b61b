use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::numcore::OptimizerKind;
use crate::rlpolicy::{ActionRule, RewardConfig};
use crate::s2s::{CellKind, Regime};

/// Training regime of a whole run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeSpec {
    Fr,
    Tf,
    Ss,
    Pg,
    TeachMsvr,
    TeachMlp,
}

impl RegimeSpec {
    pub const ALL: [RegimeSpec; 6] = [
        RegimeSpec::Fr,
        RegimeSpec::Tf,
        RegimeSpec::Ss,
        RegimeSpec::Pg,
        RegimeSpec::TeachMsvr,
        RegimeSpec::TeachMlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegimeSpec::Fr => "FR",
            RegimeSpec::Tf => "TF",
            RegimeSpec::Ss => "SS",
            RegimeSpec::Pg => "PG",
            RegimeSpec::TeachMsvr => "Teach_MSVR",
            RegimeSpec::TeachMlp => "Teach_MLP",
        }
    }

    /// Whether the regime reads the auxiliary forecast cube.
    pub fn needs_pool(self) -> bool {
        matches!(self, RegimeSpec::Pg | RegimeSpec::TeachMsvr | RegimeSpec::TeachMlp)
    }

    /// Decoding regime for a training epoch with truth probability `p`.
    pub fn decoding(self, p: f64) -> Regime {
        match self {
            RegimeSpec::Fr => Regime::FreeRunning,
            RegimeSpec::Tf => Regime::TeacherForcing,
            RegimeSpec::Ss => Regime::ScheduledSampling { p },
            RegimeSpec::Pg => Regime::PolicyGradient,
            RegimeSpec::TeachMsvr => Regime::Teach { model: 0 },
            RegimeSpec::TeachMlp => Regime::Teach { model: 1 },
        }
    }
}

impl std::str::FromStr for RegimeSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        match norm.as_str() {
            "fr" | "free_running" => Ok(RegimeSpec::Fr),
            "tf" | "teacher_forcing" => Ok(RegimeSpec::Tf),
            "ss" | "scheduled_sampling" => Ok(RegimeSpec::Ss),
            "pg" | "policy_gradient" => Ok(RegimeSpec::Pg),
            "teach_msvr" => Ok(RegimeSpec::TeachMsvr),
            "teach_mlp" => Ok(RegimeSpec::TeachMlp),
            _ => Err(format!(
                "unknown regime `{s}` (expected FR, TF, SS, PG, Teach_MSVR or Teach_MLP)"
            )),
        }
    }
}

impl std::fmt::Display for RegimeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lags: usize,
    pub horizon: usize,
    pub hidden_enc: usize,
    pub hidden_dec: usize,
    pub policy_hidden: usize,
    pub cell: CellKind,
    pub regime: RegimeSpec,
    /// Policy learning rate.
    pub l1: f64,
    /// Recurrent network learning rate.
    pub l2: f64,
    pub reward: RewardConfig,
    pub batch_size: usize,
    /// Epochs for the baseline regimes.
    pub epochs: usize,
    pub patience: usize,
    pub policy_epochs: usize,
    pub rnn_epochs: usize,
    pub max_rounds: usize,
    pub rnn_optimizer: OptimizerKind,
    pub action_rule: ActionRule,
    pub skip_explored: bool,
    pub ss_p0: f64,
    pub ss_p_min: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lags: 50,
            horizon: 12,
            hidden_enc: 32,
            hidden_dec: 32,
            policy_hidden: 16,
            cell: CellKind::Lstm,
            regime: RegimeSpec::Pg,
            l1: 0.1,
            l2: 0.005,
            reward: RewardConfig::default(),
            batch_size: 32,
            epochs: 25,
            patience: 5,
            policy_epochs: 10,
            rnn_epochs: 5,
            max_rounds: 5,
            rnn_optimizer: OptimizerKind::Adam,
            action_rule: ActionRule::Greedy,
            skip_explored: false,
            ss_p0: 1.0,
            ss_p_min: 0.05,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| TrainError::Config {
        key: key.to_string(),
        message: format!("cannot parse `{value}`: {e}"),
    })
}

impl TrainConfig {
    /// Every recognised flat key with its current value.
    pub fn to_flat(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("task.L", self.lags.to_string());
        put("task.H", self.horizon.to_string());
        put("model.cell", self.cell.to_string());
        put("model.hidden_enc", self.hidden_enc.to_string());
        put("model.hidden_dec", self.hidden_dec.to_string());
        put("policy.hidden", self.policy_hidden.to_string());
        put("train.regime", self.regime.to_string());
        put("train.l2", self.l2.to_string());
        put("train.batch", self.batch_size.to_string());
        put("train.epochs", self.epochs.to_string());
        put("train.patience", self.patience.to_string());
        put("train.optimizer", self.rnn_optimizer.to_string());
        put("train.seed", self.seed.to_string());
        put("pg.l1", self.l1.to_string());
        put("pg.epsilon", self.reward.epsilon.to_string());
        put("pg.policy_epochs", self.policy_epochs.to_string());
        put("pg.rnn_epochs", self.rnn_epochs.to_string());
        put("pg.max_rounds", self.max_rounds.to_string());
        put("pg.action_rule", self.action_rule.to_string());
        put("pg.skip_explored", self.skip_explored.to_string());
        put("reward.alpha", self.reward.alpha.to_string());
        put("reward.beta", self.reward.beta.to_string());
        put("reward.gamma", self.reward.gamma.to_string());
        put("ss.p0", self.ss_p0.to_string());
        put("ss.p_min", self.ss_p_min.to_string());
        m
    }

    /// Applies one dotted key. Unknown keys are an error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        match key {
            "task.L" => self.lags = parse(key, value)?,
            "task.H" => self.horizon = parse(key, value)?,
            "model.cell" => self.cell = parse(key, value)?,
            "model.hidden" => {
                self.hidden_enc = parse(key, value)?;
                self.hidden_dec = self.hidden_enc;
            }
            "model.hidden_enc" => self.hidden_enc = parse(key, value)?,
            "model.hidden_dec" => self.hidden_dec = parse(key, value)?,
            "policy.hidden" => self.policy_hidden = parse(key, value)?,
            "train.regime" => self.regime = parse(key, value)?,
            "train.l2" => self.l2 = parse(key, value)?,
            "train.batch" => self.batch_size = parse(key, value)?,
            "train.epochs" => self.epochs = parse(key, value)?,
            "train.patience" => self.patience = parse(key, value)?,
            "train.optimizer" => self.rnn_optimizer = parse(key, value)?,
            "train.seed" => self.seed = parse(key, value)?,
            "pg.l1" => self.l1 = parse(key, value)?,
            "pg.epsilon" => self.reward.epsilon = parse(key, value)?,
            "pg.policy_epochs" => self.policy_epochs = parse(key, value)?,
            "pg.rnn_epochs" => self.rnn_epochs = parse(key, value)?,
            "pg.max_rounds" => self.max_rounds = parse(key, value)?,
            "pg.action_rule" => self.action_rule = parse(key, value)?,
            "pg.skip_explored" => self.skip_explored = parse(key, value)?,
            "reward.alpha" => self.reward.alpha = parse(key, value)?,
            "reward.beta" => self.reward.beta = parse(key, value)?,
            "reward.gamma" => self.reward.gamma = parse(key, value)?,
            "ss.p0" => self.ss_p0 = parse(key, value)?,
            "ss.p_min" => self.ss_p_min = parse(key, value)?,
            _ => {
                return Err(TrainError::Config {
                    key: key.to_string(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    pub fn from_flat<'a>(entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, TrainError> {
        let mut cfg = TrainConfig::default();
        cfg.apply(entries)?;
        Ok(cfg)
    }

    pub fn apply<'a>(&mut self, entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(), TrainError> {
        for (k, v) in entries {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |key: &str, message: &str| {
            Err(TrainError::Config {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        let positive = [
            ("task.L", self.lags),
            ("task.H", self.horizon),
            ("model.hidden_enc", self.hidden_enc),
            ("model.hidden_dec", self.hidden_dec),
            ("policy.hidden", self.policy_hidden),
            ("train.batch", self.batch_size),
        ];
        for (k, v) in positive {
            if v == 0 {
                return bad(k, "must be positive");
            }
        }
        if self.hidden_enc != self.hidden_dec {
            return bad("model.hidden_dec", "must equal model.hidden_enc (the decoder starts from the encoder state)");
        }
        if !(self.l1 > 0.0) {
            return bad("pg.l1", "must be positive");
        }
        if !(self.l2 > 0.0) {
            return bad("train.l2", "must be positive");
        }
        for (k, v) in [("ss.p0", self.ss_p0), ("ss.p_min", self.ss_p_min)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(k, "must lie in [0, 1]");
            }
        }
        self.reward.validate().map_err(|e| TrainError::Config {
            key: "reward".into(),
            message: e.to_string(),
        })
    }

    /// Linear truth-probability schedule from `ss.p0` at epoch 0 to
    /// `ss.p_min` at the last epoch.
    pub fn ss_probability(&self, epoch: usize) -> f64 {
        ss_schedule(self.ss_p0, self.ss_p_min, self.epochs, epoch)
    }
}

pub fn ss_schedule(p0: f64, p_min: f64, epochs: usize, epoch: usize) -> f64 {
    if epochs <= 1 {
        return p0;
    }
    let frac = (epoch.min(epochs - 1)) as f64 / (epochs - 1) as f64;
    (p0 + (p_min - p0) * frac).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.set("reward.alpha", "0.25").unwrap();
        cfg.set("train.regime", "Teach_MSVR").unwrap();
        cfg.set("model.cell", "gru").unwrap();
        let flat = cfg.to_flat();
        let back = TrainConfig::from_flat(flat.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let mut cfg = TrainConfig::default();
        match cfg.set("reward.alpah", "1") {
            Err(TrainError::Config { key, .. }) => assert_eq!(key, "reward.alpah"),
            other => panic!("{other:?}"),
        }
        match cfg.set("task.H", "twelve") {
            Err(TrainError::Config { key, .. }) => assert_eq!(key, "task.H"),
            other => panic!("{other:?}"),
        }
        assert!(TrainConfig::from_flat([("reward.gamma", "1.0")]).is_err());
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.ss_probability(0), 1.0);
        assert!((cfg.ss_probability(9) - 0.05).abs() < 1e-15);
        assert!(cfg.ss_probability(4) > cfg.ss_probability(5));
        assert_eq!(ss_schedule(0.8, 0.1, 1, 0), 0.8);
    }

    #[test]
    fn regime_names_parse() {
        for r in RegimeSpec::ALL {
            assert_eq!(r.name().parse::<RegimeSpec>().unwrap(), r);
        }
    }
}
