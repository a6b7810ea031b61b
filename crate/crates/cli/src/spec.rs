//! Experiment description: a flat document of dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pgs2s::data::{DecaySign, SplitSpec};
use pgs2s::trainer::{RegimeSpec, TrainConfig};

use crate::CliError;

/// Where the series comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetRef {
    MackeyGlass {
        n: usize,
        delay: f64,
        dt: f64,
        sample_every: f64,
        sign: DecaySign,
    },
    Csv {
        path: PathBuf,
        target: String,
        exogenous: Vec<String>,
    },
    /// Periodic series with a constructed pool where one member dominates.
    Synthetic { n: usize, dominant: usize, seed: u64 },
}

/// How the auxiliary pool is obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolSpec {
    /// Random-search trials per model family; 0 fits the fixed settings below.
    pub search_budget: usize,
    pub seed: u64,
    pub mlp_epochs: usize,
    pub fixed: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DatasetRef,
    pub split: SplitSpec,
    pub train: TrainConfig,
    pub regimes: Vec<RegimeSpec>,
    pub seeds: Vec<u64>,
    pub pool: PoolSpec,
    pub output: PathBuf,
}

const SPEC_KEYS: &[&str] = &[
    "experiment.name",
    "experiment.regimes",
    "experiment.seeds",
    "experiment.output",
    "dataset.kind",
    "dataset.n",
    "dataset.delay",
    "dataset.dt",
    "dataset.sample_every",
    "dataset.sign",
    "dataset.path",
    "dataset.target",
    "dataset.exogenous",
    "dataset.dominant",
    "dataset.seed",
    "split.train",
    "split.val",
    "split.test",
    "pool.search_budget",
    "pool.seed",
    "pool.mlp_epochs",
    "pool.msvr.C",
    "pool.msvr.epsilon",
    "pool.msvr.gamma",
    "pool.mlp.hidden",
    "pool.mlp.lr",
    "pool.mlp.activation",
];

fn defaults() -> BTreeMap<String, String> {
    let mut m: BTreeMap<String, String> = [
        ("experiment.name", "experiment"),
        ("experiment.regimes", "FR,TF,SS,PG"),
        ("experiment.seeds", "0"),
        ("experiment.output", "runs"),
        ("dataset.kind", "mg"),
        ("dataset.n", "3000"),
        ("dataset.delay", "17"),
        ("dataset.dt", "0.1"),
        ("dataset.sample_every", "1"),
        ("dataset.sign", "canonical"),
        ("dataset.target", "y"),
        ("dataset.exogenous", ""),
        ("dataset.dominant", "0"),
        ("dataset.seed", "0"),
        ("split.train", "0.64"),
        ("split.val", "0.16"),
        ("split.test", "0.2"),
        ("pool.search_budget", "8"),
        ("pool.seed", "0"),
        ("pool.mlp_epochs", "200"),
        ("pool.msvr.C", "10"),
        ("pool.msvr.epsilon", "0.01"),
        ("pool.msvr.gamma", "0.05"),
        ("pool.mlp.hidden", "32"),
        ("pool.mlp.lr", "0.005"),
        ("pool.mlp.activation", "tanh"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    m.extend(TrainConfig::default().to_flat());
    m
}

/// Flattens nested tables into dotted keys; arrays become comma lists.
fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    let scalar = |v: &toml::Value| -> Result<String, CliError> {
        Ok(match v {
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Boolean(b) => b.to_string(),
            other => {
                return Err(CliError::Config {
                    key: prefix.to_string(),
                    message: format!("unsupported value {other}"),
                })
            }
        })
    };
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
        }
        toml::Value::Array(items) => {
            let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
            out.insert(prefix.to_string(), parts.join(","));
        }
        v => {
            out.insert(prefix.to_string(), scalar(v)?);
        }
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = &map[key];
    raw.trim().parse().map_err(|e: T::Err| CliError::Config {
        key: key.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentSpec {
    /// Reads a TOML file, applies `overrides` (`key=value`) on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, overrides, path.parent())
    }

    pub fn from_toml(text: &str, overrides: &[String], base_dir: Option<&Path>) -> Result<Self, CliError> {
        let doc: toml::Value = toml::from_str(text).map_err(|e| CliError::Config {
            key: "<document>".into(),
            message: e.to_string(),
        })?;
        let mut flat = BTreeMap::new();
        flatten("", &doc, &mut flat)?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| CliError::Config {
                key: o.clone(),
                message: "override must look like key=value".into(),
            })?;
            flat.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut spec = Self::from_flat(&flat)?;
        if let (DatasetRef::Csv { path, .. }, Some(dir)) = (&mut spec.dataset, base_dir) {
            if path.is_relative() {
                let joined = dir.join(&*path);
                *path = std::fs::canonicalize(&joined).unwrap_or(joined);
            }
        }
        Ok(spec)
    }

    /// Builds a spec from dotted keys; missing keys take their defaults and
    /// unknown keys are rejected by name.
    pub fn from_flat(entries: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut map = defaults();
        let train_keys = TrainConfig::default().to_flat();
        for (k, v) in entries {
            if !SPEC_KEYS.contains(&k.as_str()) && !train_keys.contains_key(k) && k != "model.hidden" {
                return Err(CliError::Config {
                    key: k.clone(),
                    message: "unknown key".into(),
                });
            }
            map.insert(k.clone(), v.clone());
        }

        let mut train = TrainConfig::default();
        for (k, v) in &map {
            if train_keys.contains_key(k) {
                train.set(k, v)?;
            }
        }
        if let Some(h) = entries.get("model.hidden") {
            train.set("model.hidden", h)?;
        }
        train.validate()?;

        let dataset = match map["dataset.kind"].to_ascii_lowercase().as_str() {
            "mg" | "mackey-glass" | "mackey_glass" => DatasetRef::MackeyGlass {
                n: parse(&map, "dataset.n")?,
                delay: parse(&map, "dataset.delay")?,
                dt: parse(&map, "dataset.dt")?,
                sample_every: parse(&map, "dataset.sample_every")?,
                sign: parse(&map, "dataset.sign")?,
            },
            "csv" => DatasetRef::Csv {
                path: map
                    .get("dataset.path")
                    .map(PathBuf::from)
                    .ok_or_else(|| CliError::Config {
                        key: "dataset.path".into(),
                        message: "required for csv datasets".into(),
                    })?,
                target: map["dataset.target"].clone(),
                exogenous: list(&map["dataset.exogenous"]).map(String::from).collect(),
            },
            "synthetic" => DatasetRef::Synthetic {
                n: parse(&map, "dataset.n")?,
                dominant: parse(&map, "dataset.dominant")?,
                seed: parse(&map, "dataset.seed")?,
            },
            other => {
                return Err(CliError::Config {
                    key: "dataset.kind".into(),
                    message: format!("unknown kind `{other}` (expected mg, csv or synthetic)"),
                })
            }
        };

        let regimes = list(&map["experiment.regimes"])
            .map(|r| {
                r.parse::<RegimeSpec>().map_err(|message| CliError::Config {
                    key: "experiment.regimes".into(),
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if regimes.is_empty() {
            return Err(CliError::Config {
                key: "experiment.regimes".into(),
                message: "at least one regime is required".into(),
            });
        }
        let seeds = list(&map["experiment.seeds"])
            .map(|s| {
                s.parse::<u64>().map_err(|e| CliError::Config {
                    key: "experiment.seeds".into(),
                    message: format!("`{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if seeds.is_empty() {
            return Err(CliError::Config {
                key: "experiment.seeds".into(),
                message: "at least one seed is required".into(),
            });
        }
        for (i, s) in seeds.iter().enumerate() {
            if seeds[..i].contains(s) {
                return Err(CliError::Config {
                    key: "experiment.seeds".into(),
                    message: format!("seed {s} is listed twice"),
                });
            }
        }
        let split = SplitSpec {
            train_frac: parse(&map, "split.train")?,
            val_frac: parse(&map, "split.val")?,
            test_frac: parse(&map, "split.test")?,
        };
        let fixed = map
            .iter()
            .filter(|(k, _)| k.starts_with("pool.msvr.") || k.starts_with("pool.mlp."))
            .map(|(k, v)| (k.trim_start_matches("pool.").to_string(), v.clone()))
            .collect();
        Ok(ExperimentSpec {
            name: map["experiment.name"].clone(),
            dataset,
            split,
            train,
            regimes,
            seeds,
            pool: PoolSpec {
                search_budget: parse(&map, "pool.search_budget")?,
                seed: parse(&map, "pool.seed")?,
                mlp_epochs: parse(&map, "pool.mlp_epochs")?,
                fixed,
            },
            output: PathBuf::from(&map["experiment.output"]),
        })
    }

    /// Every key with its effective value.
    pub fn to_flat(&self) -> BTreeMap<String, String> {
        let mut m = self.train.to_flat();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("experiment.name", self.name.clone());
        put(
            "experiment.regimes",
            self.regimes.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
        );
        put(
            "experiment.seeds",
            self.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
        );
        put("experiment.output", self.output.display().to_string());
        match &self.dataset {
            DatasetRef::MackeyGlass {
                n,
                delay,
                dt,
                sample_every,
                sign,
            } => {
                put("dataset.kind", "mg".into());
                put("dataset.n", n.to_string());
                put("dataset.delay", delay.to_string());
                put("dataset.dt", dt.to_string());
                put("dataset.sample_every", sample_every.to_string());
                put("dataset.sign", sign.to_string());
            }
            DatasetRef::Csv { path, target, exogenous } => {
                put("dataset.kind", "csv".into());
                put("dataset.path", path.display().to_string());
                put("dataset.target", target.clone());
                put("dataset.exogenous", exogenous.join(","));
            }
            DatasetRef::Synthetic { n, dominant, seed } => {
                put("dataset.kind", "synthetic".into());
                put("dataset.n", n.to_string());
                put("dataset.dominant", dominant.to_string());
                put("dataset.seed", seed.to_string());
            }
        }
        put("split.train", self.split.train_frac.to_string());
        put("split.val", self.split.val_frac.to_string());
        put("split.test", self.split.test_frac.to_string());
        put("pool.search_budget", self.pool.search_budget.to_string());
        put("pool.seed", self.pool.seed.to_string());
        put("pool.mlp_epochs", self.pool.mlp_epochs.to_string());
        for (k, v) in &self.pool.fixed {
            put(&format!("pool.{k}"), v.clone());
        }
        m
    }

    /// The effective configuration as a TOML document of quoted dotted keys.
    pub fn to_toml(&self) -> String {
        self.to_flat()
            .iter()
            .map(|(k, v)| format!("\"{k}\" = {}\n", toml::Value::String(v.clone())))
            .collect()
    }

    /// Input channels the network sees: the target plus any exogenous columns.
    pub fn channels_hint(&self) -> usize {
        match &self.dataset {
            DatasetRef::Csv { exogenous, .. } => 1 + exogenous.len(),
            _ => 1,
        }
    }

    pub fn dataset_label(&self) -> String {
        match &self.dataset {
            DatasetRef::MackeyGlass { .. } => "MG".into(),
            DatasetRef::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "csv".into()),
            DatasetRef::Synthetic { .. } => "synthetic".into(),
        }
    }
}
