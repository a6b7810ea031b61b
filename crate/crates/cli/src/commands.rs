//! The subcommands, callable without going through argument parsing.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use pgs2s::data::{mackey_glass, write_series_csv, MackeyGlassConfig};
use pgs2s::metrics::MetricReport;
use pgs2s::trainer::{
    evaluate as evaluate_split, load_checkpoint, random_search, run_regime, save_checkpoint, Checkpoint, EpochLog,
    ParamRange, RegimeSpec, RunOutcome, SearchOutcome, SearchSpace,
};
use pgs2s::Split;
use rayon::prelude::*;
use serde::Serialize;

use crate::experiment::{build_experiment, rebuild_with_pool, Experiment};
use crate::report::{render_table, summarize, write_results_csv, CellResult};
use crate::spec::ExperimentSpec;
use crate::{resolve_output, CliError};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.json";
pub const ROUNDS_FILE: &str = "rounds.json";
pub const EPOCHS_FILE: &str = "epochs.csv";

fn write_file(path: &Path, body: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, body).map_err(CliError::io(path))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes `n` Mackey-Glass samples as a `t,y` CSV.
pub fn generate_mg(cfg: &MackeyGlassConfig, out: &Path) -> Result<usize, CliError> {
    let series = mackey_glass(cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file = fs::File::create(out).map_err(CliError::io(out))?;
    let mut w = std::io::BufWriter::new(file);
    write_series_csv(&mut w, &series, "y", cfg.sample_every)
        .and_then(|_| w.flush())
        .map_err(CliError::io(out))?;
    Ok(series.len())
}

/// Directory holding every run of `spec`.
pub fn experiment_dir(spec: &ExperimentSpec, out_override: Option<&Path>) -> PathBuf {
    resolve_output(out_override.unwrap_or(&spec.output)).join(&spec.name)
}

pub fn run_dir(experiment_dir: &Path, regime: RegimeSpec, seed: u64) -> PathBuf {
    experiment_dir.join(format!("{}-seed{seed}", regime.name()))
}

/// The spec narrowed to one (regime, seed) cell.
fn cell_spec(spec: &ExperimentSpec, regime: RegimeSpec, seed: u64) -> ExperimentSpec {
    let mut s = spec.clone();
    s.regimes = vec![regime];
    s.seeds = vec![seed];
    s.train.regime = regime;
    s.train.seed = seed;
    s
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    regime: &'a str,
    seed: u64,
    val_rmse: f64,
    test: &'a MetricReport,
}

fn epochs_csv(epochs: &[EpochLog]) -> String {
    let mut s = String::from("epoch,p,train_loss,val_rmse\n");
    for e in epochs {
        let p = e.p.map(|p| p.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{p},{:e},{:e}\n", e.epoch, e.train_loss, e.val_rmse));
    }
    s
}

fn write_run(spec: &ExperimentSpec, exp: &Experiment, out: &RunOutcome, dir: &Path) -> Result<(), CliError> {
    create_dir(dir)?;
    let cell = cell_spec(spec, out.regime, out.seed);
    write_file(&dir.join(CONFIG_FILE), cell.to_toml())?;
    let ckpt = Checkpoint {
        seq: out.seq.clone(),
        policy: out.policy.clone(),
        scaler: exp.data.scaler.clone(),
        lags: spec.train.lags,
        horizon: spec.train.horizon,
        pool: if out.regime.needs_pool() { exp.pool.clone() } else { Vec::new() },
        meta: cell.to_flat(),
    };
    save_checkpoint(&ckpt, &dir.join(CHECKPOINT_FILE))?;
    write_file(&dir.join(ROUNDS_FILE), json(&out.rounds))?;
    write_file(&dir.join(EPOCHS_FILE), epochs_csv(&out.epochs))?;
    let metrics = RunMetrics {
        regime: out.regime.name(),
        seed: out.seed,
        val_rmse: out.val_rmse,
        test: &out.test,
    };
    write_file(&dir.join(METRICS_FILE), json(&metrics))
}

fn run_cell(spec: &ExperimentSpec, exp: &Experiment, regime: RegimeSpec, seed: u64, dir: &Path) -> Result<RunOutcome, CliError> {
    info!("{} seed {seed}: training", regime.name());
    let out = run_regime(&spec.train, regime, seed, &exp.data, exp.cubes.as_ref())?;
    info!("{} seed {seed}: test rmse {:.4e}", regime.name(), out.test.rmse);
    write_run(spec, exp, &out, dir)?;
    Ok(out)
}

fn write_trials(path: &Path, family: &str, outcome: &SearchOutcome, w: &mut csv::Writer<fs::File>) -> Result<(), CliError> {
    for t in &outcome.trials {
        let params = t.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
        w.write_record([
            family,
            &t.index.to_string(),
            &params,
            &t.score.map(|s| format!("{s:e}")).unwrap_or_default(),
            t.error.as_deref().unwrap_or(""),
        ])
        .map_err(|e| CliError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    Ok(())
}

fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_record(header).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(w)
}

fn prepare_experiment(spec: &ExperimentSpec, dir: &Path) -> Result<Experiment, CliError> {
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), spec.to_toml())?;
    let exp = build_experiment(spec, spec.regimes.iter().any(|r| r.needs_pool()))?;
    if let Some(search) = &exp.search {
        let path = dir.join("pool_trials.csv");
        let mut w = csv_writer(&path, &["family", "trial", "params", "val_rmse", "error"])?;
        write_trials(&path, "MSVR", &search.msvr_trials, &mut w)?;
        write_trials(&path, "MLP", &search.mlp_trials, &mut w)?;
        w.flush().map_err(CliError::io(&path))?;
    }
    Ok(exp)
}

/// Trains every (regime, seed) of `spec` in turn, one run directory each.
/// Stops at the first failure.
pub fn train(spec: &ExperimentSpec, out_override: Option<&Path>) -> Result<Vec<(PathBuf, RunOutcome)>, CliError> {
    let dir = experiment_dir(spec, out_override);
    let exp = prepare_experiment(spec, &dir)?;
    let mut runs = Vec::new();
    for &regime in &spec.regimes {
        for &seed in &spec.seeds {
            let rd = run_dir(&dir, regime, seed);
            let out = run_cell(spec, &exp, regime, seed, &rd)?;
            runs.push((rd, out));
        }
    }
    Ok(runs)
}

/// Metrics of a saved run on `split`, computed from the checkpoint alone.
pub fn evaluate(checkpoint: &Path, split: Split) -> Result<MetricReport, CliError> {
    let ckpt = load_checkpoint(checkpoint)?;
    let spec = ExperimentSpec::from_flat(&ckpt.meta)?;
    let regime = spec.regimes[0];
    ckpt.expect(spec.train.cell, spec.channels_hint(), spec.train.hidden_enc)
        .map_err(pgs2s::trainer::TrainError::from)?;
    let exp = rebuild_with_pool(&spec, ckpt.pool.clone())?;
    if exp.data.scaler != ckpt.scaler {
        return Err(CliError::Format {
            path: checkpoint.to_path_buf(),
            message: "the rebuilt data does not match the stored scaler".into(),
        });
    }
    let cube = exp.cubes.as_ref().map(|c| c.split(split));
    let ev = evaluate_split(&ckpt.seq, regime, ckpt.policy.as_ref(), exp.data.split(split), cube, &ckpt.scaler)?;
    Ok(ev.report)
}

/// Result of [`compare`].
#[derive(Debug)]
pub struct Comparison {
    pub cells: Vec<CellResult>,
    pub table: String,
    pub results_path: PathBuf,
    pub table_path: PathBuf,
}

/// Runs every (regime, seed) on the worker pool and aggregates. Failed cells
/// are kept in the outputs; the function still returns `Ok` for them.
pub fn compare(spec: &ExperimentSpec, out_override: Option<&Path>, jobs: Option<usize>) -> Result<Comparison, CliError> {
    let dir = experiment_dir(spec, out_override);
    let exp = prepare_experiment(spec, &dir)?;
    let jobs_list: Vec<(RegimeSpec, u64)> = spec
        .regimes
        .iter()
        .flat_map(|&r| spec.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let work = || -> Vec<CellResult> {
        jobs_list
            .par_iter()
            .map(|&(regime, seed)| {
                let rd = run_dir(&dir, regime, seed);
                let outcome = run_cell(spec, &exp, regime, seed, &rd).map(|o| o.test).map_err(|e| {
                    warn!("{} seed {seed} failed: {e}", regime.name());
                    let _ = create_dir(&rd).and_then(|_| write_file(&rd.join("error.txt"), format!("{e}\n")));
                    e.to_string()
                });
                CellResult { regime, seed, outcome }
            })
            .collect()
    };
    let cells = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config {
                key: "--jobs".into(),
                message: e.to_string(),
            })?
            .install(work),
        None => work(),
    };
    let label = spec.dataset_label();
    let results_path = dir.join("results.csv");
    let file = fs::File::create(&results_path).map_err(CliError::io(&results_path))?;
    write_results_csv(file, &label, spec.train.horizon, &cells).map_err(|e| CliError::Format {
        path: results_path.clone(),
        message: e.to_string(),
    })?;
    let table = render_table(&label, spec.train.horizon, &summarize(&spec.regimes, &cells));
    let table_path = dir.join("results.md");
    write_file(&table_path, &table)?;
    Ok(Comparison {
        cells,
        table,
        results_path,
        table_path,
    })
}

/// Random search over training keys for the first regime and seed of
/// `spec`, scored by validation RMSE. Writes `trials.csv` and `best.toml`.
pub fn search(
    spec: &ExperimentSpec,
    space: &[(String, ParamRange)],
    budget: usize,
    seed: u64,
    out_override: Option<&Path>,
) -> Result<(SearchOutcome, ExperimentSpec), CliError> {
    if space.is_empty() {
        return Err(CliError::Config {
            key: "--param".into(),
            message: "the search space is empty".into(),
        });
    }
    let defaults = spec.train.to_flat();
    for (k, _) in space {
        if !defaults.contains_key(k) && k != "model.hidden" {
            return Err(CliError::Config {
                key: k.clone(),
                message: "not a searchable training key".into(),
            });
        }
    }
    let dir = experiment_dir(spec, out_override).join("search");
    let exp = prepare_experiment(spec, &dir)?;
    let regime = spec.regimes[0];
    let run_seed = spec.seeds[0];
    let space = SearchSpace {
        params: space.to_vec(),
    };
    let outcome = random_search(&space, budget, seed, |params: &BTreeMap<String, String>| -> Result<f64, CliError> {
        let mut cfg = spec.train.clone();
        for (k, v) in params {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(run_regime(&cfg, regime, run_seed, &exp.data, exp.cubes.as_ref())?.val_rmse)
    })?;

    let path = dir.join("trials.csv");
    let mut w = csv_writer(&path, &["family", "trial", "params", "val_rmse", "error"])?;
    write_trials(&path, regime.name(), &outcome, &mut w)?;
    w.flush().map_err(CliError::io(&path))?;

    let mut best = spec.clone();
    for (k, v) in &outcome.best_trial().params {
        best.train.set(k, v)?;
    }
    write_file(&dir.join("best.toml"), best.to_toml())?;
    Ok((outcome, best))
}

/// Default space used when `search` is given no `--param`.
pub fn default_search_space() -> Vec<(String, ParamRange)> {
    vec![
        ("train.l2".into(), ParamRange::LogUniform { lo: 1e-3, hi: 2e-2 }),
        ("model.hidden".into(), ParamRange::Choice(vec!["16".into(), "32".into(), "64".into()])),
        ("pg.l1".into(), ParamRange::LogUniform { lo: 1e-2, hi: 0.5 }),
    ]
}
