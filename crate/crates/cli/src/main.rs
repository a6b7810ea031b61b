use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pgs2s::data::{DecaySign, MackeyGlassConfig};
use pgs2s::trainer::ParamRange;
use pgs2s::Split;
use pgs2s_cli::commands::{self, default_search_space};
use pgs2s_cli::plot::{plot_selection, read_round_logs};
use pgs2s_cli::{CliError, ExperimentSpec};

#[derive(Parser)]
#[command(name = "pgs2s", version, about = "Policy-selected decoder inputs for seq2seq forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SpecArgs {
    /// Experiment file (TOML with dotted or nested keys).
    spec: PathBuf,
    /// Extra `key=value` settings applied over the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, replacing `experiment.output`. Relative paths are
    /// placed under $PGS2S_RUN_ROOT when it is set.
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a Mackey-Glass series as a `t,y` CSV.
    GenerateMg {
        #[arg(long, default_value_t = 7000)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        sample_every: f64,
        #[arg(long, default_value_t = 17.0)]
        delay: f64,
        /// `canonical` (decaying) or `printed`.
        #[arg(long, default_value = "canonical")]
        sign: DecaySign,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train every regime and seed of an experiment, one run directory each.
    Train(SpecArgs),
    /// Recompute the metrics of a saved run on one split.
    Evaluate {
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Train all (regime, seed) cells in parallel and tabulate mean (±sd).
    Compare {
        #[command(flatten)]
        spec: SpecArgs,
        /// Worker threads; defaults to the number of cores.
        #[arg(short, long)]
        jobs: Option<usize>,
    },
    /// Selection-percentage and pool-RMSE plot data from a run's rounds.json.
    PlotSelection {
        rounds: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Random search over training keys, scored by validation RMSE.
    Search {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `key=range`, e.g. `train.l2=log:1e-3:1e-2` or `model.hidden=choice:16|32`.
        #[arg(short, long = "param", value_name = "KEY=RANGE")]
        param: Vec<String>,
    },
}

fn load(args: &SpecArgs) -> Result<ExperimentSpec, CliError> {
    ExperimentSpec::load(&args.spec, &args.set)
}

fn parse_space(params: &[String]) -> Result<Vec<(String, ParamRange)>, CliError> {
    if params.is_empty() {
        return Ok(default_search_space());
    }
    params
        .iter()
        .map(|p| {
            let (k, r) = p.split_once('=').ok_or_else(|| CliError::Config {
                key: p.clone(),
                message: "expected key=range".into(),
            })?;
            let range = r.parse::<ParamRange>().map_err(|message| CliError::Config {
                key: k.to_string(),
                message,
            })?;
            Ok((k.to_string(), range))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateMg {
            n,
            dt,
            sample_every,
            delay,
            sign,
            out,
        } => {
            let cfg = MackeyGlassConfig {
                n,
                dt,
                sample_every,
                delay,
                sign,
                ..MackeyGlassConfig::default()
            };
            let rows = commands::generate_mg(&cfg, &out)?;
            println!("wrote {rows} rows to {}", out.display());
        }
        Command::Train(args) => {
            let spec = load(&args)?;
            for (dir, out) in commands::train(&spec, args.out.as_deref())? {
                println!(
                    "{} seed {}: val rmse {:.4e}, test rmse {:.4e} -> {}",
                    out.regime.name(),
                    out.seed,
                    out.val_rmse,
                    out.test.rmse,
                    dir.display()
                );
            }
        }
        Command::Evaluate { checkpoint, split } => {
            let report = commands::evaluate(&checkpoint, split)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Compare { spec: args, jobs } => {
            let spec = load(&args)?;
            let cmp = commands::compare(&spec, args.out.as_deref(), jobs)?;
            print!("{}", cmp.table);
            println!("results: {}", cmp.results_path.display());
            let failed = cmp.cells.iter().filter(|c| c.outcome.is_err()).count();
            if failed > 0 {
                return Err(CliError::RunsFailed {
                    failed,
                    total: cmp.cells.len(),
                });
            }
        }
        Command::PlotSelection { rounds, out } => {
            let logs = read_round_logs(&rounds)?;
            for p in plot_selection(&logs, &rounds, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Search {
            spec: args,
            budget,
            seed,
            param,
        } => {
            let spec = load(&args)?;
            let space = parse_space(&param)?;
            let (outcome, _) = commands::search(&spec, &space, budget, seed, args.out.as_deref())?;
            let best = outcome.best_trial();
            println!("best trial {} val rmse {:.4e}", best.index, outcome.best_score());
            for (k, v) in &best.params {
                println!("  {k} = {v}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
