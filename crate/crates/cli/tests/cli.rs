use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
[experiment]
name = "small"
regimes = ["FR", "PG"]
seeds = [0]

[dataset]
kind = "synthetic"
n = 300

[task]
L = 8
H = 4

[model]
hidden = 8

[policy]
hidden = 8

[train]
batch = 16
epochs = 3

[pg]
policy_epochs = 2
rnn_epochs = 1
max_rounds = 2
action_rule = "sample"
"#;

fn pgs2s(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgs2s"))
        .args(args)
        .current_dir(dir)
        .env_remove("PGS2S_RUN_ROOT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn generate_mg_row_counts_and_byte_stability() {
    let dir = tempfile::tempdir().unwrap();
    ok(&pgs2s(dir.path(), &["generate-mg", "--n", "7000", "--out", "a.csv"]));
    ok(&pgs2s(dir.path(), &["generate-mg", "--n", "7000", "--out", "b.csv"]));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("t,y"));
    assert_eq!(text.lines().count(), 7001);

    ok(&pgs2s(dir.path(), &["generate-mg", "--n", "0", "--out", "empty.csv"]));
    assert_eq!(fs::read_to_string(dir.path().join("empty.csv")).unwrap(), "t,y\n");
}

#[test]
fn generate_mg_reports_bad_step_as_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pgs2s(dir.path(), &["generate-mg", "--n", "10", "--dt", "0.3", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_run_directories_and_evaluate_reproduces_metrics() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "small.toml", SMALL);
    ok(&pgs2s(dir.path(), &["train", "small.toml", "--out", "runs"]));
    let exp = dir.path().join("runs/small");
    assert!(exp.join("config.toml").is_file());
    for run in ["FR-seed0", "PG-seed0"] {
        let rd = exp.join(run);
        for f in ["config.toml", "checkpoint.bin", "rounds.json", "epochs.csv", "metrics.json"] {
            assert!(rd.join(f).is_file(), "{run}/{f} missing");
        }
        let recorded: serde_json::Value = serde_json::from_str(&fs::read_to_string(rd.join("metrics.json")).unwrap()).unwrap();
        let ckpt = rd.join("checkpoint.bin");
        let stdout = ok(&pgs2s(dir.path(), &["evaluate", ckpt.to_str().unwrap(), "--split", "test"]));
        let evaluated: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert_eq!(evaluated, recorded["test"], "{run}");
    }
    let rounds: serde_json::Value = serde_json::from_str(&fs::read_to_string(exp.join("PG-seed0/rounds.json")).unwrap()).unwrap();
    assert_eq!(rounds.as_array().unwrap().len(), 2);
    let dump = fs::read_to_string(exp.join("PG-seed0/config.toml")).unwrap();
    assert!(dump.contains("\"reward.alpha\""));
    assert!(dump.contains("\"experiment.regimes\" = \"PG\""));
}

#[test]
fn evaluate_with_a_fitted_pool_on_a_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    ok(&pgs2s(dir.path(), &["generate-mg", "--n", "400", "--out", "data/mg.csv"]));
    let spec = r#"
"experiment.name" = "csv"
"experiment.regimes" = ["Teach_MSVR", "PG"]
"dataset.kind" = "csv"
"dataset.path" = "data/mg.csv"
"pool.search_budget" = 0
"pool.mlp_epochs" = 20
"task.L" = 10
"task.H" = 4
"model.hidden" = 6
"policy.hidden" = 6
"train.epochs" = 2
"pg.max_rounds" = 1
"pg.policy_epochs" = 1
"pg.rnn_epochs" = 1
"#;
    write_spec(dir.path(), "csv.toml", spec);
    ok(&pgs2s(dir.path(), &["train", "csv.toml", "-o", "out"]));
    for run in ["Teach_MSVR-seed0", "PG-seed0"] {
        let rd = dir.path().join("out/csv").join(run);
        let recorded: serde_json::Value = serde_json::from_str(&fs::read_to_string(rd.join("metrics.json")).unwrap()).unwrap();
        let stdout = ok(&pgs2s(dir.path(), &["evaluate", rd.join("checkpoint.bin").to_str().unwrap()]));
        let evaluated: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert_eq!(evaluated, recorded["test"], "{run}");
    }
}

#[test]
fn compare_single_cell_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "one.toml", SMALL);
    let stdout = ok(&pgs2s(
        dir.path(),
        &["compare", "one.toml", "-o", "runs", "-s", "experiment.regimes=FR", "-s", "experiment.name=one"],
    ));
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("| FR")).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].contains("**"));
    let results = fs::read_to_string(dir.path().join("runs/one/results.csv")).unwrap();
    assert_eq!(results.lines().next(), Some("dataset,H,regime,seed,metric,value,status"));
    assert!(results.lines().skip(1).all(|l| l.starts_with("synthetic,4,FR,0,") && l.ends_with(",ok")));
}

#[test]
fn compare_is_deterministic_and_parallel_safe() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "cmp.toml", SMALL);
    let set = ["-s", "experiment.seeds=1,2", "-s", "experiment.regimes=FR,TF,PG"];
    let mut args = vec!["compare", "cmp.toml", "-o", "a", "--jobs", "3"];
    args.extend(set);
    ok(&pgs2s(dir.path(), &args));
    let mut args = vec!["compare", "cmp.toml", "-o", "b", "--jobs", "1"];
    args.extend(set);
    ok(&pgs2s(dir.path(), &args));
    let read = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap();
    assert_eq!(read("a/small/results.csv"), read("b/small/results.csv"));
    assert_eq!(read("a/small/results.md"), read("b/small/results.md"));
    assert_eq!(read("a/small/results.csv").lines().count(), 1 + 3 * 2 * 4);
}

#[test]
fn compare_records_failed_cells_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "bad.toml", SMALL);
    let out = pgs2s(
        dir.path(),
        &["compare", "bad.toml", "-o", "runs", "-s", "experiment.regimes=FR", "-s", "train.optimizer=sgd", "-s", "train.l2=1e300"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let results = fs::read_to_string(dir.path().join("runs/small/results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.contains(",failed: ")), "{results}");
    assert!(dir.path().join("runs/small/FR-seed0/error.txt").is_file());
}

#[test]
fn config_errors_name_the_key_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "typo.toml", "[reward]\nalhpa = 0.5\n");
    let out = pgs2s(dir.path(), &["train", "typo.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reward.alhpa"));

    write_spec(dir.path(), "dup.toml", "[experiment]\nseeds = [4, 4]\n");
    let out = pgs2s(dir.path(), &["compare", "dup.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.seeds"));

    let out = pgs2s(dir.path(), &["train", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = pgs2s(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numeric_failure_in_train_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "num.toml", SMALL);
    let out = pgs2s(
        dir.path(),
        &["train", "num.toml", "-s", "experiment.regimes=TF", "-s", "train.optimizer=sgd", "-s", "train.l2=1e300"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_root_env_places_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "env.toml", SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_pgs2s"))
        .args(["train", "env.toml", "-s", "experiment.regimes=FR", "-s", "experiment.output=rel"])
        .current_dir(dir.path())
        .env("PGS2S_RUN_ROOT", dir.path().join("root"))
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("root/rel/small/FR-seed0/checkpoint.bin").is_file());
}

#[test]
fn plot_selection_from_a_pg_run() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "pg.toml", SMALL);
    ok(&pgs2s(dir.path(), &["train", "pg.toml", "-o", "runs", "-s", "experiment.regimes=PG"]));
    ok(&pgs2s(dir.path(), &["plot-selection", "runs/small/PG-seed0/rounds.json", "-o", "plots"]));
    let csv = fs::read_to_string(dir.path().join("plots/selection.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("round,split,step,MSVR,MLP,Decoder"));
    // 2 rounds × 2 splits × (4 steps + mean)
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 5);
    for line in csv.lines().skip(1) {
        let sum: f64 = line.split(',').skip(3).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 100.0).abs() <= 0.1, "{line}");
    }
    assert!(fs::read_to_string(dir.path().join("plots/selection.svg")).unwrap().starts_with("<svg"));
    assert!(dir.path().join("plots/pool_rmse.csv").is_file());

    ok(&pgs2s(dir.path(), &["train", "pg.toml", "-o", "runs", "-s", "experiment.regimes=FR"]));
    let out = pgs2s(dir.path(), &["plot-selection", "runs/small/FR-seed0/rounds.json", "-o", "plots2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nothing to plot"));
}

#[test]
fn search_writes_trials_and_best_config() {
    let dir = tempfile::tempdir().unwrap();
    write_spec(dir.path(), "s.toml", SMALL);
    let stdout = ok(&pgs2s(
        dir.path(),
        &[
            "search",
            "s.toml",
            "-o",
            "runs",
            "-s",
            "experiment.regimes=FR",
            "--budget",
            "3",
            "-p",
            "train.l2=log:1e-3:1e-2",
            "-p",
            "model.hidden=choice:4|8",
        ],
    ));
    assert!(stdout.starts_with("best trial"));
    let trials = fs::read_to_string(dir.path().join("runs/small/search/trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 4);
    let best = fs::read_to_string(dir.path().join("runs/small/search/best.toml")).unwrap();
    assert!(best.contains("\"train.l2\""));

    let out = pgs2s(dir.path(), &["search", "s.toml", "-p", "reward.nope=int:1:3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["mg_desk.toml", "synthetic.toml"] {
        let spec = pgs2s_cli::ExperimentSpec::load(&dir.join(name), &[]).unwrap();
        assert!(!spec.regimes.is_empty(), "{name}");
    }
}
