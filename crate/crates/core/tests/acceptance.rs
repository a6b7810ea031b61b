//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::time::{Duration, Instant};

use pgs2s::auxmodels::{AuxModel, DirectMlp, MsvrConfig, MsvrPrimal, Activation};
use pgs2s::data::{mackey_glass, prepare, write_series_csv, MackeyGlassConfig, SplitSpec};
use pgs2s::metrics::MetricReport;
use pgs2s::numcore::{dot, grad_check, Matrix, Parameterized, Rng};
use pgs2s::rlpolicy::{
    accuracy_reward, policy_forward, rank_reward, reinforce_update, select_action_with, step_reward, ActionRule,
    PolicyParams, RewardConfig, SelectMode, Trajectory, TrajectoryStep,
};
use pgs2s::s2s::{
    bptt, decode_with_inputs, encode, forward, sequence_loss, CellKind, CellParams, ConstantSelector, Feed, Phase,
    Regime, ScriptedSelector, SeqParams,
};
use pgs2s::trainer::{
    evaluate, init_policy, init_seq, run_regime, search_pool, selection_percentages, synthetic_dominance, train_pg,
    PoolCubes, RegimeSpec, RunOutcome, TrainConfig,
};

const KINDS: [CellKind; 3] = [CellKind::Lstm, CellKind::Ernn, CellKind::Gru];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn randomize<P: Parameterized>(p: &mut P, rng: &mut Rng, scale: f64) {
    for b in p.blocks_mut() {
        for v in b.value.data_mut() {
            *v = scale * rng.normal();
        }
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform()).collect()).unwrap()
}

// ---------------------------------------------------------------- criterion 1

fn seq_grad_error(kind: CellKind, regime: Regime, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut p = SeqParams::new(kind, 2, 3, 3, &mut rng).unwrap();
    randomize(&mut p, &mut rng, 0.6);
    let w = random_matrix(4, 2, &mut rng);
    let target: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
    let aux: Vec<Vec<f64>> = (0..2).map(|_| (0..3).map(|_| rng.uniform()).collect()).collect();
    let mut sel = ScriptedSelector(vec![1, 2, 0]);
    let mut feed = Feed::new(regime, Phase::Train).truth(&target).aux(&aux);
    if regime == Regime::PolicyGradient {
        feed = feed.selector(&mut sel);
    }
    let (enc, dec) = forward(&p, &w, 3, feed, &mut rng).unwrap();
    p.zero_grad();
    bptt(&mut p, &enc, &dec, &target, 1.0).unwrap();
    let inputs = dec.inputs.clone();
    let f = |q: &SeqParams| {
        let e = encode(q, &w).unwrap();
        sequence_loss(&decode_with_inputs(q, &e, &inputs).unwrap().preds, &target)
    };
    grad_check(&mut p, f, 1e-5, 1000, &mut rng).unwrap().max_rel_err
}

fn mlp_grad_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::Sigmoid };
    let mut m = DirectMlp::new(6, 5, 3, act, &mut rng);
    let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.normal()).collect()).collect();
    let ys: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
    let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
    m.loss_and_grad(&xr, &yr);
    let f = |m: &DirectMlp| xr.iter().zip(&yr).map(|(x, y)| m.sample_loss(x, y)).sum::<f64>() / xr.len() as f64;
    grad_check(&mut m, f, 1e-5, 1000, &mut rng).unwrap().max_rel_err
}

/// Primal gradient error plus whether a short IRWLS step lowers the objective.
fn msvr_check(seed: u64) -> (f64, bool) {
    let mut rng = Rng::new(seed);
    let x = random_matrix(14, 3, &mut rng);
    let y = Matrix::from_vec(14, 2, (0..28).map(|_| rng.normal()).collect()).unwrap();
    let cfg = MsvrConfig {
        c: 2.0,
        epsilon: 0.1,
        gamma: 0.7,
        ..MsvrConfig::default()
    };
    let mut p = MsvrPrimal::random(&x, &y, &cfg, 0.3, &mut rng);
    let f0 = p.compute_gradient();
    let (d, db) = p.irwls_direction().unwrap();
    let slope = dot(p.beta.grad.data(), d.data()) + dot(p.bias.grad.data(), &db);
    let mut q = p.clone();
    q.beta.value.add_assign_scaled(1e-3, &d);
    for (v, dv) in q.bias.value.data_mut().iter_mut().zip(&db) {
        *v += 1e-3 * dv;
    }
    let decreases = slope < 0.0 && q.objective() < f0;
    let err = grad_check(&mut p, |m| m.objective(), 1e-6, 1000, &mut rng).unwrap().max_rel_err;
    (err, decreases)
}

fn policy_grad_error(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut p = PolicyParams::new(4, 5, 3, &mut rng);
    randomize(&mut p, &mut rng, 1.0);
    let states: Vec<Vec<f64>> = (0..4).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
    let actions = [0usize, 2, 1, 2];
    let coefs = [0.7, -0.3, 1.2, 0.4];
    p.zero_grad();
    for ((s, &a), &c) in states.iter().zip(&actions).zip(&coefs) {
        p.accumulate_log_prob_grad(s, a, c);
    }
    let f = |q: &PolicyParams| {
        states
            .iter()
            .zip(&actions)
            .zip(&coefs)
            .map(|((s, &a), &c)| c * q.log_prob(s, a))
            .sum::<f64>()
    };
    grad_check(&mut p, f, 1e-5, 1000, &mut rng).unwrap().max_rel_err
}

fn criterion_1() -> Check {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let regimes = [Regime::FreeRunning, Regime::TeacherForcing, Regime::PolicyGradient];
    for kind in KINDS {
        for seed in 0..3 {
            let e = seq_grad_error(kind, regimes[seed as usize], 100 + seed);
            ensure(e < 1e-4, || format!("{kind} instance {seed}: rel err {e:.2e}"))?;
            worst = worst.max(e);
        }
    }
    for seed in 0..3 {
        let e = mlp_grad_error(200 + seed);
        ensure(e < 1e-4, || format!("MLP instance {seed}: rel err {e:.2e}"))?;
        let (e2, decreases) = msvr_check(300 + seed);
        ensure(e2 < 1e-4, || format!("MSVR instance {seed}: rel err {e2:.2e}"))?;
        ensure(decreases, || format!("MSVR instance {seed}: IRWLS step does not lower the objective"))?;
        let e3 = policy_grad_error(400 + seed);
        ensure(e3 < 1e-4, || format!("policy instance {seed}: rel err {e3:.2e}"))?;
        worst = worst.max(e).max(e2).max(e3);
    }
    within(t.elapsed(), Duration::from_secs(60))?;
    Ok(format!("max rel err {worst:.2e} over 18 instances"))
}

// ---------------------------------------------------------------- criterion 2

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine(p: &CellParams, g: usize, z: &[f64], r: usize) -> f64 {
    let u = &p.blocks[2 * g].value;
    let mut acc = p.blocks[2 * g + 1].value.get(r, 0);
    for (c, zc) in z.iter().enumerate() {
        acc += u.get(r, c) * zc;
    }
    acc
}

/// One recurrent step written gate by gate.
fn oracle_step(p: &CellParams, h: &[f64], c: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = p.hidden;
    let z: Vec<f64> = h.iter().chain(x).copied().collect();
    match p.kind {
        CellKind::Lstm => {
            let (mut hn, mut cn) = (vec![0.0; n], vec![0.0; n]);
            for r in 0..n {
                let f = sig(affine(p, 0, &z, r));
                let i = sig(affine(p, 1, &z, r));
                let cand = affine(p, 2, &z, r).tanh();
                let o = sig(affine(p, 3, &z, r));
                cn[r] = f * c[r] + i * cand;
                hn[r] = o * cn[r].tanh();
            }
            (hn, cn)
        }
        CellKind::Ernn => ((0..n).map(|r| affine(p, 0, &z, r).tanh()).collect(), c.to_vec()),
        CellKind::Gru => {
            let rg: Vec<f64> = (0..n).map(|r| sig(affine(p, 0, &z, r))).collect();
            let ug: Vec<f64> = (0..n).map(|r| sig(affine(p, 1, &z, r))).collect();
            let z2: Vec<f64> = (0..n).map(|r| rg[r] * h[r]).chain(x.iter().copied()).collect();
            let hn = (0..n).map(|r| (1.0 - ug[r]) * h[r] + ug[r] * affine(p, 2, &z2, r).tanh()).collect();
            (hn, c.to_vec())
        }
    }
}

fn rollout_gap(kind: CellKind, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let n = 3;
    let mut p = SeqParams::new(kind, 1, n, n, &mut rng).unwrap();
    randomize(&mut p, &mut rng, 0.8);
    let w = random_matrix(4, 1, &mut rng);
    let (enc, dec) = forward(&p, &w, 3, Feed::new(Regime::FreeRunning, Phase::Eval), &mut rng).unwrap();
    let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
    let mut gap: f64 = 0.0;
    for j in 0..4 {
        (h, c) = oracle_step(&p.enc, &h, &c, &[w.get(j, 0)]);
    }
    for (a, b) in enc.context().iter().zip(&h) {
        gap = gap.max((a - b).abs());
    }
    let ctx = h.clone();
    let mut input = w.get(3, 0);
    for k in 0..3 {
        let x: Vec<f64> = std::iter::once(input).chain(ctx.iter().copied()).collect();
        (h, c) = oracle_step(&p.dec, &h, &c, &x);
        let y = (0..n).map(|r| p.v.value.get(0, r) * h[r]).sum::<f64>() + p.bv.value.get(0, 0);
        gap = gap.max((y - dec.preds[k]).abs());
        input = y;
    }
    gap
}

fn metric_gap(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (n, h) = (7, 4);
    let truth: Vec<Vec<f64>> = (0..n).map(|_| (0..h).map(|_| 0.5 + rng.uniform()).collect()).collect();
    let preds: Vec<Vec<f64>> = (0..n).map(|_| (0..h).map(|_| 0.5 + rng.uniform()).collect()).collect();
    let r = MetricReport::evaluate(&truth, &preds).unwrap();
    let (mut rmse, mut mape, mut smape) = (0.0, 0.0, 0.0);
    let mut pooled = 0.0;
    for i in 0..n {
        let (mut sq, mut ap, mut sp) = (0.0, 0.0, 0.0);
        for k in 0..h {
            let (y, f) = (truth[i][k], preds[i][k]);
            sq += (y - f).powi(2);
            ap += ((y - f) / y).abs();
            sp += (y - f).abs() / (y + f).abs();
        }
        pooled += sq;
        rmse += (sq / h as f64).sqrt();
        mape += ap / h as f64;
        smape += sp / h as f64;
    }
    let n = n as f64;
    [
        (r.rmse, rmse / n),
        (r.mape, mape / n),
        (r.smape, smape / n),
        (r.pooled_rmse, (pooled / (n * h as f64)).sqrt()),
    ]
    .iter()
    .map(|(a, b)| (a - b).abs())
    .fold(0.0, f64::max)
}

fn criterion_2() -> Check {
    let mut worst: f64 = 0.0;
    for kind in KINDS {
        for seed in 0..3 {
            let g = rollout_gap(kind, 500 + seed);
            ensure(g < 1e-12, || format!("{kind} rollout differs from the oracle by {g:.2e}"))?;
            worst = worst.max(g);
        }
    }
    for seed in 0..3 {
        let g = metric_gap(600 + seed);
        ensure(g < 1e-12, || format!("metrics differ from brute force by {g:.2e}"))?;
        worst = worst.max(g);
    }
    Ok(format!("max gap {worst:.2e}"))
}

// ---------------------------------------------------------------- criterion 3

fn one_step(reward: f64, state: &[f64], action: usize) -> Trajectory {
    Trajectory {
        sample: 0,
        steps: vec![TrajectoryStep {
            state: state.to_vec(),
            action,
            log_prob: 0.0,
            reward,
            explored: false,
        }],
    }
}

/// Update count at which the rewarded arm's probability first reaches 0.95.
fn bandit(seed: u64) -> Option<usize> {
    let mut rng = Rng::new(seed);
    let mut p = PolicyParams::new(1, 4, 2, &mut rng);
    let s = [1.0];
    for update in 1..=500 {
        let probs = policy_forward(&p, &s);
        let batch: Vec<Trajectory> = (0..16)
            .map(|_| {
                let (a, _) = select_action_with(&probs, 0.0, &mut rng, SelectMode::Train, ActionRule::Sample);
                one_step(if a == 0 { 1.0 } else { 0.0 }, &s, a)
            })
            .collect();
        reinforce_update(&mut p, &batch, 1.0, 0.9, false).unwrap();
        if policy_forward(&p, &s)[0] >= 0.95 {
            return Some(update);
        }
    }
    None
}

fn criterion_3() -> Check {
    let t = Instant::now();
    let mut needed = Vec::new();
    for seed in 0..5 {
        needed.push(bandit(seed).ok_or_else(|| format!("seed {seed} did not reach 95% in 500 updates"))?);
    }
    within(t.elapsed(), Duration::from_secs(10))?;
    Ok(format!("updates needed per seed {needed:?}"))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Check {
    let e = [0.1, 0.3, 0.5];
    let ranks = [rank_reward(&e, 0), rank_reward(&e, 1), rank_reward(&e, 2)];
    let want = [2.0 / 3.0, 1.0 / 3.0, 0.0];
    for (got, want) in ranks.iter().zip(want) {
        ensure((got - want).abs() < 1e-15, || format!("rank rewards {ranks:?}"))?;
    }
    ensure(accuracy_reward(0.3, Some(0.0)) == 1.0, || "accuracy reward at zero error is not 1".into())?;
    ensure(accuracy_reward(0.3, None) == 0.0, || "accuracy reward at the terminal step is not 0".into())?;
    let mut rng = Rng::new(4);
    for i in 0..10_000 {
        let na = 2 + rng.below(4);
        let errors: Vec<f64> = (0..na).map(|_| 10f64.powf(rng.uniform_range(-6.0, 3.0)) * rng.uniform()).collect();
        let cfg = RewardConfig {
            alpha: rng.uniform(),
            beta: 10f64.powf(rng.uniform_range(-4.0, 2.0)),
            ..RewardConfig::default()
        };
        let next = (rng.uniform() < 0.8).then(|| 10f64.powf(rng.uniform_range(-6.0, 3.0)) * rng.uniform());
        let r = step_reward(&cfg, &errors, rng.below(na), next).map_err(|e| e.to_string())?;
        ensure((0.0..=1.0).contains(&r), || format!("fuzz input {i}: reward {r}"))?;
    }
    Ok("ranks 2/3, 1/3, 0; accuracy 1 and 0; 10^4 fuzzed rewards in [0, 1]".into())
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Check {
    for (i, kind) in KINDS.into_iter().enumerate() {
        let mut rng = Rng::new(700 + i as u64);
        let mut p = SeqParams::new(kind, 1, 4, 4, &mut rng).unwrap();
        randomize(&mut p, &mut rng, 0.6);
        let w = random_matrix(5, 1, &mut rng);
        let target: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let aux: Vec<Vec<f64>> = (0..2).map(|_| (0..6).map(|_| rng.uniform()).collect()).collect();
        let run = |regime: Regime, phase: Phase, constant: Option<usize>| {
            let mut sel = constant.map(ConstantSelector);
            let mut feed = Feed::new(regime, phase).truth(&target).aux(&aux);
            if let Some(s) = sel.as_mut() {
                feed = feed.selector(s);
            }
            let mut r = Rng::new(9);
            forward(&p, &w, 6, feed, &mut r).unwrap().1
        };
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let tf = run(Regime::TeacherForcing, Phase::Train, None);
        let fr = run(Regime::FreeRunning, Phase::Train, None);
        let ss1 = run(Regime::ScheduledSampling { p: 1.0 }, Phase::Train, None);
        let ss0 = run(Regime::ScheduledSampling { p: 0.0 }, Phase::Train, None);
        ensure(bits(&ss1.preds) == bits(&tf.preds), || format!("{kind}: SS(1) differs from TF"))?;
        ensure(bits(&ss0.preds) == bits(&fr.preds), || format!("{kind}: SS(0) differs from FR"))?;
        for phase in [Phase::Train, Phase::Eval] {
            let pg = run(Regime::PolicyGradient, phase, Some(2));
            let fr = run(Regime::FreeRunning, phase, None);
            ensure(bits(&pg.preds) == bits(&fr.preds), || format!("{kind}: constant-decoder PG differs from FR"))?;
        }
    }

    // the same identity through the trained-model evaluation path
    let task = synthetic_dominance(300, 8, 4, 0, 3).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        lags: 8,
        horizon: 4,
        hidden_enc: 6,
        hidden_dec: 6,
        ..TrainConfig::default()
    };
    let seq = init_seq(&cfg, 1, 3).map_err(|e| e.to_string())?;
    let mut policy = PolicyParams::zeros(6, cfg.policy_hidden, 3);
    policy.b2.value.data_mut()[2] = 50.0;
    let (data, cubes) = (&task.data, &task.cubes);
    let fr = evaluate(&seq, RegimeSpec::Fr, None, &data.test, None, &data.scaler).map_err(|e| e.to_string())?;
    let pg = evaluate(&seq, RegimeSpec::Pg, Some(&policy), &data.test, Some(&cubes.test), &data.scaler)
        .map_err(|e| e.to_string())?;
    ensure(fr.preds == pg.preds && fr.report == pg.report, || "decoder-only policy differs from FR in evaluation".into())?;
    Ok("SS(1)=TF, SS(0)=FR, decoder-only PG=FR bit-exact for LSTM/ERNN/GRU".into())
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Check {
    let t = Instant::now();
    let mut shares = Vec::new();
    for seed in 0..5u64 {
        let task = synthetic_dominance(600, 10, 5, 0, seed).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            lags: 10,
            horizon: 5,
            hidden_enc: 8,
            hidden_dec: 8,
            policy_hidden: 8,
            batch_size: 16,
            policy_epochs: 10,
            rnn_epochs: 2,
            max_rounds: 6,
            patience: 6,
            l1: 0.5,
            l2: 0.01,
            action_rule: ActionRule::Sample,
            seed,
            ..TrainConfig::default()
        };
        let seq = init_seq(&cfg, 1, seed).map_err(|e| e.to_string())?;
        let pol = init_policy(&cfg, 3, seed);
        let out = train_pg(&cfg, &task.data, &task.cubes, seq, pol).map_err(|e| e.to_string())?;
        let val = &task.data.val;
        let ev = evaluate(&out.seq, RegimeSpec::Pg, Some(&out.policy), val, Some(&task.cubes.val), &task.data.scaler)
            .map_err(|e| e.to_string())?;
        let sel = selection_percentages(&ev.actions, 3, val.horizon);
        shares.push(sel.iter().map(|r| r[task.dominant]).sum::<f64>() / val.horizon as f64);
    }
    let hits = shares.iter().filter(|s| **s >= 80.0).count();
    let desc: Vec<String> = shares.iter().map(|s| format!("{s:.0}%")).collect();
    ensure(hits >= 4, || format!("dominant model share per seed {desc:?}; {hits}/5 seeds at >= 80%"))?;
    within(t.elapsed(), Duration::from_secs(300))?;
    Ok(format!("dominant model share per seed {desc:?} ({hits}/5 at >= 80%)"))
}

// ------------------------------------------------------------ criteria 7 to 9

struct Desk {
    runs: Vec<RunOutcome>,
    elapsed: Duration,
}

const DESK_SEEDS: [u64; 3] = [0, 1, 2];
const DESK_REGIMES: [RegimeSpec; 3] = [RegimeSpec::Fr, RegimeSpec::Tf, RegimeSpec::Pg];

fn desk_experiment() -> Result<Desk, String> {
    let t = Instant::now();
    let series = mackey_glass(&MackeyGlassConfig {
        n: 3000,
        ..MackeyGlassConfig::default()
    })
    .map_err(|e| e.to_string())?;
    let data = prepare(&series, 50, 12, &SplitSpec::default()).map_err(|e| e.to_string())?;
    let pool = search_pool(&data, 8, 0, 200).map_err(|e| e.to_string())?;
    let cubes = PoolCubes::build(&[AuxModel::Msvr(pool.msvr), AuxModel::Mlp(pool.mlp)], &data).map_err(|e| e.to_string())?;
    let base = TrainConfig {
        lags: 50,
        horizon: 12,
        hidden_enc: 32,
        hidden_dec: 32,
        epochs: 15,
        patience: 100,
        max_rounds: 3,
        rnn_epochs: 5,
        policy_epochs: 10,
        action_rule: ActionRule::Sample,
        ..TrainConfig::default()
    };
    let mut runs = Vec::new();
    for seed in DESK_SEEDS {
        for regime in DESK_REGIMES {
            runs.push(run_regime(&base, regime, seed, &data, Some(&cubes)).map_err(|e| format!("{regime} seed {seed}: {e}"))?);
        }
    }
    Ok(Desk {
        runs,
        elapsed: t.elapsed(),
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_7(desk: &Result<Desk, String>) -> Check {
    let desk = desk.as_ref().map_err(Clone::clone)?;
    let med = |r: RegimeSpec| median(desk.runs.iter().filter(|o| o.regime == r).map(|o| o.test.rmse).collect());
    let (fr, tf, pg) = (med(RegimeSpec::Fr), med(RegimeSpec::Tf), med(RegimeSpec::Pg));
    let detail = format!("median test RMSE PG {pg:.3e}, FR {fr:.3e}, TF {tf:.3e} in {:.0?}", desk.elapsed);
    ensure(pg <= 1.05 * fr.min(tf), || detail.clone())?;
    within(desk.elapsed, Duration::from_secs(15 * 60))?;
    Ok(detail)
}

fn criterion_8(desk: &Result<Desk, String>) -> Check {
    let desk = desk.as_ref().map_err(Clone::clone)?;
    let logs: Vec<_> = desk.runs.iter().flat_map(|o| &o.rounds).collect();
    ensure(!logs.is_empty(), || "no PG rounds were logged".into())?;
    for (o, l) in desk.runs.iter().flat_map(|o| o.rounds.iter().map(move |l| (o, l))) {
        ensure(l.seq_frozen, || format!("seed {} round {}: networks changed during policy epochs", o.seed, l.round))?;
        ensure(l.policy_frozen, || format!("seed {} round {}: policy changed during RNN epochs", o.seed, l.round))?;
    }
    Ok(format!("{} rounds byte-compared in both directions", logs.len()))
}

fn criterion_9(first: &Result<Desk, String>) -> Check {
    let first = first.as_ref().map_err(Clone::clone)?;
    let second = desk_experiment()?;
    let mut compared = 0;
    for (a, b) in first.runs.iter().zip(&second.runs) {
        let fields = |o: &RunOutcome| {
            let mut v = vec![o.val_rmse, o.test.rmse, o.test.mape, o.test.smape, o.test.pooled_rmse];
            v.extend(&o.test.per_step_rmse);
            v.into_iter().map(f64::to_bits).collect::<Vec<_>>()
        };
        ensure(fields(a) == fields(b), || format!("{} seed {}: metrics differ on rerun", a.regime, a.seed))?;
        ensure(a.rounds == b.rounds && a.epochs == b.epochs, || format!("{} seed {}: logs differ on rerun", a.regime, a.seed))?;
        ensure(a.seq.value_bytes() == b.seq.value_bytes(), || format!("{} seed {}: weights differ", a.regime, a.seed))?;
        compared += 1;
    }
    ensure(compared == first.runs.len() && second.runs.len() == compared, || "run counts differ".into())?;
    Ok(format!("{compared} runs identical to the bit"))
}

// --------------------------------------------------------------- criterion 10

fn criterion_10() -> Check {
    let mg = |dt: f64| {
        mackey_glass(&MackeyGlassConfig {
            n: 2000,
            dt,
            ..MackeyGlassConfig::default()
        })
        .map_err(|e| e.to_string())
    };
    let coarse = mg(0.1)?;
    let fine = mg(0.05)?;
    let gap = coarse.values.iter().zip(&fine.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(gap < 1e-4, || format!("dt halving moved values by {gap:.2e}"))?;
    let render = || -> Result<Vec<u8>, String> {
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &mg(0.1)?, "y", 1.0).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    ensure(render()? == render()?, || "regenerated output is not byte-identical".into())?;
    Ok(format!("max change under dt halving {gap:.2e}; output byte-identical"))
}

fn report(n: usize, name: &str, result: Check, elapsed: Duration) -> bool {
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d.as_str()),
        Err(d) => ("FAIL", d.as_str()),
    };
    println!("{tag} [{n:>2}] {name}: {detail} ({elapsed:.1?})");
    result.is_ok()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let mut ok = true;
    let cheap: [(&str, fn() -> Check); 6] = [
        ("gradient correctness", criterion_1),
        ("oracle equivalence", criterion_2),
        ("REINFORCE two-armed bandit", criterion_3),
        ("reward unit suite", criterion_4),
        ("regime identities", criterion_5),
        ("synthetic-dominance policy learning", criterion_6),
    ];
    for (i, (name, f)) in cheap.into_iter().enumerate() {
        let (r, t) = timed(f);
        ok &= report(i + 1, name, r, t);
    }
    let (desk, t) = timed(desk_experiment);
    ok &= report(7, "desk-scale ordering on Mackey-Glass", criterion_7(&desk), t);
    let (r, t) = timed(|| criterion_8(&desk));
    ok &= report(8, "asynchronous separation", r, t);
    let (r, t) = timed(|| criterion_9(&desk));
    ok &= report(9, "reproducibility", r, t);
    let (r, t) = timed(criterion_10);
    ok &= report(10, "Mackey-Glass generator", r, t);
    if !ok {
        std::process::exit(1);
    }
}
