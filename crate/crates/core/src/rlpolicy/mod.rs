//! The input-selection agent: a one-hidden-layer softmax policy over the pool,
//! ε-greedy action selection, the rank/accuracy reward, discounted returns
//! and the REINFORCE update.

mod collect;

pub use collect::{collect_trajectories, PgEnv, PolicyAgent};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{logistic, sgd_step, softmax_in_place, Direction, NumError, ParamBlock, Parameterized, Rng};
use crate::s2s::S2sError;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid reward setting: {0}")]
    Config(String),
    #[error("reward inputs must be non-negative and finite (got {0})")]
    Contract(String),
    #[error("policy update: {0}")]
    Num(#[from] NumError),
    #[error(transparent)]
    Decode(#[from] S2sError),
}

impl PolicyError {
    pub fn is_numeric(&self) -> bool {
        match self {
            PolicyError::Num(_) => true,
            PolicyError::Decode(e) => e.is_numeric(),
            _ => false,
        }
    }
}

/// `π(·|s) = softmax(W2 σ(W1 s + b1) + b2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub w1: ParamBlock,
    pub b1: ParamBlock,
    pub w2: ParamBlock,
    pub b2: ParamBlock,
}

impl PolicyParams {
    pub fn new(state_dim: usize, hidden: usize, actions: usize, rng: &mut Rng) -> Self {
        PolicyParams {
            w1: ParamBlock::fan_in_uniform("pol.W1", hidden, state_dim, rng),
            b1: ParamBlock::zeros("pol.b1", hidden, 1),
            w2: ParamBlock::fan_in_uniform("pol.W2", actions, hidden, rng),
            b2: ParamBlock::zeros("pol.b2", actions, 1),
        }
    }

    pub fn zeros(state_dim: usize, hidden: usize, actions: usize) -> Self {
        PolicyParams {
            w1: ParamBlock::zeros("pol.W1", hidden, state_dim),
            b1: ParamBlock::zeros("pol.b1", hidden, 1),
            w2: ParamBlock::zeros("pol.W2", actions, hidden),
            b2: ParamBlock::zeros("pol.b2", actions, 1),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.w1.value.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn actions(&self) -> usize {
        self.w2.value.rows()
    }

    fn hidden_layer(&self, s: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.hidden()];
        self.w1.value.matvec_into(s, &mut h);
        for (v, b) in h.iter_mut().zip(self.b1.value.data()) {
            *v = logistic(*v + b);
        }
        h
    }

    pub fn logits(&self, s: &[f64]) -> Vec<f64> {
        let h = self.hidden_layer(s);
        let mut z = vec![0.0; self.actions()];
        self.w2.value.matvec_into(&h, &mut z);
        for (v, b) in z.iter_mut().zip(self.b2.value.data()) {
            *v += b;
        }
        z
    }

    pub fn log_prob(&self, s: &[f64], a: usize) -> f64 {
        let z = self.logits(s);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        z[a] - lse
    }

    /// Adds `scale · ∇_θ log π(a|s)` to the gradient slots.
    pub fn accumulate_log_prob_grad(&mut self, s: &[f64], a: usize, scale: f64) {
        let h = self.hidden_layer(s);
        let mut p = vec![0.0; self.actions()];
        self.w2.value.matvec_into(&h, &mut p);
        for (v, b) in p.iter_mut().zip(self.b2.value.data()) {
            *v += b;
        }
        softmax_in_place(&mut p);
        let delta: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(j, pj)| scale * (if j == a { 1.0 } else { 0.0 } - pj))
            .collect();
        self.w2.grad.add_outer(1.0, &delta, &h);
        for (g, d) in self.b2.grad.data_mut().iter_mut().zip(&delta) {
            *g += d;
        }
        let mut dh = vec![0.0; h.len()];
        self.w2.value.matvec_t_acc(&delta, &mut dh);
        for (d, hv) in dh.iter_mut().zip(&h) {
            *d *= hv * (1.0 - hv);
        }
        self.w1.grad.add_outer(1.0, &dh, s);
        for (g, d) in self.b1.grad.data_mut().iter_mut().zip(&dh) {
            *g += d;
        }
    }
}

impl Parameterized for PolicyParams {
    fn blocks(&self) -> Vec<&ParamBlock> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Selection probabilities for state `s`.
pub fn policy_forward(theta: &PolicyParams, s: &[f64]) -> Vec<f64> {
    let mut z = theta.logits(s);
    softmax_in_place(&mut z);
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    Train,
    Eval,
}

/// How the non-exploring action is picked during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionRule {
    /// Highest-probability action.
    Greedy,
    /// A draw from `π(·|s)`.
    Sample,
}

impl std::str::FromStr for ActionRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" | "argmax" => Ok(ActionRule::Greedy),
            "sample" | "sampling" => Ok(ActionRule::Sample),
            other => Err(format!("unknown action rule `{other}` (expected greedy|sample)")),
        }
    }
}

impl std::fmt::Display for ActionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActionRule::Greedy => "greedy",
            ActionRule::Sample => "sample",
        })
    }
}

/// First index of the largest probability.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy selection. Returns the action and whether it was a random
/// exploration move. Evaluation always takes the argmax.
pub fn select_action(probs: &[f64], epsilon: f64, rng: &mut Rng, mode: SelectMode) -> (usize, bool) {
    select_action_with(probs, epsilon, rng, mode, ActionRule::Greedy)
}

pub fn select_action_with(
    probs: &[f64],
    epsilon: f64,
    rng: &mut Rng,
    mode: SelectMode,
    rule: ActionRule,
) -> (usize, bool) {
    if mode == SelectMode::Eval {
        return (argmax(probs), false);
    }
    if epsilon > 0.0 && rng.uniform() < epsilon {
        return (rng.below(probs.len()), true);
    }
    match rule {
        ActionRule::Greedy => (argmax(probs), false),
        ActionRule::Sample => {
            let u = rng.uniform();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return (i, false);
                }
            }
            (probs.len() - 1, false)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the rank term.
    pub alpha: f64,
    /// Scale of the accuracy term `β/(β + |err|)`.
    pub beta: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Exploration probability during policy training.
    pub epsilon: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.5,
            beta: 0.05,
            gamma: 0.9,
            epsilon: 0.1,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(PolicyError::Config(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0) {
            return Err(PolicyError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(PolicyError::Config(format!("gamma must be in [0,1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(PolicyError::Config(format!("epsilon must be in [0,1], got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// `1 − rank/N^a`, rank 1 for the smallest error; ties go to the lower index.
pub fn rank_reward(errors: &[f64], chosen: usize) -> f64 {
    let e = errors[chosen];
    let better = errors
        .iter()
        .enumerate()
        .filter(|&(j, &x)| x < e || (x == e && j < chosen))
        .count();
    1.0 - (better + 1) as f64 / errors.len() as f64
}

/// `β/(β + |err|)` before the last step, 0 at the terminal step (`None`).
pub fn accuracy_reward(beta: f64, next_error: Option<f64>) -> f64 {
    match next_error {
        Some(e) => beta / (beta + e),
        None => 0.0,
    }
}

/// `α·Rank + (1−α)·Accuracy` for one decoding step.
pub fn step_reward(
    cfg: &RewardConfig,
    pool_errors: &[f64],
    chosen: usize,
    next_error: Option<f64>,
) -> Result<f64, PolicyError> {
    if chosen >= pool_errors.len() {
        return Err(PolicyError::Contract(format!("action {chosen} with {} pool errors", pool_errors.len())));
    }
    if let Some(bad) = pool_errors.iter().chain(next_error.iter()).find(|e| !(**e >= 0.0) || !e.is_finite()) {
        return Err(PolicyError::Contract(format!("{bad}")));
    }
    Ok(cfg.alpha * rank_reward(pool_errors, chosen) + (1.0 - cfg.alpha) * accuracy_reward(cfg.beta, next_error))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
    pub explored: bool,
}

/// One decoding episode `s_1, a_1, r_1, …, s_H, a_H, r_H`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub sample: usize,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        discounted_returns(&self.rewards(), gamma)
    }

    /// `R(τ) = G_1`.
    pub fn total_return(&self, gamma: f64) -> f64 {
        self.returns(gamma).first().copied().unwrap_or(0.0)
    }
}

/// `G_H = r_H`, `G_k = r_k + γ G_{k+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for k in (0..rewards.len()).rev() {
        acc = rewards[k] + gamma * acc;
        g[k] = acc;
    }
    g
}

/// Ascends `l1 · mean_τ Σ_k γ^k G_k ∇ log π(a_k|s_k)` with `k` counted from 1.
/// With `skip_explored`, exploration moves contribute nothing.
pub fn reinforce_update(
    theta: &mut PolicyParams,
    trajectories: &[Trajectory],
    l1: f64,
    gamma: f64,
    skip_explored: bool,
) -> Result<(), PolicyError> {
    if trajectories.is_empty() {
        return Ok(());
    }
    theta.zero_grad();
    let n = trajectories.len() as f64;
    for tr in trajectories {
        let g = tr.returns(gamma);
        let mut disc = 1.0;
        for (step, gk) in tr.steps.iter().zip(&g) {
            disc *= gamma;
            if skip_explored && step.explored {
                continue;
            }
            let coef = disc * gk / n;
            if coef != 0.0 {
                theta.accumulate_log_prob_grad(&step.state, step.action, coef);
            }
        }
    }
    sgd_step(&mut theta.blocks_mut(), l1, Direction::Ascent)?;
    theta.check_finite()?;
    Ok(())
}
