use super::{
    policy_forward, select_action_with, step_reward, ActionRule, PolicyError, PolicyParams, RewardConfig,
    SelectMode, Trajectory, TrajectoryStep,
};
use crate::auxmodels::ForecastCube;
use crate::data::{Sample, ScalerParams};
use crate::numcore::Rng;
use crate::s2s::{decode_sequence, encode, DecodeTrace, EncoderTrace, Feed, InputSelector, Phase, Regime, SeqParams};

/// Policy network acting as the decoder's input selector. Every decision is
/// recorded as `(state, action, explored)`.
pub struct PolicyAgent<'a> {
    pub policy: &'a PolicyParams,
    pub epsilon: f64,
    pub mode: SelectMode,
    pub rule: ActionRule,
    pub record: Vec<(Vec<f64>, usize, bool)>,
}

impl<'a> PolicyAgent<'a> {
    pub fn new(policy: &'a PolicyParams, epsilon: f64, mode: SelectMode, rule: ActionRule) -> Self {
        PolicyAgent {
            policy,
            epsilon,
            mode,
            rule,
            record: Vec::new(),
        }
    }
}

impl InputSelector for PolicyAgent<'_> {
    fn select(&mut self, _k: usize, state: &[f64], rng: &mut Rng) -> usize {
        let probs = policy_forward(self.policy, state);
        let (a, explored) = select_action_with(&probs, self.epsilon, rng, self.mode, self.rule);
        self.record.push((state.to_vec(), a, explored));
        a
    }
}

/// Everything the agent's environment needs per sample: normalized windows,
/// auxiliary forecasts in both scales, and original-scale truth for rewards.
pub struct PgEnv<'a> {
    pub samples: &'a [Sample],
    pub cube: &'a ForecastCube,
    pub scaler: &'a ScalerParams,
    /// `aux_scaled[i][a][k]`.
    pub aux_scaled: Vec<Vec<Vec<f64>>>,
    pub truth: Vec<Vec<f64>>,
    pub horizon: usize,
    encodings: Option<Vec<EncoderTrace>>,
}

impl<'a> PgEnv<'a> {
    pub fn new(samples: &'a [Sample], cube: &'a ForecastCube, scaler: &'a ScalerParams) -> Self {
        let horizon = cube.horizon();
        let aux_scaled = (0..samples.len())
            .map(|i| {
                (0..cube.decoder_slot())
                    .map(|a| cube.series(i, a).iter().map(|&v| scaler.apply_value(0, v)).collect())
                    .collect()
            })
            .collect();
        let truth = samples
            .iter()
            .map(|s| s.target.iter().map(|&v| scaler.invert_value(0, v)).collect())
            .collect();
        PgEnv {
            samples,
            cube,
            scaler,
            aux_scaled,
            truth,
            horizon,
            encodings: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.cube.n_models()
    }

    /// Caches encoder outputs; valid only while `params` stays frozen.
    pub fn cache_encodings(&mut self, params: &SeqParams) -> Result<(), PolicyError> {
        let enc = self
            .samples
            .iter()
            .map(|s| encode(params, &s.window).map(|e| e.summary()))
            .collect::<Result<Vec<_>, _>>()?;
        self.encodings = Some(enc);
        Ok(())
    }

    pub fn clear_encodings(&mut self) {
        self.encodings = None;
    }

    fn encoding(&self, params: &SeqParams, i: usize) -> Result<EncoderTrace, PolicyError> {
        match &self.encodings {
            Some(e) => Ok(e[i].clone()),
            None => Ok(encode(params, &self.samples[i].window)?.summary()),
        }
    }

    /// Policy-regime decode of sample `i` with the given selector.
    pub fn decode(
        &self,
        params: &SeqParams,
        i: usize,
        selector: &mut dyn InputSelector,
        phase: Phase,
        rng: &mut Rng,
    ) -> Result<DecodeTrace, PolicyError> {
        let enc = self.encoding(params, i)?;
        let s = &self.samples[i];
        let feed = Feed::new(Regime::PolicyGradient, phase)
            .aux(&self.aux_scaled[i])
            .selector(selector);
        Ok(decode_sequence(params, &enc, s.last_observed(), self.horizon, feed, rng)?)
    }

    /// Original-scale absolute error of every pool slot at step `k` (1-based).
    pub fn pool_errors(&self, i: usize, dec: &DecodeTrace, k: usize) -> Vec<f64> {
        let y = self.truth[i][k - 1];
        let mut e: Vec<f64> = (0..self.cube.decoder_slot())
            .map(|a| (y - self.cube.get(i, a, k - 1)).abs())
            .collect();
        e.push((y - self.scaler.invert_value(0, dec.preds[k - 1])).abs());
        e
    }

    /// Original-scale decoder error at step `k` (1-based).
    pub fn decoder_error(&self, i: usize, dec: &DecodeTrace, k: usize) -> f64 {
        (self.truth[i][k - 1] - self.scaler.invert_value(0, dec.preds[k - 1])).abs()
    }
}

/// Decodes each listed sample under the current policy (training-mode
/// selection) with frozen `params`, and scores every step.
pub fn collect_trajectories(
    policy: &PolicyParams,
    params: &SeqParams,
    env: &PgEnv<'_>,
    indices: &[usize],
    cfg: &RewardConfig,
    rule: ActionRule,
    rng: &Rng,
) -> Result<Vec<Trajectory>, PolicyError> {
    cfg.validate()?;
    let h = env.horizon;
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let mut r = rng.split(i as u64);
        let mut agent = PolicyAgent::new(policy, cfg.epsilon, SelectMode::Train, rule);
        let dec = env.decode(params, i, &mut agent, Phase::Train, &mut r)?;
        let mut steps = Vec::with_capacity(h);
        for (k, (state, action, explored)) in agent.record.into_iter().enumerate() {
            let k = k + 1;
            let errors = env.pool_errors(i, &dec, k);
            let next = if k < h { Some(env.decoder_error(i, &dec, k + 1)) } else { None };
            let reward = step_reward(cfg, &errors, action, next)?;
            let log_prob = policy.log_prob(&state, action);
            steps.push(TrajectoryStep {
                state,
                action,
                log_prob,
                reward,
                explored,
            });
        }
        out.push(Trajectory { sample: i, steps });
    }
    Ok(out)
}
