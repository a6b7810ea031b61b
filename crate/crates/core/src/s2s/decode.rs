use serde::{Deserialize, Serialize};

use super::{CellKind, S2sError, SeqParams, StepCache};
use crate::numcore::{dot, Matrix, Rng};

/// How decoder input `k+1` is chosen once step `k` has been emitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regime {
    FreeRunning,
    TeacherForcing,
    /// Truth with probability `p`, otherwise the decoder's own output.
    ScheduledSampling { p: f64 },
    /// A selector picks a pool slot every step.
    PolicyGradient,
    /// Always the given auxiliary model.
    Teach { model: usize },
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::FreeRunning => "FR",
            Regime::TeacherForcing => "TF",
            Regime::ScheduledSampling { .. } => "SS",
            Regime::PolicyGradient => "PG",
            Regime::Teach { .. } => "Teach",
        }
    }
}

/// Training decodes may read the truth; evaluation never does, so TF and SS
/// fall back to free running there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Where a decoder input came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Truth,
    Decoder,
    Aux(usize),
    /// Supplied verbatim to [`decode_with_inputs`].
    Replay,
}

/// Chooses the pool slot feeding the next decoder input from the state
/// `s_k`. Slots `0..n_aux` are auxiliary models, slot `n_aux` is the decoder.
pub trait InputSelector {
    fn select(&mut self, k: usize, state: &[f64], rng: &mut Rng) -> usize;
}

/// Always the same slot.
#[derive(Clone, Copy, Debug)]
pub struct ConstantSelector(pub usize);

impl InputSelector for ConstantSelector {
    fn select(&mut self, _k: usize, _state: &[f64], _rng: &mut Rng) -> usize {
        self.0
    }
}

/// Plays back a fixed action list, action `k` at step `k`.
#[derive(Clone, Debug)]
pub struct ScriptedSelector(pub Vec<usize>);

impl InputSelector for ScriptedSelector {
    fn select(&mut self, k: usize, _state: &[f64], _rng: &mut Rng) -> usize {
        self.0[(k - 1) % self.0.len()]
    }
}

/// Per-sample decoding inputs. `truth` and `aux` are in the normalized
/// space; `aux[a][k−1]` is model `a`'s prediction of `y_{t+k}`.
pub struct Feed<'a> {
    pub regime: Regime,
    pub phase: Phase,
    pub truth: Option<&'a [f64]>,
    pub aux: Option<&'a [Vec<f64>]>,
    pub selector: Option<&'a mut dyn InputSelector>,
}

impl<'a> Feed<'a> {
    pub fn new(regime: Regime, phase: Phase) -> Self {
        Feed {
            regime,
            phase,
            truth: None,
            aux: None,
            selector: None,
        }
    }

    pub fn truth(mut self, truth: &'a [f64]) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn aux(mut self, aux: &'a [Vec<f64>]) -> Self {
        self.aux = Some(aux);
        self
    }

    pub fn selector(mut self, selector: &'a mut dyn InputSelector) -> Self {
        self.selector = Some(selector);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderTrace {
    pub steps: Vec<StepCache>,
}

impl EncoderTrace {
    /// Context vector, the last encoder hidden state `h_L`.
    pub fn context(&self) -> &[f64] {
        &self.steps.last().expect("non-empty window").h
    }

    /// Final memory cell (empty for cells without one).
    pub fn final_cell(&self) -> &[f64] {
        &self.steps.last().expect("non-empty window").c
    }

    /// Keeps only the final step: enough to decode, not to backpropagate.
    pub fn summary(&self) -> EncoderTrace {
        EncoderTrace {
            steps: self.steps.last().cloned().into_iter().collect(),
        }
    }
}

/// Decoder state between steps: hidden `s_k`, cell `c_k` (LSTM), the
/// context and the number of steps taken.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeState {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
    pub context: Vec<f64>,
    pub k: usize,
}

impl DecodeState {
    /// `s_0 = h_L`, `c_0 = c_L`.
    pub fn initial(enc: &EncoderTrace) -> Self {
        DecodeState {
            s: enc.context().to_vec(),
            c: enc.final_cell().to_vec(),
            context: enc.context().to_vec(),
            k: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeTrace {
    /// `ŷ_{t+1..t+H}` in the normalized space.
    pub preds: Vec<f64>,
    /// Value fed at each step; `inputs[0] = y_t`.
    pub inputs: Vec<f64>,
    pub sources: Vec<Source>,
    /// Policy choices after each step (policy regime only, length `H`).
    pub actions: Vec<usize>,
    pub caches: Vec<StepCache>,
}

impl DecodeTrace {
    /// Decoder state `s_k`, `k` 1-based.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.caches[k - 1].h
    }

    pub fn horizon(&self) -> usize {
        self.preds.len()
    }
}

fn finite(v: &[f64], what: impl FnOnce() -> String) -> Result<(), S2sError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(S2sError::NonFinite(what()))
    }
}

/// Runs the encoder over the `L × m` window from a zero state.
pub fn encode(params: &SeqParams, window: &Matrix) -> Result<EncoderTrace, S2sError> {
    if window.cols() != params.channels || window.rows() == 0 {
        return Err(S2sError::Shape(format!(
            "window is {}×{}, encoder expects L×{} with L ≥ 1",
            window.rows(),
            window.cols(),
            params.channels
        )));
    }
    let n = params.enc.hidden;
    let mut h = vec![0.0; n];
    let mut c = if params.kind == CellKind::Lstm { vec![0.0; n] } else { Vec::new() };
    let mut steps = Vec::with_capacity(window.rows());
    for j in 0..window.rows() {
        let cache = params.enc.step(&h, &c, window.row(j));
        finite(&cache.h, || format!("encoder state at step {}", j + 1))?;
        h.clone_from(&cache.h);
        c.clone_from(&cache.c);
        steps.push(cache);
    }
    Ok(EncoderTrace { steps })
}

fn dec_step(params: &SeqParams, s: &[f64], c: &[f64], context: &[f64], input: f64) -> (StepCache, f64) {
    let mut x = Vec::with_capacity(1 + context.len());
    x.push(input);
    x.extend_from_slice(context);
    let cache = params.dec.step(s, c, &x);
    let y = dot(params.v.value.data(), &cache.h) + params.bv.value.data()[0];
    (cache, y)
}

/// One decoder step: gate input `[s_{k−1}, input, context]`, output
/// `ŷ = V s_k + b`.
pub fn decode_step(params: &SeqParams, state: &DecodeState, input: f64) -> Result<(DecodeState, f64), S2sError> {
    let (cache, y) = dec_step(params, &state.s, &state.c, &state.context, input);
    finite(&cache.h, || format!("decoder state at step {}", state.k + 1))?;
    if !y.is_finite() {
        return Err(S2sError::NonFinite(format!("decoder output at step {}", state.k + 1)));
    }
    Ok((
        DecodeState {
            s: cache.h,
            c: cache.c,
            context: state.context.clone(),
            k: state.k + 1,
        },
        y,
    ))
}

/// Decodes `horizon` steps starting from `y_t = first_input`, choosing each
/// following input according to the feed's regime.
pub fn decode_sequence(
    params: &SeqParams,
    enc: &EncoderTrace,
    first_input: f64,
    horizon: usize,
    mut feed: Feed<'_>,
    rng: &mut Rng,
) -> Result<DecodeTrace, S2sError> {
    let regime = match (feed.regime, feed.phase) {
        (Regime::TeacherForcing | Regime::ScheduledSampling { .. }, Phase::Eval) => Regime::FreeRunning,
        (r, _) => r,
    };
    let truth = match regime {
        Regime::TeacherForcing | Regime::ScheduledSampling { .. } => {
            let t = feed.truth.ok_or(S2sError::MissingTruth(regime.label()))?;
            if t.len() < horizon {
                return Err(S2sError::Shape(format!("{} targets for horizon {horizon}", t.len())));
            }
            t
        }
        _ => &[],
    };
    let aux = match regime {
        Regime::PolicyGradient | Regime::Teach { .. } => {
            let a = feed.aux.ok_or(S2sError::MissingAux(regime.label()))?;
            if a.iter().any(|row| row.len() < horizon) {
                return Err(S2sError::Shape(format!("auxiliary forecasts shorter than horizon {horizon}")));
            }
            a
        }
        _ => &[],
    };
    if let Regime::Teach { model } = regime {
        if model >= aux.len() {
            return Err(S2sError::BadAction {
                action: model,
                pool: aux.len(),
            });
        }
    }
    if regime == Regime::PolicyGradient && feed.selector.is_none() {
        return Err(S2sError::MissingSelector);
    }

    let mut trace = DecodeTrace {
        preds: Vec::with_capacity(horizon),
        inputs: Vec::with_capacity(horizon),
        sources: Vec::with_capacity(horizon),
        actions: Vec::new(),
        caches: Vec::with_capacity(horizon),
    };
    let context = enc.context();
    let mut s = context.to_vec();
    let mut c = enc.final_cell().to_vec();
    let mut input = first_input;
    let mut source = Source::Truth;
    for k in 1..=horizon {
        let (cache, y) = dec_step(params, &s, &c, context, input);
        finite(&cache.h, || format!("decoder state at step {k}"))?;
        if !y.is_finite() {
            return Err(S2sError::NonFinite(format!("decoder output at step {k}")));
        }
        s.clone_from(&cache.h);
        c.clone_from(&cache.c);
        trace.preds.push(y);
        trace.inputs.push(input);
        trace.sources.push(source);
        trace.caches.push(cache);

        let next = match regime {
            _ if k == horizon && regime != Regime::PolicyGradient => None,
            Regime::FreeRunning => Some((y, Source::Decoder)),
            Regime::TeacherForcing => Some((truth[k - 1], Source::Truth)),
            Regime::ScheduledSampling { p } => {
                if rng.uniform() < p {
                    Some((truth[k - 1], Source::Truth))
                } else {
                    Some((y, Source::Decoder))
                }
            }
            Regime::PolicyGradient => {
                let sel = feed.selector.as_deref_mut().expect("checked above");
                let a = sel.select(k, &s, rng);
                trace.actions.push(a);
                if a == aux.len() {
                    Some((y, Source::Decoder))
                } else if a < aux.len() {
                    Some((aux[a][k - 1], Source::Aux(a)))
                } else {
                    return Err(S2sError::BadAction {
                        action: a,
                        pool: aux.len() + 1,
                    });
                }
            }
            Regime::Teach { model } => Some((aux[model][k - 1], Source::Aux(model))),
        };
        if let (Some((v, src)), true) = (next, k < horizon) {
            input = v;
            source = src;
        }
    }
    Ok(trace)
}

/// Decodes with a fixed input sequence, `inputs[k−1]` fed at step `k`.
pub fn decode_with_inputs(params: &SeqParams, enc: &EncoderTrace, inputs: &[f64]) -> Result<DecodeTrace, S2sError> {
    let mut trace = DecodeTrace {
        preds: Vec::new(),
        inputs: inputs.to_vec(),
        sources: Vec::new(),
        actions: Vec::new(),
        caches: Vec::new(),
    };
    let context = enc.context();
    let mut s = context.to_vec();
    let mut c = enc.final_cell().to_vec();
    for (k, &input) in inputs.iter().enumerate() {
        let (cache, y) = dec_step(params, &s, &c, context, input);
        finite(&cache.h, || format!("decoder state at step {}", k + 1))?;
        s.clone_from(&cache.h);
        c.clone_from(&cache.c);
        trace.preds.push(y);
        trace.sources.push(if k == 0 { Source::Truth } else { Source::Replay });
        trace.caches.push(cache);
    }
    Ok(trace)
}

/// Encodes the window and decodes from its last observed target value.
pub fn forward(
    params: &SeqParams,
    window: &Matrix,
    horizon: usize,
    feed: Feed<'_>,
    rng: &mut Rng,
) -> Result<(EncoderTrace, DecodeTrace), S2sError> {
    let enc = encode(params, window)?;
    let y_t = window.get(window.rows() - 1, 0);
    let dec = decode_sequence(params, &enc, y_t, horizon, feed, rng)?;
    Ok((enc, dec))
}

/// Free-running forecast of `horizon` steps.
pub fn predict(params: &SeqParams, window: &Matrix, horizon: usize) -> Result<Vec<f64>, S2sError> {
    let mut rng = Rng::new(0);
    let (_, dec) = forward(params, window, horizon, Feed::new(Regime::FreeRunning, Phase::Eval), &mut rng)?;
    Ok(dec.preds)
}

/// `(1/H) Σ_k (ŷ_k − y_k)²`.
pub fn sequence_loss(preds: &[f64], target: &[f64]) -> f64 {
    preds.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / preds.len() as f64
}

/// Adds `scale · ∇ sequence_loss` to every parameter gradient and returns the
/// unscaled loss. Fed inputs are constants: nothing flows back through them.
pub fn bptt(
    params: &mut SeqParams,
    enc: &EncoderTrace,
    dec: &DecodeTrace,
    target: &[f64],
    scale: f64,
) -> Result<f64, S2sError> {
    let h = dec.preds.len();
    if target.len() < h {
        return Err(S2sError::Shape(format!("{} targets for {h} predictions", target.len())));
    }
    let loss = sequence_loss(&dec.preds, &target[..h]);
    if !loss.is_finite() {
        return Err(S2sError::NonFinite("sequence loss".into()));
    }
    let nd = params.dec.hidden;
    let lstm = params.kind == CellKind::Lstm;
    let mut ds = vec![0.0; nd];
    let mut dc = if lstm { vec![0.0; nd] } else { Vec::new() };
    let mut dctx = vec![0.0; params.enc.hidden];
    for k in (0..h).rev() {
        let g = scale * 2.0 * (dec.preds[k] - target[k]) / h as f64;
        let cache = &dec.caches[k];
        params.v.grad.add_outer(g, &[1.0], &cache.h);
        params.bv.grad.data_mut()[0] += g;
        for (d, v) in ds.iter_mut().zip(params.v.value.data()) {
            *d += g * v;
        }
        let (dsp, dcp, dx) = params.dec.backward(cache, &ds, &dc);
        for (a, b) in dctx.iter_mut().zip(&dx[1..]) {
            *a += b;
        }
        ds = dsp;
        dc = dcp;
    }
    // s_0 and the context are both h_L
    let mut dh: Vec<f64> = ds.iter().zip(&dctx).map(|(a, b)| a + b).collect();
    let mut dcell = dc;
    for cache in enc.steps.iter().rev() {
        let (a, b, _) = params.enc.backward(cache, &dh, &dcell);
        dh = a;
        dcell = b;
    }
    Ok(loss)
}
