use super::{scaled_aux, RegimeSpec, TrainError};
use crate::auxmodels::ForecastCube;
use crate::data::{ScalerParams, WindowedDataset};
use crate::metrics::MetricReport;
use crate::numcore::Rng;
use crate::rlpolicy::{ActionRule, PolicyAgent, PolicyParams, SelectMode};
use crate::s2s::{forward, Feed, Phase, Source};

/// Test-time forecasts of one split, de-normalized, with their metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    pub truth: Vec<Vec<f64>>,
    pub preds: Vec<Vec<f64>>,
    /// Policy choices per sample (policy regime only).
    pub actions: Vec<Vec<usize>>,
    pub sources: Vec<Vec<Source>>,
}

/// Decodes every sample in evaluation mode: no ground truth is fed, the
/// policy (if any) takes its argmax, `Teach_*` feeds the cube's model.
pub fn evaluate(
    seq: &crate::s2s::SeqParams,
    regime: RegimeSpec,
    policy: Option<&PolicyParams>,
    data: &WindowedDataset,
    cube: Option<&ForecastCube>,
    scaler: &ScalerParams,
) -> Result<Evaluation, TrainError> {
    let aux = match (regime.needs_pool(), cube) {
        (true, Some(c)) => scaled_aux(c, scaler),
        (true, None) => return Err(TrainError::MissingPool(regime)),
        _ => Vec::new(),
    };
    let policy = match (regime, policy) {
        (RegimeSpec::Pg, Some(p)) => Some(p),
        (RegimeSpec::Pg, None) => {
            return Err(TrainError::Config {
                key: "train.regime".into(),
                message: "evaluating PG requires a policy".into(),
            })
        }
        _ => None,
    };
    let mut rng = Rng::new(0);
    let mut out = Evaluation {
        report: MetricReport::default(),
        truth: Vec::with_capacity(data.len()),
        preds: Vec::with_capacity(data.len()),
        actions: Vec::new(),
        sources: Vec::with_capacity(data.len()),
    };
    for (i, s) in data.samples.iter().enumerate() {
        let mut agent = policy.map(|p| PolicyAgent::new(p, 0.0, SelectMode::Eval, ActionRule::Greedy));
        let mut feed = Feed::new(regime.decoding(0.0), Phase::Eval);
        if regime.needs_pool() {
            feed = feed.aux(&aux[i]);
        }
        if let Some(a) = agent.as_mut() {
            feed = feed.selector(a);
        }
        let (_, dec) = forward(seq, &s.window, data.horizon, feed, &mut rng)?;
        out.truth.push(scaler.invert(0, &s.target));
        out.preds.push(scaler.invert(0, &dec.preds));
        if policy.is_some() {
            out.actions.push(dec.actions);
        }
        out.sources.push(dec.sources);
    }
    out.report = MetricReport::evaluate(&out.truth, &out.preds)?;
    Ok(out)
}

/// Share of samples (in percent) choosing each slot at each step,
/// `out[k][a]` for step `k+1`.
pub fn selection_percentages(actions: &[Vec<usize>], n_actions: usize, horizon: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0usize; n_actions]; horizon];
    for row in actions {
        for (k, &a) in row.iter().enumerate().take(horizon) {
            if a < n_actions {
                counts[k][a] += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|c| {
            let total: usize = c.iter().sum();
            c.into_iter()
                .map(|n| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 })
                .collect()
        })
        .collect()
}
