use serde::{Deserialize, Serialize};

use super::{check_window, AuxError, Forecaster};
use crate::data::WindowedDataset;
use crate::numcore::{logistic, Adam, Direction, Matrix, ParamBlock, Parameterized, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => logistic(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" | "logistic" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation `{other}` (expected sigmoid|tanh)")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: usize,
    pub activation: Activation,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 32,
            activation: Activation::Tanh,
            lr: 0.005,
            epochs: 200,
            patience: 20,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// One hidden layer mapping a flattened window straight to all `H` outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectMlp {
    pub activation: Activation,
    pub w1: ParamBlock,
    pub b1: ParamBlock,
    pub w2: ParamBlock,
    pub b2: ParamBlock,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MlpTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

impl DirectMlp {
    pub fn new(input_dim: usize, hidden: usize, horizon: usize, activation: Activation, rng: &mut Rng) -> Self {
        DirectMlp {
            activation,
            w1: ParamBlock::fan_in_uniform("mlp.w1", hidden, input_dim, rng),
            b1: ParamBlock::zeros("mlp.b1", hidden, 1),
            w2: ParamBlock::fan_in_uniform("mlp.w2", horizon, hidden, rng),
            b2: ParamBlock::zeros("mlp.b2", horizon, 1),
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut h = vec![0.0; self.w1.value.rows()];
        self.w1.value.matvec_into(x, &mut h);
        for (v, b) in h.iter_mut().zip(self.b1.value.data()) {
            *v = self.activation.apply(*v + b);
        }
        let mut o = vec![0.0; self.w2.value.rows()];
        self.w2.value.matvec_into(&h, &mut o);
        for (v, b) in o.iter_mut().zip(self.b2.value.data()) {
            *v += b;
        }
        (h, o)
    }

    pub fn predict_flat(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).1
    }

    /// `(1/H) Σ_k (o_k − y_k)²` for one sample.
    pub fn sample_loss(&self, x: &[f64], y: &[f64]) -> f64 {
        let o = self.predict_flat(x);
        o.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
    }

    /// Adds `scale · ∇ sample_loss` to the grads and returns the loss.
    fn accumulate(&mut self, x: &[f64], y: &[f64], scale: f64) -> f64 {
        let (h, o) = self.forward(x);
        let hz = y.len() as f64;
        let d_out: Vec<f64> = o.iter().zip(y).map(|(a, b)| scale * 2.0 * (a - b) / hz).collect();
        self.w2.grad.add_outer(1.0, &d_out, &h);
        for (g, d) in self.b2.grad.data_mut().iter_mut().zip(&d_out) {
            *g += d;
        }
        let mut d_h = vec![0.0; h.len()];
        self.w2.value.matvec_t_acc(&d_out, &mut d_h);
        for (d, &hv) in d_h.iter_mut().zip(&h) {
            *d *= self.activation.slope(hv);
        }
        self.w1.grad.add_outer(1.0, &d_h, x);
        for (g, d) in self.b1.grad.data_mut().iter_mut().zip(&d_h) {
            *g += d;
        }
        o.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / hz
    }

    /// Mean loss over the rows and its gradient (grads are reset first).
    pub fn loss_and_grad(&mut self, xs: &[&[f64]], ys: &[&[f64]]) -> f64 {
        self.zero_grad();
        let scale = 1.0 / xs.len() as f64;
        xs.iter().zip(ys).map(|(x, y)| self.accumulate(x, y, scale)).sum::<f64>() * scale
    }

    pub fn mean_loss(&self, data: &WindowedDataset) -> f64 {
        data.samples
            .iter()
            .map(|s| self.sample_loss(s.flat_window(), &s.target))
            .sum::<f64>()
            / data.len() as f64
    }
}

impl Parameterized for DirectMlp {
    fn blocks(&self) -> Vec<&ParamBlock> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl Forecaster for DirectMlp {
    fn name(&self) -> &'static str {
        "MLP"
    }

    fn input_dim(&self) -> usize {
        self.w1.value.cols()
    }

    fn horizon(&self) -> usize {
        self.w2.value.rows()
    }

    fn predict(&self, window: &Matrix) -> Result<Vec<f64>, AuxError> {
        check_window(self.input_dim(), window)?;
        Ok(self.predict_flat(window.data()))
    }
}

/// Mini-batch Adam on the mean squared error with validation early stopping;
/// returns the parameters of the best validation epoch.
pub fn train_direct_mlp(
    train: &WindowedDataset,
    val: &WindowedDataset,
    cfg: &MlpConfig,
) -> Result<(DirectMlp, MlpTrace), AuxError> {
    if train.is_empty() || val.is_empty() {
        return Err(AuxError::Empty);
    }
    if cfg.hidden == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(AuxError::Config(format!(
            "MLP needs hidden >= 1, batch_size >= 1 and lr > 0 (got {}, {}, {})",
            cfg.hidden, cfg.batch_size, cfg.lr
        )));
    }
    let mut rng = Rng::new(cfg.seed).split(0x4d4c50);
    let d = train.samples[0].flat_window().len();
    let mut model = DirectMlp::new(d, cfg.hidden, train.horizon, cfg.activation, &mut rng);
    let mut adam = Adam::default();
    let mut best = model.clone();
    let mut best_val = model.mean_loss(val);
    let mut trace = MlpTrace::default();
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        let order = rng.permutation(train.len());
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| train.samples[i].flat_window()).collect();
            let ys: Vec<&[f64]> = chunk.iter().map(|&i| train.samples[i].target.as_slice()).collect();
            let loss = model.loss_and_grad(&xs, &ys);
            if !loss.is_finite() {
                return Err(AuxError::Divergence {
                    model: "MLP",
                    epoch,
                    loss,
                });
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut model.blocks_mut(), cfg.lr, Direction::Descent)
                .map_err(|source| AuxError::Numeric { model: "MLP", source })?;
        }
        let val_loss = model.mean_loss(val);
        trace.train_loss.push(total / train.len() as f64);
        trace.val_loss.push(val_loss);
        trace.epochs_run = epoch;
        if !val_loss.is_finite() {
            return Err(AuxError::Divergence {
                model: "MLP",
                epoch,
                loss: val_loss,
            });
        }
        if val_loss < best_val {
            best_val = val_loss;
            best = model.clone();
            trace.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, trace))
}
