use serde::{Deserialize, Serialize};

use super::{NumError, ParamBlock};

/// Sign convention for an update: minimize (RNNs) or maximize (policy).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Descent,
    Ascent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Descent => -1.0,
            Direction::Ascent => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

fn check_grads(params: &[&mut ParamBlock]) -> Result<(), NumError> {
    for p in params {
        if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
            return Err(NumError::NonFinite {
                context: format!("gradient of {} at flat index {i}", p.name),
            });
        }
    }
    Ok(())
}

/// Plain gradient step: `value ± lr * grad`.
pub fn sgd_step(params: &mut [&mut ParamBlock], lr: f64, dir: Direction) -> Result<(), NumError> {
    check_grads(params)?;
    let s = dir.sign() * lr;
    for p in params.iter_mut() {
        let ParamBlock { value, grad, .. } = &mut **p;
        super::axpy(s, grad.data(), value.data_mut());
    }
    Ok(())
}

/// Adam with bias correction. Moment buffers are keyed by block position,
/// so the same block order must be passed on every call.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut ParamBlock], lr: f64, dir: Direction) -> Result<(), NumError> {
        check_grads(params)?;
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(NumError::Dimension {
                op: "adam_step",
                left: (self.m.len(), 1),
                right: (params.len(), 1),
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let s = dir.sign() * lr;
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let ParamBlock { value, grad, .. } = &mut **p;
            for (((w, &g), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w += s * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Runtime-selected optimizer.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Sgd,
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(Adam::default()),
        }
    }

    pub fn step(&mut self, params: &mut [&mut ParamBlock], lr: f64, dir: Direction) -> Result<(), NumError> {
        match self {
            Optimizer::Sgd => sgd_step(params, lr, dir),
            Optimizer::Adam(a) => a.step(params, lr, dir),
        }
    }
}
