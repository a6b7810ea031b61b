use serde::{Deserialize, Serialize};

use super::{check_window, AuxError, Forecaster};
use crate::data::WindowedDataset;
use crate::numcore::{dot, Cholesky, Matrix, NumError, ParamBlock, Parameterized, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsvrConfig {
    /// Loss weight C.
    pub c: f64,
    /// Radius of the insensitive tube.
    pub epsilon: f64,
    /// RBF width in `exp(−γ‖x − x'‖²)`.
    pub gamma: f64,
    pub max_iter: usize,
    /// Relative objective change that counts as converged.
    pub tol: f64,
    /// Training windows beyond this count are thinned by an even stride.
    pub max_train: usize,
}

impl Default for MsvrConfig {
    fn default() -> Self {
        MsvrConfig {
            c: 10.0,
            epsilon: 0.01,
            gamma: 0.05,
            max_iter: 200,
            tol: 1e-6,
            max_train: 600,
        }
    }
}

/// Kernel expansion `f(x) = Σ_i β_i k(x_i, x) + b` with `β_i ∈ ℝ^H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsvrModel {
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Training inputs, one flattened window per row.
    pub inputs: Matrix,
    /// One coefficient row per training input; zero rows are in-tube samples.
    pub coef: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MsvrTrace {
    /// Primal objective after initialization and after every accepted step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Backtracking ran out without decreasing the objective.
    pub stalled: bool,
}

#[inline]
fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

fn kernel_matrix(x: &Matrix, gamma: f64) -> Matrix {
    let n = x.rows();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in 0..i {
            let v = rbf(x.row(i), x.row(j), gamma);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

fn residuals(y: &Matrix, kb: &Matrix, b: &[f64]) -> Matrix {
    let mut e = y.clone();
    for i in 0..e.rows() {
        for (j, v) in e.row_mut(i).iter_mut().enumerate() {
            *v -= kb.get(i, j) + b[j];
        }
    }
    e
}

/// IRWLS weights `a_i = 2C(u_i − ε)₊ / u_i` with `u_i = ‖e_i‖`.
fn weights(e: &Matrix, c: f64, eps: f64) -> Vec<f64> {
    (0..e.rows())
        .map(|i| {
            let u = dot(e.row(i), e.row(i)).sqrt();
            if u > eps {
                2.0 * c * (u - eps) / u
            } else {
                0.0
            }
        })
        .collect()
}

fn objective(beta: &Matrix, kb: &Matrix, e: &Matrix, c: f64, eps: f64) -> f64 {
    let reg = 0.5 * dot(beta.data(), kb.data());
    let loss: f64 = (0..e.rows())
        .map(|i| {
            let u = dot(e.row(i), e.row(i)).sqrt();
            let s = (u - eps).max(0.0);
            s * s
        })
        .sum();
    reg + c * loss
}

/// Weighted least-squares solution on the current support set:
/// `(K_SS + D_a⁻¹) β + 1 b = y`, `1ᵀβ = 0`, for each output.
fn irwls_candidate(k: &Matrix, y: &Matrix, a: &[f64], b: &[f64]) -> Result<(Matrix, Vec<f64>), NumError> {
    let (n, h) = y.shape();
    let sv: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
    let mut beta = Matrix::zeros(n, h);
    if sv.is_empty() {
        return Ok((beta, b.to_vec()));
    }
    let s = sv.len();
    let mut sys = Matrix::zeros(s, s);
    for (p, &i) in sv.iter().enumerate() {
        for (q, &j) in sv.iter().enumerate() {
            sys.set(p, q, k.get(i, j));
        }
        sys.set(p, p, sys.get(p, p) + 1.0 / a[i]);
    }
    let chol = Cholesky::factor(&sys)?;
    let w = chol.solve(&vec![1.0; s]);
    let wsum: f64 = w.iter().sum();
    let mut bias = vec![0.0; h];
    for j in 0..h {
        let ys: Vec<f64> = sv.iter().map(|&i| y.get(i, j)).collect();
        let z = chol.solve(&ys);
        let bj = z.iter().sum::<f64>() / wsum;
        bias[j] = bj;
        for (p, &i) in sv.iter().enumerate() {
            beta.set(i, j, z[p] - bj * w[p]);
        }
    }
    Ok((beta, bias))
}

/// `K β` using only the non-zero rows of `β`.
fn kernel_times(k: &Matrix, beta: &Matrix) -> Matrix {
    let (n, h) = beta.shape();
    let mut out = Matrix::zeros(n, h);
    for s in 0..n {
        let bs = beta.row(s);
        if bs.iter().all(|&v| v == 0.0) {
            continue;
        }
        for r in 0..n {
            let kv = k.get(r, s);
            for (o, &bv) in out.row_mut(r).iter_mut().zip(bs) {
                *o += kv * bv;
            }
        }
    }
    out
}

fn blend(old: &Matrix, new: &Matrix, eta: f64) -> Matrix {
    let mut out = old.clone();
    for (o, (a, b)) in out.data_mut().iter_mut().zip(old.data().iter().zip(new.data())) {
        *o = a + eta * (b - a);
    }
    out
}

fn validate(cfg: &MsvrConfig) -> Result<(), AuxError> {
    if !(cfg.c > 0.0) || !(cfg.gamma > 0.0) || !(cfg.epsilon >= 0.0) {
        return Err(AuxError::Config(format!(
            "MSVR needs C > 0, gamma > 0 and epsilon >= 0 (got C={}, gamma={}, epsilon={})",
            cfg.c, cfg.gamma, cfg.epsilon
        )));
    }
    Ok(())
}

/// Fits on raw `(x, y)` rows: `x` is `n × d`, `y` is `n × H`.
pub fn fit_msvr(x: &Matrix, y: &Matrix, cfg: &MsvrConfig) -> Result<(MsvrModel, MsvrTrace), AuxError> {
    validate(cfg)?;
    let (n, h) = y.shape();
    if n == 0 || x.rows() != n {
        return Err(AuxError::Empty);
    }
    let numeric = |source| AuxError::Numeric { model: "MSVR", source };
    let k = kernel_matrix(x, cfg.gamma);
    let mut beta = Matrix::zeros(n, h);
    let mut kb = Matrix::zeros(n, h);
    let mut b: Vec<f64> = (0..h)
        .map(|j| (0..n).map(|i| y.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut e = residuals(y, &kb, &b);
    let mut obj = objective(&beta, &kb, &e, cfg.c, cfg.epsilon);
    let mut trace = MsvrTrace {
        objective: vec![obj],
        ..MsvrTrace::default()
    };

    for it in 0..cfg.max_iter {
        trace.iterations = it + 1;
        let a = weights(&e, cfg.c, cfg.epsilon);
        let (beta_new, b_new) = irwls_candidate(&k, y, &a, &b).map_err(numeric)?;
        let kb_new = kernel_times(&k, &beta_new);

        let mut eta = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let bc = blend(&beta, &beta_new, eta);
            let kbc = blend(&kb, &kb_new, eta);
            let bias: Vec<f64> = b.iter().zip(&b_new).map(|(o, n)| o + eta * (n - o)).collect();
            let ec = residuals(y, &kbc, &bias);
            let oc = objective(&bc, &kbc, &ec, cfg.c, cfg.epsilon);
            if !oc.is_finite() {
                return Err(numeric(NumError::NonFinite {
                    context: format!("MSVR objective at iteration {}", it + 1),
                }));
            }
            if oc <= obj {
                accepted = Some((bc, kbc, bias, ec, oc));
                break;
            }
            eta *= 0.5;
        }
        let Some((bc, kbc, bias, ec, oc)) = accepted else {
            log::warn!("MSVR line search exhausted at iteration {}; keeping current iterate", it + 1);
            trace.stalled = true;
            break;
        };
        let decrease = obj - oc;
        beta = bc;
        kb = kbc;
        b = bias;
        e = ec;
        obj = oc;
        trace.objective.push(obj);
        if decrease <= cfg.tol * obj.abs().max(f64::MIN_POSITIVE) {
            trace.converged = true;
            break;
        }
    }
    Ok((
        MsvrModel {
            gamma: cfg.gamma,
            c: cfg.c,
            epsilon: cfg.epsilon,
            inputs: x.clone(),
            coef: beta,
            bias: b,
        },
        trace,
    ))
}

/// Thinned training rows `(x, y)` from windowed samples.
fn training_rows(train: &WindowedDataset, max_train: usize) -> (Matrix, Matrix) {
    let n = train.len();
    let keep = if max_train == 0 || n <= max_train { n } else { max_train };
    let idx: Vec<usize> = (0..keep).map(|j| j * n / keep).collect();
    let d = train.samples[0].flat_window().len();
    let mut x = Matrix::zeros(keep, d);
    let mut y = Matrix::zeros(keep, train.horizon);
    for (r, &i) in idx.iter().enumerate() {
        x.row_mut(r).copy_from_slice(train.samples[i].flat_window());
        y.row_mut(r).copy_from_slice(&train.samples[i].target);
    }
    (x, y)
}

pub fn train_msvr(train: &WindowedDataset, cfg: &MsvrConfig) -> Result<(MsvrModel, MsvrTrace), AuxError> {
    if train.is_empty() {
        return Err(AuxError::Empty);
    }
    let (x, y) = training_rows(train, cfg.max_train);
    fit_msvr(&x, &y, cfg)
}

impl MsvrModel {
    pub fn num_support(&self) -> usize {
        (0..self.coef.rows())
            .filter(|&i| self.coef.row(i).iter().any(|&v| v != 0.0))
            .count()
    }

    pub fn predict_flat(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for i in 0..self.coef.rows() {
            let row = self.coef.row(i);
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let kv = rbf(self.inputs.row(i), x, self.gamma);
            for (o, &c) in out.iter_mut().zip(row) {
                *o += kv * c;
            }
        }
        out
    }
}

impl Forecaster for MsvrModel {
    fn name(&self) -> &'static str {
        "MSVR"
    }

    fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    fn horizon(&self) -> usize {
        self.bias.len()
    }

    fn predict(&self, window: &Matrix) -> Result<Vec<f64>, AuxError> {
        check_window(self.input_dim(), window)?;
        Ok(self.predict_flat(window.data()))
    }
}

/// The primal objective as a differentiable function of `(β, b)`, used to
/// check the IRWLS step against the true gradient.
#[derive(Clone, Debug)]
pub struct MsvrPrimal {
    k: Matrix,
    y: Matrix,
    c: f64,
    epsilon: f64,
    pub beta: ParamBlock,
    pub bias: ParamBlock,
}

impl MsvrPrimal {
    pub fn new(x: &Matrix, y: &Matrix, cfg: &MsvrConfig, beta: Matrix, bias: Vec<f64>) -> Self {
        let h = bias.len();
        MsvrPrimal {
            k: kernel_matrix(x, cfg.gamma),
            y: y.clone(),
            c: cfg.c,
            epsilon: cfg.epsilon,
            beta: ParamBlock::new("beta", beta),
            bias: ParamBlock::new("bias", Matrix::from_vec(1, h, bias).expect("shape")),
        }
    }

    /// Random coefficients of scale `scale`.
    pub fn random(x: &Matrix, y: &Matrix, cfg: &MsvrConfig, scale: f64, rng: &mut Rng) -> Self {
        let (n, h) = y.shape();
        let beta = (0..n * h).map(|_| scale * rng.normal()).collect();
        let bias = (0..h).map(|_| scale * rng.normal()).collect();
        MsvrPrimal::new(x, y, cfg, Matrix::from_vec(n, h, beta).expect("shape"), bias)
    }

    fn state(&self) -> (Matrix, Matrix) {
        let kb = kernel_times(&self.k, &self.beta.value);
        let e = residuals(&self.y, &kb, self.bias.value.data());
        (kb, e)
    }

    pub fn objective(&self) -> f64 {
        let (kb, e) = self.state();
        objective(&self.beta.value, &kb, &e, self.c, self.epsilon)
    }

    /// Writes `∂/∂β = Kβ − K(a ⊙ E)` and `∂/∂b = −Σ_i a_i e_i` into the grads.
    pub fn compute_gradient(&mut self) -> f64 {
        let (kb, e) = self.state();
        let a = weights(&e, self.c, self.epsilon);
        let mut ae = e.clone();
        for (i, &ai) in a.iter().enumerate() {
            ae.row_mut(i).iter_mut().for_each(|v| *v *= ai);
        }
        let k_ae = kernel_times(&self.k, &ae);
        let (n, h) = kb.shape();
        for i in 0..n {
            for j in 0..h {
                self.beta.grad.set(i, j, kb.get(i, j) - k_ae.get(i, j));
            }
        }
        for j in 0..h {
            let s: f64 = (0..n).map(|i| ae.get(i, j)).sum();
            self.bias.grad.set(0, j, -s);
        }
        objective(&self.beta.value, &kb, &e, self.c, self.epsilon)
    }

    /// Full IRWLS step `(Δβ, Δb)` from the current point.
    pub fn irwls_direction(&self) -> Result<(Matrix, Vec<f64>), NumError> {
        let (_, e) = self.state();
        let a = weights(&e, self.c, self.epsilon);
        let (bn, bias) = irwls_candidate(&self.k, &self.y, &a, self.bias.value.data())?;
        let mut d = bn;
        d.add_assign_scaled(-1.0, &self.beta.value);
        let db = bias.iter().zip(self.bias.value.data()).map(|(n, o)| n - o).collect();
        Ok((d, db))
    }
}

impl Parameterized for MsvrPrimal {
    fn blocks(&self) -> Vec<&ParamBlock> {
        vec![&self.beta, &self.bias]
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        vec![&mut self.beta, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::grad_check;

    fn linear_data(n: usize, rng: &mut Rng) -> (Matrix, Matrix) {
        let mut x = Matrix::zeros(n, 2);
        let mut y = Matrix::zeros(n, 2);
        for i in 0..n {
            let (a, b) = (rng.uniform(), rng.uniform());
            x.row_mut(i).copy_from_slice(&[a, b]);
            y.row_mut(i).copy_from_slice(&[0.3 * a + 0.5 * b, 0.8 * a - 0.2 * b + 0.1]);
        }
        (x, y)
    }

    #[test]
    fn single_sample_is_interpolated() {
        let x = Matrix::from_rows(&[vec![0.2, 0.7]]);
        let y = Matrix::from_rows(&[vec![1.5, -0.5, 0.25]]);
        let cfg = MsvrConfig::default();
        let (m, _) = fit_msvr(&x, &y, &cfg).unwrap();
        let p = m.predict_flat(x.row(0));
        let err: f64 = p.iter().zip(y.row(0)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(err <= cfg.epsilon);
    }

    #[test]
    fn fits_noiseless_linear_data() {
        let mut rng = Rng::new(3);
        let (x, y) = linear_data(60, &mut rng);
        let cfg = MsvrConfig {
            c: 1000.0,
            epsilon: 0.01,
            gamma: 0.1,
            ..MsvrConfig::default()
        };
        let (m, trace) = fit_msvr(&x, &y, &cfg).unwrap();
        let mut sq = 0.0;
        for i in 0..60 {
            let p = m.predict_flat(x.row(i));
            sq += p.iter().zip(y.row(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        let rmse = (sq / 120.0).sqrt();
        assert!(rmse < cfg.epsilon + 1e-3, "rmse {rmse}, trace {trace:?}");
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let mut rng = Rng::new(5);
        let x = Matrix::from_vec(80, 3, (0..240).map(|_| rng.uniform()).collect()).unwrap();
        let y = Matrix::from_vec(80, 2, (0..160).map(|_| rng.normal()).collect()).unwrap();
        let (_, trace) = fit_msvr(&x, &y, &MsvrConfig::default()).unwrap();
        assert!(trace.objective.len() >= 2);
        for w in trace.objective.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn in_tube_rows_have_zero_coefficients() {
        let mut rng = Rng::new(8);
        let (x, y) = linear_data(40, &mut rng);
        let cfg = MsvrConfig {
            epsilon: 0.05,
            ..MsvrConfig::default()
        };
        let (m, _) = fit_msvr(&x, &y, &cfg).unwrap();
        assert!(m.num_support() < 40);
    }

    #[test]
    fn primal_gradient_matches_differences() {
        let mut rng = Rng::new(11);
        for trial in 0..3 {
            let x = Matrix::from_vec(12, 3, (0..36).map(|_| rng.uniform()).collect()).unwrap();
            let y = Matrix::from_vec(12, 2, (0..24).map(|_| rng.normal()).collect()).unwrap();
            let cfg = MsvrConfig {
                c: 2.0,
                epsilon: 0.1,
                gamma: 0.7,
                ..MsvrConfig::default()
            };
            let mut p = MsvrPrimal::random(&x, &y, &cfg, 0.3, &mut rng);
            p.compute_gradient();
            let rep = grad_check(&mut p, |m| m.objective(), 1e-6, 100, &mut rng).unwrap();
            assert!(rep.max_rel_err < 1e-4, "trial {trial}: {rep:?}");
        }
    }

    #[test]
    fn irwls_direction_is_a_descent_direction() {
        let mut rng = Rng::new(12);
        let x = Matrix::from_vec(15, 2, (0..30).map(|_| rng.uniform()).collect()).unwrap();
        let y = Matrix::from_vec(15, 3, (0..45).map(|_| rng.normal()).collect()).unwrap();
        let cfg = MsvrConfig::default();
        let mut p = MsvrPrimal::random(&x, &y, &cfg, 0.1, &mut rng);
        let f0 = p.compute_gradient();
        let (d, db) = p.irwls_direction().unwrap();
        let slope = dot(p.beta.grad.data(), d.data()) + dot(p.bias.grad.data(), &db);
        assert!(slope < 0.0);
        let mut q = p.clone();
        q.beta.value.add_assign_scaled(1e-3, &d);
        for (v, dv) in q.bias.value.data_mut().iter_mut().zip(&db) {
            *v += 1e-3 * dv;
        }
        assert!(q.objective() < f0);
    }

    #[test]
    fn smaller_c_shrinks_prediction_variance() {
        let mut rng = Rng::new(21);
        let x = Matrix::from_vec(50, 2, (0..100).map(|_| rng.uniform()).collect()).unwrap();
        let y = Matrix::from_vec(50, 1, (0..50).map(|i| (x.get(i, 0) * 6.0).sin()).collect()).unwrap();
        let variance = |c: f64| {
            let cfg = MsvrConfig {
                c,
                gamma: 2.0,
                ..MsvrConfig::default()
            };
            let (m, _) = fit_msvr(&x, &y, &cfg).unwrap();
            let p: Vec<f64> = (0..50).map(|i| m.predict_flat(x.row(i))[0]).collect();
            let mean = p.iter().sum::<f64>() / 50.0;
            p.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 50.0
        };
        let vs: Vec<f64> = [10.0, 0.1, 0.001].iter().map(|&c| variance(c)).collect();
        assert!(vs[0] > vs[1] && vs[1] > vs[2], "{vs:?}");
    }

    #[test]
    fn rejects_bad_settings_and_windows() {
        let x = Matrix::from_rows(&[vec![0.0]]);
        let y = Matrix::from_rows(&[vec![1.0]]);
        let bad = MsvrConfig {
            c: 0.0,
            ..MsvrConfig::default()
        };
        assert!(matches!(fit_msvr(&x, &y, &bad), Err(AuxError::Config(_))));
        let (m, _) = fit_msvr(&x, &y, &MsvrConfig::default()).unwrap();
        let w = Matrix::zeros(2, 1);
        assert!(matches!(m.predict(&w), Err(AuxError::Dimension { .. })));
    }
}
