use serde::{Deserialize, Serialize};

use super::{DataError, TimeSeries};

/// Sign of the linear term in `dx/dt = 0.2·x(t−τ)/(1+x(t−τ)^10) ∓ 0.1·x(t)`.
///
/// `Canonical` is the usual decaying form (−0.1). `Printed` (+0.1) grows
/// without bound and is kept only so that variant can be reproduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecaySign {
    Canonical,
    Printed,
}

impl DecaySign {
    fn coefficient(self) -> f64 {
        match self {
            DecaySign::Canonical => -0.1,
            DecaySign::Printed => 0.1,
        }
    }
}

impl std::str::FromStr for DecaySign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "canonical" | "minus" | "-" => Ok(DecaySign::Canonical),
            "printed" | "plus" | "+" => Ok(DecaySign::Printed),
            other => Err(format!("unknown decay sign `{other}` (expected canonical|printed)")),
        }
    }
}

impl std::fmt::Display for DecaySign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecaySign::Canonical => "canonical",
            DecaySign::Printed => "printed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MackeyGlassConfig {
    pub n: usize,
    pub delay: f64,
    pub history: f64,
    pub dt: f64,
    pub sample_every: f64,
    pub sign: DecaySign,
}

impl Default for MackeyGlassConfig {
    fn default() -> Self {
        MackeyGlassConfig {
            n: 7000,
            delay: 17.0,
            history: 1.2,
            dt: 0.1,
            sample_every: 1.0,
            sign: DecaySign::Canonical,
        }
    }
}

fn exact_ratio(num: f64, den: f64, what: &str) -> Result<usize, DataError> {
    let r = num / den;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-9 {
        return Err(DataError::Generator(format!(
            "dt = {den} must divide {what} = {num}"
        )));
    }
    Ok(k as usize)
}

/// Integrates the Mackey-Glass delay equation with classic RK4 on a fixed
/// grid, constant history for `t ≤ 0`, and returns `n` samples spaced
/// `sample_every` apart starting at `t = 0`.
///
/// Delayed values at half steps come from cubic Hermite interpolation of the
/// stored grid values and slopes, which keeps the scheme fourth order.
pub fn mackey_glass(cfg: &MackeyGlassConfig) -> Result<TimeSeries, DataError> {
    if !(cfg.dt > 0.0) || !cfg.history.is_finite() {
        return Err(DataError::Generator("dt must be positive".into()));
    }
    let lag = exact_ratio(cfg.delay, cfg.dt, "delay")?;
    let stride = exact_ratio(cfg.sample_every, cfg.dt, "sample_every")?;
    let decay = cfg.sign.coefficient();
    let rhs = |x: f64, xd: f64| 0.2 * xd / (1.0 + xd.powi(10)) + decay * x;

    let mut out = Vec::with_capacity(cfg.n);
    if cfg.n == 0 {
        return Ok(TimeSeries::univariate("mackey_glass", out));
    }
    let steps = (cfg.n - 1) * stride;
    let h = cfg.dt;
    let hist = cfg.history;

    // grid values x_j = x(j·dt) and slopes f_j, j >= 0
    let mut xs = Vec::with_capacity(steps + 1);
    let mut fs = Vec::with_capacity(steps + 1);
    let grid = |xs: &[f64], j: isize| if j < 0 { hist } else { xs[j as usize] };
    // value half a step after grid point j
    let half = |xs: &[f64], fs: &[f64], j: isize| {
        if j < 0 {
            hist
        } else {
            let (x0, x1) = (xs[j as usize], xs[j as usize + 1]);
            let (f0, f1) = (fs[j as usize], fs[j as usize + 1]);
            0.5 * (x0 + x1) + h * (f0 - f1) / 8.0
        }
    };

    xs.push(hist);
    fs.push(rhs(hist, hist));
    for j in 0..steps {
        let x = xs[j];
        let d0 = j as isize - lag as isize;
        let xd0 = grid(&xs, d0);
        let xdh = half(&xs, &fs, d0);
        let xd1 = grid(&xs, d0 + 1);
        let k1 = rhs(x, xd0);
        let k2 = rhs(x + 0.5 * h * k1, xdh);
        let k3 = rhs(x + 0.5 * h * k2, xdh);
        let k4 = rhs(x + h * k3, xd1);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(DataError::Divergence {
                t: (j + 1) as f64 * h,
                value: next,
            });
        }
        xs.push(next);
        let dn = j as isize + 1 - lag as isize;
        fs.push(rhs(next, grid(&xs, dn)));
    }
    out.extend((0..cfg.n).map(|i| xs[i * stride]));
    Ok(TimeSeries {
        name: "mackey_glass".into(),
        frequency: format!("{}", cfg.sample_every),
        values: out,
        exogenous: Vec::new(),
    })
}
