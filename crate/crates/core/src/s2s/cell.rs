use serde::{Deserialize, Serialize};

use crate::numcore::{logistic, ParamBlock, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Ernn,
    Gru,
}

impl CellKind {
    /// Gate names, in block order.
    pub fn gates(self) -> &'static [&'static str] {
        match self {
            CellKind::Lstm => &["f", "i", "c", "o"],
            CellKind::Ernn => &["h"],
            CellKind::Gru => &["r", "u", "n"],
        }
    }

    pub fn code(self) -> u8 {
        match self {
            CellKind::Lstm => 0,
            CellKind::Ernn => 1,
            CellKind::Gru => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<CellKind> {
        match code {
            0 => Some(CellKind::Lstm),
            1 => Some(CellKind::Ernn),
            2 => Some(CellKind::Gru),
            _ => None,
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "ernn" | "rnn" | "elman" => Ok(CellKind::Ernn),
            "gru" => Ok(CellKind::Gru),
            other => Err(format!("unknown cell kind `{other}` (expected lstm|ernn|gru)")),
        }
    }
}

impl std::fmt::Display for CellKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CellKind::Lstm => "lstm",
            CellKind::Ernn => "ernn",
            CellKind::Gru => "gru",
        })
    }
}

/// Weights of one recurrent cell. Each gate `g` owns `U_g ∈ ℝ^{N×(N+in)}`
/// acting on `[h_prev, x]` and a bias `b_g ∈ ℝ^N`; blocks are stored as
/// `U_g, b_g` pairs in gate order.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams {
    pub kind: CellKind,
    pub hidden: usize,
    pub input: usize,
    pub blocks: Vec<ParamBlock>,
}

/// Everything one forward step needs to be differentiated later.
#[derive(Clone, Debug, PartialEq)]
pub struct StepCache {
    /// `[h_prev, x]`.
    pub z: Vec<f64>,
    /// Activated gate values in gate order.
    pub gates: Vec<Vec<f64>>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub h: Vec<f64>,
    /// Cell state (LSTM); empty otherwise.
    pub c: Vec<f64>,
    /// `tanh(c)` for LSTM, `[r ⊙ h_prev, x]` for GRU.
    pub aux: Vec<f64>,
}

impl CellParams {
    pub fn new(kind: CellKind, hidden: usize, input: usize, prefix: &str, rng: &mut Rng) -> Self {
        let mut blocks = Vec::new();
        for g in kind.gates() {
            blocks.push(ParamBlock::fan_in_uniform(format!("{prefix}.U_{g}"), hidden, hidden + input, rng));
            let mut b = ParamBlock::zeros(format!("{prefix}.b_{g}"), hidden, 1);
            if kind == CellKind::Lstm && *g == "f" {
                b.value.fill(1.0);
            }
            blocks.push(b);
        }
        CellParams {
            kind,
            hidden,
            input,
            blocks,
        }
    }

    pub fn zeros(kind: CellKind, hidden: usize, input: usize, prefix: &str) -> Self {
        let mut blocks = Vec::new();
        for g in kind.gates() {
            blocks.push(ParamBlock::zeros(format!("{prefix}.U_{g}"), hidden, hidden + input));
            blocks.push(ParamBlock::zeros(format!("{prefix}.b_{g}"), hidden, 1));
        }
        CellParams {
            kind,
            hidden,
            input,
            blocks,
        }
    }

    #[inline]
    fn u(&self, g: usize) -> &ParamBlock {
        &self.blocks[2 * g]
    }

    #[inline]
    fn b(&self, g: usize) -> &ParamBlock {
        &self.blocks[2 * g + 1]
    }

    fn pre(&self, g: usize, z: &[f64]) -> Vec<f64> {
        let mut a = self.b(g).value.data().to_vec();
        let u = &self.u(g).value;
        for (r, out) in a.iter_mut().enumerate() {
            *out += crate::numcore::dot(u.row(r), z);
        }
        a
    }

    /// One step from `(h_prev, c_prev)` on input `x`. `c_prev` is ignored
    /// (and may be empty) for cells without a memory cell.
    pub fn step(&self, h_prev: &[f64], c_prev: &[f64], x: &[f64]) -> StepCache {
        let n = self.hidden;
        let mut z = Vec::with_capacity(n + x.len());
        z.extend_from_slice(h_prev);
        z.extend_from_slice(x);
        match self.kind {
            CellKind::Lstm => {
                let f: Vec<f64> = self.pre(0, &z).into_iter().map(logistic).collect();
                let i: Vec<f64> = self.pre(1, &z).into_iter().map(logistic).collect();
                let g: Vec<f64> = self.pre(2, &z).into_iter().map(f64::tanh).collect();
                let o: Vec<f64> = self.pre(3, &z).into_iter().map(logistic).collect();
                let c: Vec<f64> = (0..n).map(|r| f[r] * c_prev[r] + i[r] * g[r]).collect();
                let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                let h: Vec<f64> = (0..n).map(|r| o[r] * tc[r]).collect();
                StepCache {
                    z,
                    gates: vec![f, i, g, o],
                    h_prev: h_prev.to_vec(),
                    c_prev: c_prev.to_vec(),
                    h,
                    c,
                    aux: tc,
                }
            }
            CellKind::Ernn => {
                let h: Vec<f64> = self.pre(0, &z).into_iter().map(f64::tanh).collect();
                StepCache {
                    z,
                    gates: vec![h.clone()],
                    h_prev: h_prev.to_vec(),
                    c_prev: Vec::new(),
                    h,
                    c: Vec::new(),
                    aux: Vec::new(),
                }
            }
            CellKind::Gru => {
                let r: Vec<f64> = self.pre(0, &z).into_iter().map(logistic).collect();
                let u: Vec<f64> = self.pre(1, &z).into_iter().map(logistic).collect();
                let mut z2 = Vec::with_capacity(z.len());
                z2.extend((0..n).map(|k| r[k] * h_prev[k]));
                z2.extend_from_slice(x);
                let cand: Vec<f64> = self.pre(2, &z2).into_iter().map(f64::tanh).collect();
                let h: Vec<f64> = (0..n).map(|k| (1.0 - u[k]) * h_prev[k] + u[k] * cand[k]).collect();
                StepCache {
                    z,
                    gates: vec![r, u, cand],
                    h_prev: h_prev.to_vec(),
                    c_prev: Vec::new(),
                    h,
                    c: Vec::new(),
                    aux: z2,
                }
            }
        }
    }

    /// `dU_g += a zᵀ`, `db_g += a`, `dz += U_gᵀ a`.
    fn gate_back(&mut self, g: usize, a: &[f64], z: &[f64], dz: &mut [f64]) {
        self.blocks[2 * g].grad.add_outer(1.0, a, z);
        for (gb, av) in self.blocks[2 * g + 1].grad.data_mut().iter_mut().zip(a) {
            *gb += av;
        }
        self.blocks[2 * g].value.matvec_t_acc(a, dz);
    }

    /// Backpropagates `(dh, dc)` through one step, accumulating parameter
    /// gradients. Returns `(dh_prev, dc_prev, dx)`; `dc` and `dc_prev` are
    /// empty for cells without a memory cell.
    pub fn backward(&mut self, cache: &StepCache, dh: &[f64], dc: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.hidden;
        let mut dz = vec![0.0; cache.z.len()];
        match self.kind {
            CellKind::Lstm => {
                let (f, i, g, o) = (&cache.gates[0], &cache.gates[1], &cache.gates[2], &cache.gates[3]);
                let tc = &cache.aux;
                let mut dct = vec![0.0; n];
                let mut af = vec![0.0; n];
                let mut ai = vec![0.0; n];
                let mut ag = vec![0.0; n];
                let mut ao = vec![0.0; n];
                for r in 0..n {
                    let dcr = if dc.is_empty() { 0.0 } else { dc[r] };
                    dct[r] = dcr + dh[r] * o[r] * (1.0 - tc[r] * tc[r]);
                    ao[r] = dh[r] * tc[r] * o[r] * (1.0 - o[r]);
                    af[r] = dct[r] * cache.c_prev[r] * f[r] * (1.0 - f[r]);
                    ai[r] = dct[r] * g[r] * i[r] * (1.0 - i[r]);
                    ag[r] = dct[r] * i[r] * (1.0 - g[r] * g[r]);
                }
                let z = &cache.z;
                self.gate_back(0, &af, z, &mut dz);
                self.gate_back(1, &ai, z, &mut dz);
                self.gate_back(2, &ag, z, &mut dz);
                self.gate_back(3, &ao, z, &mut dz);
                let dc_prev: Vec<f64> = (0..n).map(|r| dct[r] * f[r]).collect();
                let dx = dz.split_off(n);
                (dz, dc_prev, dx)
            }
            CellKind::Ernn => {
                let h = &cache.h;
                let a: Vec<f64> = (0..n).map(|r| dh[r] * (1.0 - h[r] * h[r])).collect();
                self.gate_back(0, &a, &cache.z, &mut dz);
                let dx = dz.split_off(n);
                (dz, Vec::new(), dx)
            }
            CellKind::Gru => {
                let (r, u, cand) = (&cache.gates[0], &cache.gates[1], &cache.gates[2]);
                let hp = &cache.h_prev;
                let an: Vec<f64> = (0..n).map(|k| dh[k] * u[k] * (1.0 - cand[k] * cand[k])).collect();
                let au: Vec<f64> = (0..n).map(|k| dh[k] * (cand[k] - hp[k]) * u[k] * (1.0 - u[k])).collect();
                let mut dz2 = vec![0.0; cache.aux.len()];
                self.gate_back(2, &an, &cache.aux, &mut dz2);
                // dz2[..n] is the gradient w.r.t. r ⊙ h_prev
                let ar: Vec<f64> = (0..n).map(|k| dz2[k] * hp[k] * r[k] * (1.0 - r[k])).collect();
                self.gate_back(0, &ar, &cache.z, &mut dz);
                self.gate_back(1, &au, &cache.z, &mut dz);
                for k in 0..n {
                    dz[k] += dh[k] * (1.0 - u[k]) + dz2[k] * r[k];
                }
                for (d, v) in dz[n..].iter_mut().zip(&dz2[n..]) {
                    *d += v;
                }
                let dx = dz.split_off(n);
                (dz, Vec::new(), dx)
            }
        }
    }
}
