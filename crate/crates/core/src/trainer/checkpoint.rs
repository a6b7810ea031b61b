//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "PGS2SCKP"
//! version    u32
//! cell kind  u8       0 LSTM, 1 ERNN, 2 GRU
//! dims       7 × u32  m, L, H, N^e, N^d, N^p, N^a   (N^p = N^a = 0 without a policy)
//! scaler     u32 count, then count × (min f64, max f64)
//! meta       u32 byte length, then UTF-8 "key=value\n" lines
//! blocks     u32 count, then per block:
//!              u16 name length, name bytes, u32 rows, u32 cols, rows·cols × f64
//! digest     32 bytes SHA-256 of everything above
//! ```
//!
//! Network blocks come first in their declared order, then `pol.*`, then
//! any `aux.msvr.*` and `aux.mlp.*` blocks of the frozen pool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::TrainError;
use crate::auxmodels::{Activation, AuxModel, DirectMlp, MsvrModel};
use crate::data::ScalerParams;
use crate::numcore::{Matrix, ParamBlock, Parameterized};
use crate::rlpolicy::PolicyParams;
use crate::s2s::{CellKind, SeqParams};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PGS2SCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found}, this build reads version {supported}")]
    Version { found: u32, supported: u32 },
    #[error("checkpoint does not fit: {0}")]
    Mismatch(String),
}

/// Everything needed to forecast again: weights, scaling and provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seq: SeqParams,
    pub policy: Option<PolicyParams>,
    pub scaler: ScalerParams,
    pub lags: usize,
    pub horizon: usize,
    pub pool: Vec<AuxModel>,
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    /// Fails unless the stored network has the requested cell kind and sizes.
    pub fn expect(&self, kind: CellKind, channels: usize, hidden: usize) -> Result<(), CheckpointError> {
        if self.seq.kind != kind {
            return Err(CheckpointError::Mismatch(format!(
                "checkpoint holds a {} network, config asks for {kind}",
                self.seq.kind
            )));
        }
        if self.seq.channels != channels || self.seq.encoder_hidden() != hidden {
            return Err(CheckpointError::Mismatch(format!(
                "checkpoint has {} channels and {} hidden units, config asks for {channels} and {hidden}",
                self.seq.channels,
                self.seq.encoder_hidden()
            )));
        }
        Ok(())
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn block(&mut self, name: &str, m: &Matrix) {
        self.u16(name.len() as u16);
        self.0.extend_from_slice(name.as_bytes());
        self.u32(m.rows());
        self.u32(m.cols());
        for &v in m.data() {
            self.f64(v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Corrupt(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn string(&mut self, n: usize) -> Result<String, CheckpointError> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Corrupt("non-UTF-8 text".into()))
    }
}

fn msvr_blocks(m: &MsvrModel) -> Vec<(String, Matrix)> {
    vec![
        ("aux.msvr.hyper".into(), Matrix::from_rows(&[vec![m.gamma, m.c, m.epsilon]])),
        ("aux.msvr.inputs".into(), m.inputs.clone()),
        ("aux.msvr.coef".into(), m.coef.clone()),
        ("aux.msvr.bias".into(), Matrix::from_rows(&[m.bias.clone()])),
    ]
}

fn mlp_blocks(m: &DirectMlp) -> Vec<(String, Matrix)> {
    let act = match m.activation {
        Activation::Sigmoid => 0.0,
        Activation::Tanh => 1.0,
    };
    let mut out = vec![("aux.mlp.act".to_string(), Matrix::from_rows(&[vec![act]]))];
    for b in [&m.w1, &m.b1, &m.w2, &m.b2] {
        out.push((format!("aux.{}", b.name), b.value.clone()));
    }
    out
}

/// Serializes `ckpt` to bytes in the documented layout.
pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    w.u8(ckpt.seq.kind.code());
    let (np, na) = ckpt.policy.as_ref().map_or((0, 0), |p| (p.hidden(), p.actions()));
    for d in [
        ckpt.seq.channels,
        ckpt.lags,
        ckpt.horizon,
        ckpt.seq.encoder_hidden(),
        ckpt.seq.decoder_hidden(),
        np,
        na,
    ] {
        w.u32(d);
    }
    w.u32(ckpt.scaler.min.len());
    for (lo, hi) in ckpt.scaler.min.iter().zip(&ckpt.scaler.max) {
        w.f64(*lo);
        w.f64(*hi);
    }
    let meta: String = ckpt.meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    w.u32(meta.len());
    w.0.extend_from_slice(meta.as_bytes());

    let mut blocks: Vec<(String, Matrix)> =
        ckpt.seq.blocks().iter().map(|b| (b.name.clone(), b.value.clone())).collect();
    if let Some(p) = &ckpt.policy {
        blocks.extend(p.blocks().iter().map(|b| (b.name.clone(), b.value.clone())));
    }
    for m in &ckpt.pool {
        blocks.extend(match m {
            AuxModel::Msvr(m) => msvr_blocks(m),
            AuxModel::Mlp(m) => mlp_blocks(m),
        });
    }
    w.u32(blocks.len());
    for (name, m) in &blocks {
        w.block(name, m);
    }
    let digest = Sha256::digest(&w.0);
    w.0.extend_from_slice(&digest);
    w.0
}

fn fill(target: &mut ParamBlock, blocks: &mut BTreeMap<String, Matrix>) -> Result<(), CheckpointError> {
    let m = blocks
        .remove(&target.name)
        .ok_or_else(|| CheckpointError::Mismatch(format!("block {} missing", target.name)))?;
    if m.shape() != target.value.shape() {
        return Err(CheckpointError::Mismatch(format!(
            "block {} is {:?}, expected {:?}",
            target.name,
            m.shape(),
            target.value.shape()
        )));
    }
    target.value = m;
    Ok(())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 4 + 32 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::Corrupt("missing magic bytes".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::Corrupt("digest mismatch (truncated or modified file)".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(CheckpointError::Version {
            found: version as u32,
            supported: CHECKPOINT_VERSION,
        });
    }
    let kind = CellKind::from_code(r.u8()?).ok_or_else(|| CheckpointError::Corrupt("unknown cell kind".into()))?;
    let mut dims = [0usize; 7];
    for d in dims.iter_mut() {
        *d = r.u32()?;
    }
    let [m, lags, horizon, ne, nd, np, na] = dims;
    let nscale = r.u32()?;
    let (mut min, mut max) = (Vec::with_capacity(nscale), Vec::with_capacity(nscale));
    for _ in 0..nscale {
        min.push(r.f64()?);
        max.push(r.f64()?);
    }
    let meta_len = r.u32()?;
    let meta: BTreeMap<String, String> = r
        .string(meta_len)?
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();

    let nblocks = r.u32()?;
    let mut blocks = BTreeMap::new();
    for _ in 0..nblocks {
        let len = r.u16()? as usize;
        let name = r.string(len)?;
        let (rows, cols) = (r.u32()?, r.u32()?);
        let data = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let mat = Matrix::from_vec(rows, cols, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        blocks.insert(name, mat);
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }

    let mut seq = SeqParams::zeros(kind, m, ne, nd).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    for b in seq.blocks_mut() {
        fill(b, &mut blocks)?;
    }
    let policy = if na > 0 {
        let mut p = PolicyParams::zeros(nd, np, na);
        for b in p.blocks_mut() {
            fill(b, &mut blocks)?;
        }
        Some(p)
    } else {
        None
    };
    let mut pool = Vec::new();
    if let Some(hyper) = blocks.remove("aux.msvr.hyper") {
        let mut take = |n: &str| {
            blocks
                .remove(n)
                .ok_or_else(|| CheckpointError::Corrupt(format!("block {n} missing")))
        };
        let h = hyper.data();
        pool.push(AuxModel::Msvr(MsvrModel {
            gamma: h[0],
            c: h[1],
            epsilon: h[2],
            inputs: take("aux.msvr.inputs")?,
            coef: take("aux.msvr.coef")?,
            bias: take("aux.msvr.bias")?.into_vec(),
        }));
    }
    if let Some(act) = blocks.remove("aux.mlp.act") {
        let activation = if act.data()[0] == 0.0 { Activation::Sigmoid } else { Activation::Tanh };
        let mut mlp = DirectMlp {
            activation,
            w1: ParamBlock::zeros("mlp.w1", 0, 0),
            b1: ParamBlock::zeros("mlp.b1", 0, 0),
            w2: ParamBlock::zeros("mlp.w2", 0, 0),
            b2: ParamBlock::zeros("mlp.b2", 0, 0),
        };
        for b in [&mut mlp.w1, &mut mlp.b1, &mut mlp.w2, &mut mlp.b2] {
            let key = format!("aux.{}", b.name);
            let v = blocks
                .remove(&key)
                .ok_or_else(|| CheckpointError::Corrupt(format!("block {key} missing")))?;
            *b = ParamBlock::new(b.name.clone(), v);
        }
        pool.push(AuxModel::Mlp(mlp));
    }
    if let Some(name) = blocks.keys().next() {
        return Err(CheckpointError::Corrupt(format!("unexpected block {name}")));
    }
    Ok(Checkpoint {
        seq,
        policy,
        scaler: ScalerParams { min, max },
        lags,
        horizon,
        pool,
        meta,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), TrainError> {
    std::fs::write(path, encode_checkpoint(ckpt)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(decode_checkpoint(&bytes)?)
}
