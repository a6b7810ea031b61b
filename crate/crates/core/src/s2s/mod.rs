//! Recurrent encoder-decoder: LSTM/ERNN/GRU cells, the encoder, the decoder
//! under the different input-feeding regimes, and backpropagation through
//! time with hand-derived gradients.

mod cell;
mod decode;

pub use cell::{CellKind, CellParams, StepCache};
pub use decode::{
    bptt, decode_sequence, decode_step, decode_with_inputs, encode, forward, predict, sequence_loss,
    ConstantSelector, DecodeState, DecodeTrace, EncoderTrace, Feed, InputSelector, Phase, Regime,
    ScriptedSelector, Source,
};

use thiserror::Error;

use crate::numcore::{NumError, ParamBlock, Parameterized, Rng};

#[derive(Debug, Error)]
pub enum S2sError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{0} decoding in the training phase needs the ground-truth targets")]
    MissingTruth(&'static str),
    #[error("{0} decoding needs the auxiliary forecasts for the sample")]
    MissingAux(&'static str),
    #[error("policy decoding needs an input selector")]
    MissingSelector,
    #[error("selector chose action {action} but the pool has {pool} slots")]
    BadAction { action: usize, pool: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

impl S2sError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, S2sError::NonFinite(_) | S2sError::Num(_))
    }
}

/// All encoder, decoder and output-layer weights.
///
/// The decoder gate input is `[s_{k−1}, input, context]`, so decoder gate
/// matrices are `N^d × (N^d + 1 + N^e)`. The decoder starts from the
/// encoder's final state, which requires `N^e == N^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqParams {
    pub kind: CellKind,
    pub channels: usize,
    pub enc: CellParams,
    pub dec: CellParams,
    /// Output row `V ∈ ℝ^{1×N^d}`.
    pub v: ParamBlock,
    pub bv: ParamBlock,
}

impl SeqParams {
    fn check_dims(channels: usize, ne: usize, nd: usize) -> Result<(), S2sError> {
        if channels == 0 || ne == 0 || nd == 0 {
            return Err(S2sError::Shape("channels and hidden sizes must be positive".into()));
        }
        if ne != nd {
            return Err(S2sError::Shape(format!(
                "decoder starts from the encoder state, so hidden sizes must match (encoder {ne}, decoder {nd})"
            )));
        }
        Ok(())
    }

    pub fn new(kind: CellKind, channels: usize, ne: usize, nd: usize, rng: &mut Rng) -> Result<Self, S2sError> {
        Self::check_dims(channels, ne, nd)?;
        Ok(SeqParams {
            kind,
            channels,
            enc: CellParams::new(kind, ne, channels, "enc", rng),
            dec: CellParams::new(kind, nd, 1 + ne, "dec", rng),
            v: ParamBlock::fan_in_uniform("out.V", 1, nd, rng),
            bv: ParamBlock::zeros("out.b", 1, 1),
        })
    }

    pub fn zeros(kind: CellKind, channels: usize, ne: usize, nd: usize) -> Result<Self, S2sError> {
        Self::check_dims(channels, ne, nd)?;
        Ok(SeqParams {
            kind,
            channels,
            enc: CellParams::zeros(kind, ne, channels, "enc"),
            dec: CellParams::zeros(kind, nd, 1 + ne, "dec"),
            v: ParamBlock::zeros("out.V", 1, nd),
            bv: ParamBlock::zeros("out.b", 1, 1),
        })
    }

    pub fn encoder_hidden(&self) -> usize {
        self.enc.hidden
    }

    pub fn decoder_hidden(&self) -> usize {
        self.dec.hidden
    }

    pub fn decoder_input_width(&self) -> usize {
        self.dec.hidden + self.dec.input
    }
}

impl Parameterized for SeqParams {
    fn blocks(&self) -> Vec<&ParamBlock> {
        let mut out: Vec<&ParamBlock> = self.enc.blocks.iter().collect();
        out.extend(self.dec.blocks.iter());
        out.push(&self.v);
        out.push(&self.bv);
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        let mut out: Vec<&mut ParamBlock> = self.enc.blocks.iter_mut().collect();
        out.extend(self.dec.blocks.iter_mut());
        out.push(&mut self.v);
        out.push(&mut self.bv);
        out
    }
}
