use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{ModelConfig, Variant};
use super::layers::{BatchNorm, Conv1d, ConvTranspose1d, Linear};
use super::params::Builder;
use super::pass::Pass;
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Length-doubling residual stage; the last stage has no norm or activation
/// so the reconstruction is unbounded.
#[derive(Debug, Clone)]
pub struct UpBlock {
    pub shortcut: ConvTranspose1d,
    pub up: ConvTranspose1d,
    pub bn1: BatchNorm,
    pub conv: Conv1d,
    pub bn2: Option<BatchNorm>,
    pub dropout: f64,
}

impl UpBlock {
    fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        name: &str,
        cin: usize,
        cout: usize,
        last: bool,
        dropout: f64,
    ) -> Self {
        let mut s = b.scope(name);
        UpBlock {
            shortcut: ConvTranspose1d::new(&mut s, "shortcut", cin, cout, 3, 2, 1, 1, true),
            up: ConvTranspose1d::new(&mut s, "up", cin, cout, 3, 2, 1, 1, false),
            bn1: BatchNorm::new(&mut s, "bn1", cout),
            conv: Conv1d::new(&mut s, "conv", cout, cout, 3, 1, 1, last),
            bn2: (!last).then(|| BatchNorm::new(&mut s, "bn2", cout)),
            dropout,
        }
    }

    fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let short = self.shortcut.forward(f, x)?;
        let h = self.up.forward(f, x)?;
        let h = self.bn1.forward(f, h)?;
        let h = f.graph.gelu(h);
        let h = f.graph.dropout(h, self.dropout);
        let h = self.conv.forward(f, h)?;
        match &self.bn2 {
            Some(bn) => {
                let h = bn.forward(f, h)?;
                let h = f.graph.gelu(h);
                let y = f.graph.add(short, h)?;
                let y = f.graph.gelu(y);
                Ok(f.graph.dropout(y, self.dropout))
            }
            None => f.graph.add(short, h),
        }
    }
}

/// Mirror of the conv encoder: `[N × P × D_in] → [N × 1 × 2^L·P]`.
#[derive(Debug, Clone)]
pub struct ConvDecoder {
    pub proj: Linear,
    pub blocks: Vec<UpBlock>,
}

impl ConvDecoder {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, cfg: &ModelConfig, d_in: usize) -> Self {
        let mut chans = cfg.conv_channels();
        chans.reverse();
        chans.push(1);
        let proj = Linear::new(b, "proj", d_in, chans[0], true);
        let n = chans.len() - 1;
        let blocks = (0..n)
            .map(|i| {
                UpBlock::new(
                    b,
                    &format!("block{i}"),
                    chans[i],
                    chans[i + 1],
                    i + 1 == n,
                    cfg.dropout,
                )
            })
            .collect();
        ConvDecoder { proj, blocks }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, ctx: Var) -> Result<Var> {
        let h = self.proj.forward(f, ctx)?;
        let mut h = f.graph.transpose12(h)?;
        for block in &self.blocks {
            h = block.forward(f, h)?;
        }
        Ok(h)
    }
}

/// Per-patch linear (PatchTST) or 3-layer MLP (NLPatchTST) back to samples.
#[derive(Debug, Clone)]
pub struct PatchDecoder {
    pub layers: Vec<Linear>,
    pub patch: usize,
    pub dropout: f64,
}

impl PatchDecoder {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, cfg: &ModelConfig, d_in: usize) -> Self {
        let (d, patch) = (cfg.d_model, cfg.patch_size);
        let layers = match cfg.variant {
            Variant::Nlpatchtst => vec![
                Linear::new(b, "mlp0", d_in, d, true),
                Linear::new(b, "mlp1", d, d, true),
                Linear::new(b, "mlp2", d, patch, true),
            ],
            _ => vec![Linear::new(b, "linear", d_in, patch, true)],
        };
        PatchDecoder {
            layers,
            patch,
            dropout: cfg.dropout,
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, ctx: Var) -> Result<Var> {
        let mut h = ctx;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(f, h)?;
            if i + 1 < self.layers.len() {
                h = f.graph.gelu(h);
                h = f.graph.dropout(h, self.dropout);
            }
        }
        let s = f.graph.shape(h).to_vec();
        f.graph.reshape(h, &[s[0], 1, s[1] * self.patch])
    }
}

/// Signal decoder matching the encoder family.
#[derive(Debug, Clone)]
pub enum Decoder {
    Conv(ConvDecoder),
    Patch(PatchDecoder),
}

impl Decoder {
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        name: &str,
        cfg: &ModelConfig,
        d_in: usize,
    ) -> Self {
        let mut s = b.scope(name);
        if cfg.variant.is_conv() {
            Decoder::Conv(ConvDecoder::new(&mut s, cfg, d_in))
        } else {
            Decoder::Patch(PatchDecoder::new(&mut s, cfg, d_in))
        }
    }

    /// `[N × P × D_in] → [N × 1 × T]`.
    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, ctx: Var) -> Result<Var> {
        if f.graph.shape(ctx).len() != 3 {
            return Err(Error::shape("decoder expects [N × P × D]"));
        }
        match self {
            Decoder::Conv(d) => d.forward(f, ctx),
            Decoder::Patch(d) => d.forward(f, ctx),
        }
    }
}
