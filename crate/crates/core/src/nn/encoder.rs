use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{ModelConfig, Variant};
use super::layers::{BatchNorm, Conv1d, Linear};
use super::params::Builder;
use super::pass::Pass;
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stride-2 residual block doubling the channel count.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub shortcut: Conv1d,
    pub conv1: Conv1d,
    pub bn1: BatchNorm,
    pub conv2: Conv1d,
    pub bn2: BatchNorm,
    pub dropout: f64,
}

impl ResidualBlock {
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        name: &str,
        cin: usize,
        cout: usize,
        dropout: f64,
    ) -> Self {
        let mut s = b.scope(name);
        ResidualBlock {
            shortcut: Conv1d::new(&mut s, "shortcut", cin, cout, 3, 2, 1, true),
            conv1: Conv1d::new(&mut s, "conv1", cin, cout, 3, 1, 1, false),
            bn1: BatchNorm::new(&mut s, "bn1", cout),
            conv2: Conv1d::new(&mut s, "conv2", cout, cout, 3, 2, 1, false),
            bn2: BatchNorm::new(&mut s, "bn2", cout),
            dropout,
        }
    }

    /// `[N × C × T] → [N × 2C × ceil(T/2)]`.
    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let short = self.shortcut.forward(f, x)?;
        let h = self.conv1.forward(f, x)?;
        let h = self.bn1.forward(f, h)?;
        let h = f.graph.gelu(h);
        let h = f.graph.dropout(h, self.dropout);
        let h = self.conv2.forward(f, h)?;
        let h = self.bn2.forward(f, h)?;
        let h = f.graph.gelu(h);
        let y = f.graph.add(short, h)?;
        let y = f.graph.gelu(y);
        Ok(f.graph.dropout(y, self.dropout))
    }
}

/// Residual conv stack followed by a pointwise projection to the model width.
#[derive(Debug, Clone)]
pub struct ConvEncoder {
    pub blocks: Vec<ResidualBlock>,
    pub proj: Linear,
}

impl ConvEncoder {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, cfg: &ModelConfig) -> Self {
        let mut cin = 1;
        let mut blocks = Vec::new();
        for (i, cout) in cfg.conv_channels().into_iter().enumerate() {
            blocks.push(ResidualBlock::new(
                b,
                &format!("block{i}"),
                cin,
                cout,
                cfg.dropout,
            ));
            cin = cout;
        }
        let proj = Linear::new(b, "proj", cin, cfg.d_model, true);
        ConvEncoder { blocks, proj }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let t = f.graph.shape(x)[2];
        let min = 1 << self.blocks.len();
        if t < min {
            return Err(Error::shape(format!(
                "conv encoder needs at least {min} samples, got {t}"
            )));
        }
        let mut h = x;
        for block in &self.blocks {
            h = block.forward(f, h)?;
        }
        let h = f.graph.transpose12(h)?;
        self.proj.forward(f, h)
    }
}

/// Patch encoder of any variant. Input `[N × 1 × T]`, output `[N × P × D]`.
#[derive(Debug, Clone)]
pub enum Encoder {
    Conv(ConvEncoder),
    /// Single linear map per patch.
    Linear {
        embed: Linear,
        patch: usize,
    },
    /// Three linear maps per patch with GELU and dropout between.
    Mlp {
        layers: Vec<Linear>,
        patch: usize,
        dropout: f64,
    },
}

impl Encoder {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, cfg: &ModelConfig) -> Self {
        let mut s = b.scope("encoder");
        let patch = cfg.patch_size;
        match cfg.variant {
            Variant::Ci | Variant::Citrus => Encoder::Conv(ConvEncoder::new(&mut s, cfg)),
            Variant::Patchtst => Encoder::Linear {
                embed: Linear::new(&mut s, "embed", patch, cfg.d_model, true),
                patch,
            },
            Variant::Nlpatchtst => {
                let d = cfg.d_model;
                let layers = vec![
                    Linear::new(&mut s, "mlp0", patch, d, true),
                    Linear::new(&mut s, "mlp1", d, d, true),
                    Linear::new(&mut s, "mlp2", d, d, true),
                ];
                Encoder::Mlp {
                    layers,
                    patch,
                    dropout: cfg.dropout,
                }
            }
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let s = f.graph.shape(x).to_vec();
        if s.len() != 3 || s[1] != 1 {
            return Err(Error::shape(format!(
                "encoder expects [N × 1 × T], got {s:?}"
            )));
        }
        match self {
            Encoder::Conv(c) => c.forward(f, x),
            Encoder::Linear { embed, patch } => {
                let h = patchify(f, x, *patch)?;
                embed.forward(f, h)
            }
            Encoder::Mlp {
                layers,
                patch,
                dropout,
            } => {
                let mut h = patchify(f, x, *patch)?;
                for (i, l) in layers.iter().enumerate() {
                    h = l.forward(f, h)?;
                    if i + 1 < layers.len() {
                        h = f.graph.gelu(h);
                        h = f.graph.dropout(h, *dropout);
                    }
                }
                Ok(h)
            }
        }
    }
}

fn patchify<S: Scalar>(f: &mut Pass<'_, S>, x: Var, patch: usize) -> Result<Var> {
    let s = f.graph.shape(x).to_vec();
    let (n, t) = (s[0], s[2]);
    if t == 0 || t % patch != 0 {
        return Err(Error::shape(format!(
            "length {t} not divisible by patch size {patch}"
        )));
    }
    f.graph.reshape(x, &[n, t / patch, patch])
}
