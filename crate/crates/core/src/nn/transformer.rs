use alloc::format;
use alloc::vec::Vec;

use super::config::ModelConfig;
use super::layers::{LayerNorm, Linear};
use super::params::Builder;
use super::pass::Pass;
use crate::autograd::{ParamRef, Var};
use crate::error::Result;
use crate::scalar::Scalar;

/// Pre-norm encoder layer: self-attention then feed-forward, each residual.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub ln1: LayerNorm,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub heads: usize,
    pub dropout: f64,
}

impl TransformerLayer {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, name: &str, cfg: &ModelConfig) -> Self {
        let mut s = b.scope(name);
        let d = cfg.d_model;
        TransformerLayer {
            ln1: LayerNorm::new(&mut s, "ln1", d),
            q: Linear::new(&mut s, "q", d, d, true),
            k: Linear::new(&mut s, "k", d, d, true),
            v: Linear::new(&mut s, "v", d, d, true),
            out: Linear::new(&mut s, "out", d, d, true),
            ln2: LayerNorm::new(&mut s, "ln2", d),
            ff1: Linear::new(&mut s, "ff1", d, cfg.ff_dim, true),
            ff2: Linear::new(&mut s, "ff2", cfg.ff_dim, d, true),
            heads: cfg.n_heads,
            dropout: cfg.dropout,
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let h = self.ln1.forward(f, x)?;
        let q = self.q.forward(f, h)?;
        let k = self.k.forward(f, h)?;
        let v = self.v.forward(f, h)?;
        let a = f.graph.attention(q, k, v, self.heads)?;
        let a = self.out.forward(f, a)?;
        let a = f.graph.dropout(a, self.dropout);
        let x = f.graph.add(x, a)?;

        let h = self.ln2.forward(f, x)?;
        let h = self.ff1.forward(f, h)?;
        let h = f.graph.gelu(h);
        let h = f.graph.dropout(h, self.dropout);
        let h = self.ff2.forward(f, h)?;
        let h = f.graph.dropout(h, self.dropout);
        f.graph.add(x, h)
    }
}

#[derive(Debug, Clone)]
pub struct Transformer {
    /// Learnable positional table `[P_max × D]`.
    pub pos: ParamRef,
    pub layers: Vec<TransformerLayer>,
    pub dropout: f64,
}

impl Transformer {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, cfg: &ModelConfig) -> Self {
        let mut s = b.scope("transformer");
        let pos = s.normal("pos_embedding", &[cfg.max_patches(), cfg.d_model], 0.02);
        let layers = (0..cfg.n_layers)
            .map(|i| TransformerLayer::new(&mut s, &format!("layer{i}"), cfg))
            .collect();
        Transformer {
            pos,
            layers,
            dropout: cfg.dropout,
        }
    }

    /// `[N × P × D] → [N × P × D]`; fails when `P` exceeds the positional table.
    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, z: Var) -> Result<Var> {
        let pos = f.p(self.pos);
        let mut h = f.graph.add_positional(z, pos)?;
        h = f.graph.dropout(h, self.dropout);
        for layer in &self.layers {
            h = layer.forward(f, h)?;
        }
        Ok(h)
    }
}
