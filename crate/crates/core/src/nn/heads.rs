use alloc::format;
use alloc::vec::Vec;

use super::decoder::Decoder;
use super::layers::Linear;
use super::params::Builder;
use super::pass::Pass;
use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-patch MLP predicting mel columns: `[N × P × D_in] → [N × n_mels × P]`.
#[derive(Debug, Clone)]
pub struct FreqHead {
    pub fc1: Linear,
    pub fc2: Linear,
    pub n_mels: usize,
}

impl FreqHead {
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        d_in: usize,
        hidden: usize,
        n_mels: usize,
    ) -> Self {
        let mut s = b.scope("freq_head");
        FreqHead {
            fc1: Linear::new(&mut s, "fc1", d_in, hidden, true),
            fc2: Linear::new(&mut s, "fc2", hidden, n_mels, true),
            n_mels,
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, ctx: Var) -> Result<Var> {
        let h = self.fc1.forward(f, ctx)?;
        let h = f.graph.gelu(h);
        let h = self.fc2.forward(f, h)?;
        f.graph.transpose12(h)
    }
}

/// Pre-training head, removed before fine-tuning.
#[derive(Debug, Clone)]
pub enum PretrainHead {
    Signal(Decoder),
    Freq(FreqHead),
    /// One decoder per modality, each reading the concatenated contexts.
    Multi(Vec<Decoder>),
}

/// Dropout then a single linear layer on pooled features.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub linear: Linear,
    pub dropout: f64,
}

impl Classifier {
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        width: usize,
        n_classes: usize,
        dropout: f64,
    ) -> Self {
        let mut s = b.scope("head");
        Classifier {
            linear: Linear::new(&mut s, "linear", width, n_classes, true),
            dropout,
        }
    }

    pub fn in_features(&self) -> usize {
        self.linear.in_features
    }

    pub fn n_classes(&self) -> usize {
        self.linear.out_features
    }

    /// `[B × width] → [B × K]` logits.
    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, feats: Var) -> Result<Var> {
        let s = f.graph.shape(feats);
        if s.len() != 2 || s[1] != self.in_features() {
            return Err(Error::shape(format!(
                "classifier expects width {}, got {:?}",
                self.in_features(),
                s
            )));
        }
        let h = f.graph.dropout(feats, self.dropout);
        self.linear.forward(f, h)
    }
}
