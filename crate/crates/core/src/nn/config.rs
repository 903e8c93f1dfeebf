use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Linear patch embedding.
    Patchtst,
    /// 3-layer MLP patch embedding.
    Nlpatchtst,
    /// Convolutional encoder; fine-tunes on the encoded features.
    Ci,
    /// Convolutional encoder; fine-tunes on the transformer context.
    Citrus,
}

impl Variant {
    pub fn is_conv(self) -> bool {
        matches!(self, Variant::Ci | Variant::Citrus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Patchtst => "PatchTST",
            Variant::Nlpatchtst => "NLPatchTST",
            Variant::Ci => "Ci",
            Variant::Citrus => "CiTrus",
        }
    }
}

/// Which tensor the classification head reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureTap {
    /// Patch embeddings straight out of the encoder.
    Encoded,
    /// Transformer output.
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PretrainMode {
    /// Reconstruct the masked signal.
    P,
    /// Predict z-scored mel frames of the masked patches.
    Fp,
    /// Multimodal signal reconstruction with per-modality masks and decoders.
    Mp,
}

impl PretrainMode {
    pub fn tag(self) -> &'static str {
        match self {
            PretrainMode::P => "p",
            PretrainMode::Fp => "fp",
            PretrainMode::Mp => "mp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub conv_base_channels: usize,
    pub conv_layers: usize,
    pub d_model: usize,
    pub ff_dim: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub patch_size: usize,
    pub dropout: f64,
    pub head_dropout: f64,
    /// Hidden width of the mel head.
    pub freq_hidden: usize,
    pub pretrain_window: usize,
    /// Defaults to `encoded` for Ci and `context` otherwise.
    pub feature_tap: Option<FeatureTap>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::new(Variant::Citrus)
    }
}

impl ModelConfig {
    pub fn new(variant: Variant) -> Self {
        ModelConfig {
            variant,
            conv_base_channels: 32,
            conv_layers: 3,
            d_model: 64,
            ff_dim: 128,
            n_heads: 8,
            n_layers: 4,
            patch_size: 20,
            dropout: 0.1,
            head_dropout: 0.5,
            freq_hidden: 128,
            pretrain_window: 200,
            feature_tap: None,
        }
    }

    pub fn tap(&self) -> FeatureTap {
        self.feature_tap.unwrap_or(match self.variant {
            Variant::Ci => FeatureTap::Encoded,
            _ => FeatureTap::Context,
        })
    }

    /// Samples per patch: the total conv stride, or the patch size.
    pub fn patch_stride(&self) -> usize {
        if self.variant.is_conv() {
            1 << self.conv_layers
        } else {
            self.patch_size
        }
    }

    /// Patch count for an input of `len` samples.
    pub fn patches_for(&self, len: usize) -> usize {
        if self.variant.is_conv() {
            (0..self.conv_layers).fold(len, |t, _| t.div_ceil(2))
        } else {
            len / self.patch_size
        }
    }

    /// Size of the positional table.
    pub fn max_patches(&self) -> usize {
        self.patches_for(self.pretrain_window)
    }

    /// Encoder output channels per conv stage, e.g. `[32, 64, 128]`.
    pub fn conv_channels(&self) -> alloc::vec::Vec<usize> {
        (0..self.conv_layers)
            .map(|i| self.conv_base_channels << i)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::invalid(alloc::format!(
                "d_model {} not divisible by {} heads",
                self.d_model,
                self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.head_dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        let stride = self.patch_stride();
        if self.pretrain_window == 0 || self.pretrain_window % stride != 0 {
            return Err(Error::invalid(alloc::format!(
                "pretrain window {} not divisible by patch stride {stride}",
                self.pretrain_window
            )));
        }
        if self.variant.is_conv() && (self.conv_layers == 0 || self.conv_base_channels == 0) {
            return Err(Error::invalid(
                "convolutional encoder needs at least one layer",
            ));
        }
        if self.ff_dim == 0 || self.freq_hidden == 0 {
            return Err(Error::invalid("hidden widths must be >= 1"));
        }
        if !self.variant.is_conv() && self.patch_size == 0 {
            return Err(Error::invalid("patch size must be >= 1"));
        }
        Ok(())
    }
}
