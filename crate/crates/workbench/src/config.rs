//! Run configuration shared by the `pretrain`, `finetune` and `evaluate`
//! subcommands. `epochs`, `batch` and `lr` apply to whichever stage runs.

use std::path::Path;

use citrus_core::eval::{ProtocolConfig, DATA_SEED, MODEL_SEEDS};
use citrus_core::nn::{ModelConfig, PretrainMode, Variant};
use citrus_core::pretrain::PretrainConfig;
use citrus_core::signal::MelConfig;
use citrus_core::transfer::{AlignSpec, AlignStrategy, FinetuneConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WbError};
use crate::fsutil::{read_string, sha256};

/// Architecture knobs; defaults are the full-size model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Arch {
    pub conv_base_channels: usize,
    pub conv_layers: usize,
    pub d_model: usize,
    pub ff_dim: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub patch_size: usize,
    pub dropout: f64,
    pub head_dropout: f64,
    pub freq_hidden: usize,
}

impl Default for Arch {
    fn default() -> Self {
        let m = ModelConfig::default();
        Arch {
            conv_base_channels: m.conv_base_channels,
            conv_layers: m.conv_layers,
            d_model: m.d_model,
            ff_dim: m.ff_dim,
            n_heads: m.n_heads,
            n_layers: m.n_layers,
            patch_size: m.patch_size,
            dropout: m.dropout,
            head_dropout: m.head_dropout,
            freq_hidden: m.freq_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub mode: PretrainMode,
    pub window: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    pub mask_ratio: f64,
    pub block: Option<usize>,
    pub modalities: Vec<String>,
    pub mel: Option<MelConfig>,
    pub arch: Arch,
    pub align: AlignStrategy,
    pub pretrain_fs: f64,
    pub linear_probe: bool,
    pub regime_pct: f64,
    pub grouped: bool,
    pub k: usize,
    pub data_seed: u64,
    pub model_seeds: Vec<u64>,
    pub folds: Option<Vec<usize>>,
    pub train_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PretrainConfig::default();
        RunConfig {
            variant: Variant::Citrus,
            mode: PretrainMode::P,
            window: 200,
            epochs: p.epochs,
            batch: p.batch,
            lr: p.lr,
            seed: 42,
            mask_ratio: p.mask_ratio,
            block: None,
            modalities: p.modalities,
            mel: None,
            arch: Arch::default(),
            align: AlignStrategy::ResampleWindows,
            pretrain_fs: 100.0,
            linear_probe: false,
            regime_pct: 100.0,
            grouped: false,
            k: 10,
            data_seed: DATA_SEED,
            model_seeds: MODEL_SEEDS.to_vec(),
            folds: None,
            train_frac: 0.75,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| WbError::Json {
            path: path.into(),
            source: e,
        })?;
        cfg.model().validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form (defaults filled in).
    pub fn hash(&self) -> [u8; 32] {
        sha256(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    pub fn model(&self) -> ModelConfig {
        let a = &self.arch;
        ModelConfig {
            variant: self.variant,
            conv_base_channels: a.conv_base_channels,
            conv_layers: a.conv_layers,
            d_model: a.d_model,
            ff_dim: a.ff_dim,
            n_heads: a.n_heads,
            n_layers: a.n_layers,
            patch_size: a.patch_size,
            dropout: a.dropout,
            head_dropout: a.head_dropout,
            freq_hidden: a.freq_hidden,
            pretrain_window: self.window,
            feature_tap: None,
        }
    }

    pub fn pretrain(&self) -> PretrainConfig {
        PretrainConfig {
            mode: self.mode,
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            mask_ratio: self.mask_ratio,
            block: self.block,
            window: self.window,
            modalities: self.modalities.clone(),
            seed: self.seed,
            mel: self.mel.clone(),
        }
    }

    pub fn finetune(&self, seed: u64) -> FinetuneConfig {
        FinetuneConfig {
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            seed,
            linear_probe: self.linear_probe,
        }
    }

    pub fn align_spec(&self) -> AlignSpec {
        AlignSpec {
            strategy: self.align,
            pretrain_fs: self.pretrain_fs,
            pretrain_window: self.window,
            stride: self.window / 2,
        }
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            k: self.k,
            data_seed: self.data_seed,
            model_seeds: self.model_seeds.clone(),
            regime_pct: self.regime_pct,
            grouped: self.grouped,
            train_frac: self.train_frac,
            folds: self.folds.clone(),
        }
    }

    /// Model name stamped on records; interpolation runs are suffixed.
    pub fn record_model_name(&self) -> String {
        match self.align {
            AlignStrategy::ResampleWindows => self.variant.name().to_string(),
            AlignStrategy::InterpolateFixed => format!("{}{}", self.variant.name(), INTERP_SUFFIX),
        }
    }
}

/// Suffix marking records fine-tuned with whole-recording interpolation.
pub const INTERP_SUFFIX: &str = "/interp";
