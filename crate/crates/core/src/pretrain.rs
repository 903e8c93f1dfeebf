//! Masked auto-encoding pre-training: signal (p), mel-frequency (fp) and
//! multimodal (mp) reconstruction.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autograd::Var;
use crate::data::SignalSet;
use crate::error::{Error, Result};
use crate::masking::{sample_block_mask, sample_multimodal_masks, sample_unit_mask, MaskSpec};
use crate::nn::{Model, ModelConfig, Pass, PretrainMode};
use crate::optim::{train_step, Adam};
use crate::rng::{streams, substream, Rng};
use crate::scalar::Scalar;
use crate::signal::{MelConfig, MelSpectrogram};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub mode: PretrainMode,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub mask_ratio: f64,
    /// Mask run length; defaults to 5 for conv variants and 1 otherwise.
    pub block: Option<usize>,
    pub window: usize,
    /// Modality names in channel order (multimodal mode).
    pub modalities: Vec<String>,
    pub seed: u64,
    /// Mel settings for `fp`; defaults follow the window length with hop equal to the patch stride.
    pub mel: Option<MelConfig>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            mode: PretrainMode::P,
            epochs: 200,
            batch: 128,
            lr: 1e-4,
            mask_ratio: 0.5,
            block: None,
            window: 200,
            modalities: vec!["EEG".into(), "EOG".into()],
            seed: 42,
            mel: None,
        }
    }
}

impl PretrainConfig {
    pub fn block_for(&self, model: &ModelConfig) -> usize {
        self.block
            .unwrap_or(if model.variant.is_conv() { 5 } else { 1 })
    }

    pub fn mel_for(&self, model: &ModelConfig) -> MelConfig {
        self.mel
            .clone()
            .unwrap_or_else(|| MelConfig::for_window(self.window, model.patch_stride()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::invalid("epochs and batch must be >= 1"));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::invalid(format!(
                "mask ratio must lie in (0, 1), got {}",
                self.mask_ratio
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.mode == PretrainMode::Mp && self.modalities.len() < 2 {
            return Err(Error::invalid(
                "multimodal pre-training needs at least two modalities",
            ));
        }
        Ok(())
    }
}

/// Mask for one row: unit masking when `block <= 1`, block masking otherwise.
pub fn sample_mask(patches: usize, ratio: f64, block: usize, rng: &mut Rng) -> Result<MaskSpec> {
    if block <= 1 {
        sample_unit_mask(patches, ratio, rng)
    } else {
        sample_block_mask(patches, ratio, block, rng)
    }
}

/// Element weights for a sample-space loss: patch `p` owns samples `[s·p, s·p + s)`.
pub fn sample_weights(masks: &[MaskSpec], len: usize, stride: usize) -> Vec<bool> {
    let mut w = Vec::with_capacity(masks.len() * len);
    for m in masks {
        w.extend((0..len).map(|t| m.masked.get(t / stride).copied().unwrap_or(false)));
    }
    w
}

/// Element weights for a mel target `[N × n_mels × P]`: masked columns.
pub fn column_weights(masks: &[MaskSpec], n_mels: usize) -> Vec<bool> {
    let mut w = Vec::new();
    for m in masks {
        for _ in 0..n_mels {
            w.extend_from_slice(&m.masked);
        }
    }
    w
}

fn flat_mask(masks: &[MaskSpec]) -> Vec<bool> {
    masks
        .iter()
        .flat_map(|m| m.masked.iter().copied())
        .collect()
}

/// Signal-reconstruction loss of `x: [N × 1 × T]` with one mask per row.
pub fn signal_loss<S: Scalar>(
    model: &Model<S>,
    f: &mut Pass<'_, S>,
    x: Tensor<S>,
    masks: &[MaskSpec],
) -> Result<Var> {
    let t = x.dim(2);
    let target = x.data().to_vec();
    let xv = f.graph.input(x);
    let pred = model.pretrain_forward(f, xv, flat_mask(masks))?;
    let weights = sample_weights(masks, t, model.cfg.patch_stride());
    f.graph.masked_mse(pred, target, weights)
}

/// Mel-prediction loss; `targets` holds one `[n_mels × P]` block per row.
pub fn frequency_loss<S: Scalar>(
    model: &Model<S>,
    f: &mut Pass<'_, S>,
    x: Tensor<S>,
    targets: Vec<S>,
    masks: &[MaskSpec],
) -> Result<Var> {
    let xv = f.graph.input(x);
    let pred = model.pretrain_forward(f, xv, flat_mask(masks))?;
    let n_mels = f.graph.shape(pred)[1];
    let weights = column_weights(masks, n_mels);
    f.graph.masked_mse(pred, targets, weights)
}

/// Multimodal loss: sum of per-modality signal losses. Returns the total and
/// the per-modality terms.
pub fn multimodal_loss<S: Scalar>(
    model: &Model<S>,
    f: &mut Pass<'_, S>,
    xs: Vec<Tensor<S>>,
    masks: &[Vec<MaskSpec>],
) -> Result<(Var, Vec<Var>)> {
    if xs.is_empty() || masks.len() != xs.len() {
        return Err(Error::shape(format!(
            "{} modalities with {} mask sets",
            xs.len(),
            masks.len()
        )));
    }
    let t = xs[0].dim(2);
    let targets: Vec<Vec<S>> = xs.iter().map(|x| x.data().to_vec()).collect();
    let vars: Vec<Var> = xs.into_iter().map(|x| f.graph.input(x)).collect();
    let flat: Vec<Vec<bool>> = masks.iter().map(|m| flat_mask(m)).collect();
    let preds = model.pretrain_forward_multi(f, &vars, &flat)?;
    let stride = model.cfg.patch_stride();
    let mut parts = Vec::with_capacity(preds.len());
    for ((pred, target), m) in preds.into_iter().zip(targets).zip(masks) {
        parts.push(
            f.graph
                .masked_mse(pred, target, sample_weights(m, t, stride))?,
        );
    }
    let mut total = parts[0];
    for &p in &parts[1..] {
        total = f.graph.add(total, p)?;
    }
    Ok((total, parts))
}

/// Per-epoch mean losses of a finished run.
#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub model: Model<f32>,
    pub epoch_losses: Vec<f64>,
}

/// Rows of `[n × C × T]` windows as single-channel inputs `[n·C × 1 × T]`.
fn rows_of(set: &SignalSet, items: &[usize], channel: Option<usize>) -> Tensor<f32> {
    let t = set.window_len;
    let mut data = Vec::new();
    for &i in items {
        let w = set.window(i);
        match channel {
            Some(c) => data.extend_from_slice(&w[c * t..(c + 1) * t]),
            None => data.extend_from_slice(w),
        }
    }
    let n = data.len() / t;
    Tensor::from_vec(&[n, 1, t], data).expect("row layout")
}

/// Pre-train a fresh model on `data` and report each epoch's mean loss
/// through `on_epoch(epoch, loss)`. Keeps the final-epoch weights.
pub fn run_pretraining(
    model_cfg: &ModelConfig,
    cfg: &PretrainConfig,
    data: &SignalSet,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    data.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("pre-training set".into()));
    }
    if data.window_len != cfg.window || model_cfg.pretrain_window != cfg.window {
        return Err(Error::shape(format!(
            "windows of {} samples, pre-training window {}, model window {}",
            data.window_len, cfg.window, model_cfg.pretrain_window
        )));
    }
    let modalities = match cfg.mode {
        PretrainMode::Mp => {
            if data.channels != cfg.modalities.len() {
                return Err(Error::shape(format!(
                    "{} channels for {} modalities",
                    data.channels,
                    cfg.modalities.len()
                )));
            }
            data.channels
        }
        _ => 1,
    };
    let mel = cfg.mel_for(model_cfg);
    let n_mels = if cfg.mode == PretrainMode::Fp {
        mel.n_mels
    } else {
        0
    };
    let mut model =
        Model::<f32>::for_pretraining(model_cfg, cfg.mode, modalities, n_mels, cfg.seed)?;
    let patches = model.patches_for(cfg.window);
    let block = cfg.block_for(model_cfg);

    // fp targets depend only on the input, so they are computed once per row.
    let targets: Option<Vec<Vec<f32>>> = match cfg.mode {
        PretrainMode::Fp => {
            let spec = MelSpectrogram::new(&mel, data.fs)?;
            let t = data.window_len;
            let mut rows = Vec::with_capacity(data.len() * data.channels);
            for i in 0..data.len() {
                for c in 0..data.channels {
                    let x: Vec<f64> = data.window(i)[c * t..(c + 1) * t]
                        .iter()
                        .map(|&v| v as f64)
                        .collect();
                    rows.push(
                        spec.target(&x, patches)?
                            .into_iter()
                            .map(|v| v as f32)
                            .collect(),
                    );
                }
            }
            Some(rows)
        }
        _ => None,
    };

    let mut adam = Adam::new(cfg.lr);
    let mut shuffle_rng = substream(cfg.seed, streams::SHUFFLE);
    let mut mask_rng = substream(cfg.seed, streams::MASK);
    let mut dropout_rng = substream(cfg.seed, streams::DROPOUT);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        let mut weight = 0.0;
        for items in order.chunks(cfg.batch) {
            let pass_rng = Rng::seed_from_u64(dropout_rng.random());
            let loss = match cfg.mode {
                PretrainMode::P | PretrainMode::Fp => {
                    let x = rows_of(data, items, None);
                    let masks = (0..x.dim(0))
                        .map(|_| sample_mask(patches, cfg.mask_ratio, block, &mut mask_rng))
                        .collect::<Result<Vec<_>>>()?;
                    match &targets {
                        None => train_step(&mut model, &mut adam, pass_rng, |m, f| {
                            signal_loss(m, f, x, &masks)
                        })?,
                        Some(all) => {
                            let mut tgt = Vec::new();
                            for &i in items {
                                for c in 0..data.channels {
                                    tgt.extend_from_slice(&all[i * data.channels + c]);
                                }
                            }
                            train_step(&mut model, &mut adam, pass_rng, |m, f| {
                                frequency_loss(m, f, x, tgt, &masks)
                            })?
                        }
                    }
                }
                PretrainMode::Mp => {
                    let xs: Vec<Tensor<f32>> = (0..modalities)
                        .map(|c| rows_of(data, items, Some(c)))
                        .collect();
                    let mut masks = vec![Vec::with_capacity(items.len()); modalities];
                    for _ in items {
                        let drawn = sample_multimodal_masks(
                            patches,
                            cfg.mask_ratio,
                            block.max(1),
                            modalities,
                            &mut mask_rng,
                        )?;
                        for (m, spec) in drawn.into_iter().enumerate() {
                            masks[m].push(spec);
                        }
                    }
                    train_step(&mut model, &mut adam, pass_rng, |m, f| {
                        multimodal_loss(m, f, xs, &masks).map(|r| r.0)
                    })?
                }
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            sum += loss * items.len() as f64;
            weight += items.len() as f64;
            step += 1;
        }
        let mean = sum / weight;
        on_epoch(epoch, mean);
        losses.push(mean);
    }
    Ok(PretrainOutcome {
        model,
        epoch_losses: losses,
    })
}
