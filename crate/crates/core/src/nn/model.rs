use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::{FeatureTap, ModelConfig, PretrainMode};
use super::decoder::Decoder;
use super::encoder::Encoder;
use super::heads::{Classifier, FreqHead, PretrainHead};
use super::params::{Builder, LoadReport, ParamStore};
use super::pass::Pass;
use super::transformer::Transformer;
use crate::autograd::{ParamRef, Var};
use crate::error::{Error, Result};
use crate::rng::{streams, substream};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Layout of a channel fold, enough to undo it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldRecord {
    pub batch: usize,
    pub channels: usize,
}

/// `[B × C × T] → [B·C × 1 × T]`; row `b·C + c` holds channel `c` of item `b`.
pub fn channel_fold<S: Scalar>(x: &Tensor<S>) -> Result<(Tensor<S>, FoldRecord)> {
    let &[b, c, t] = x.shape() else {
        return Err(Error::shape(format!(
            "channel_fold expects [B × C × T], got {:?}",
            x.shape()
        )));
    };
    Ok((
        x.clone().reshape(&[b * c, 1, t])?,
        FoldRecord {
            batch: b,
            channels: c,
        },
    ))
}

pub fn channel_unfold<S: Scalar>(x: &Tensor<S>, rec: FoldRecord) -> Result<Tensor<S>> {
    let n = rec.batch * rec.channels;
    if x.ndim() < 2 || x.dim(0) != n {
        return Err(Error::shape(format!(
            "cannot unfold {:?} into {} × {}",
            x.shape(),
            rec.batch,
            rec.channels
        )));
    }
    let mut shape = vec![rec.batch, rec.channels];
    let tail: Vec<usize> = x.shape()[1..].iter().copied().filter(|&d| d != 1).collect();
    shape.extend(if tail.is_empty() { vec![1] } else { tail });
    x.clone().reshape(&shape)
}

/// A model of the family together with its parameters.
#[derive(Debug, Clone)]
pub struct Model<S: Scalar = f32> {
    pub cfg: ModelConfig,
    pub params: ParamStore<S>,
    pub encoder: Encoder,
    pub mask_token: ParamRef,
    pub transformer: Transformer,
    pub pretrain_head: Option<PretrainHead>,
    pub classifier: Option<Classifier>,
}

impl<S: Scalar> Model<S> {
    fn backbone(
        cfg: &ModelConfig,
        seed: u64,
    ) -> Result<(ParamStore<S>, Encoder, ParamRef, Transformer)> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = substream(seed, streams::INIT);
        let mut b = Builder::new(&mut store, &mut rng);
        let encoder = Encoder::new(&mut b, cfg);
        let mask_token = b.normal("mask_token", &[cfg.d_model], 0.02);
        let transformer = Transformer::new(&mut b, cfg);
        Ok((store, encoder, mask_token, transformer))
    }

    /// Backbone plus the head for `mode`. `modalities` counts decoders in
    /// multimodal mode; `n_mels` sizes the frequency head.
    pub fn for_pretraining(
        cfg: &ModelConfig,
        mode: PretrainMode,
        modalities: usize,
        n_mels: usize,
        seed: u64,
    ) -> Result<Self> {
        let (mut store, encoder, mask_token, transformer) = Self::backbone(cfg, seed)?;
        let mut rng = substream(seed, streams::HEAD_INIT);
        let mut b = Builder::new(&mut store, &mut rng);
        let d = cfg.d_model;
        let head = match mode {
            PretrainMode::P => PretrainHead::Signal(Decoder::new(&mut b, "decoder", cfg, d)),
            PretrainMode::Fp => {
                if n_mels == 0 {
                    return Err(Error::invalid("frequency head needs n_mels >= 1"));
                }
                PretrainHead::Freq(FreqHead::new(&mut b, d, cfg.freq_hidden, n_mels))
            }
            PretrainMode::Mp => {
                if modalities < 2 {
                    return Err(Error::invalid(format!(
                        "multimodal pre-training needs >= 2 modalities, got {modalities}"
                    )));
                }
                let width = modalities * d;
                PretrainHead::Multi(
                    (0..modalities)
                        .map(|m| Decoder::new(&mut b, &format!("decoder{m}"), cfg, width))
                        .collect(),
                )
            }
        };
        Ok(Model {
            cfg: cfg.clone(),
            params: store,
            encoder,
            mask_token,
            transformer,
            pretrain_head: Some(head),
            classifier: None,
        })
    }

    /// Backbone plus a fresh classifier for `channels` inputs.
    pub fn for_finetuning(
        cfg: &ModelConfig,
        n_classes: usize,
        channels: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_classes < 2 || channels == 0 {
            return Err(Error::invalid(format!(
                "need >= 2 classes and >= 1 channel, got {n_classes} and {channels}"
            )));
        }
        let (mut store, encoder, mask_token, transformer) = Self::backbone(cfg, seed)?;
        let mut rng = substream(seed, streams::HEAD_INIT);
        let mut b = Builder::new(&mut store, &mut rng);
        let classifier =
            Classifier::new(&mut b, channels * cfg.d_model, n_classes, cfg.head_dropout);
        Ok(Model {
            cfg: cfg.clone(),
            params: store,
            encoder,
            mask_token,
            transformer,
            pretrain_head: None,
            classifier: Some(classifier),
        })
    }

    /// Restore every parameter whose name and shape match.
    pub fn load_from(&mut self, source: &ParamStore<S>) -> Result<LoadReport> {
        self.params
            .load_named(source.entries().iter().map(|e| (e.name.as_str(), &e.value)))
    }

    pub fn cast<T: Scalar>(&self) -> Model<T> {
        Model {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            mask_token: self.mask_token,
            transformer: self.transformer.clone(),
            pretrain_head: self.pretrain_head.clone(),
            classifier: self.classifier.clone(),
        }
    }

    pub fn patches_for(&self, len: usize) -> usize {
        self.cfg.patches_for(len)
    }

    /// Patch embeddings `[N × P × D]` of single-channel rows `[N × 1 × T]`.
    pub fn encode(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        self.encoder.forward(f, x)
    }

    /// Substitute the mask token where `mask` (length `N·P`) is set, then run the transformer.
    pub fn contextualize(
        &self,
        f: &mut Pass<'_, S>,
        z: Var,
        mask: Option<Vec<bool>>,
    ) -> Result<Var> {
        let z = match mask {
            Some(m) => {
                let tok = f.p(self.mask_token);
                f.graph.mask_replace(z, tok, m)?
            }
            None => z,
        };
        self.transformer.forward(f, z)
    }

    /// Features at the configured tap, `[N × P × D]`.
    pub fn features(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        self.features_at(f, x, self.cfg.tap())
    }

    pub fn features_at(&self, f: &mut Pass<'_, S>, x: Var, tap: FeatureTap) -> Result<Var> {
        let z = self.encode(f, x)?;
        match tap {
            FeatureTap::Encoded => Ok(z),
            FeatureTap::Context => self.contextualize(f, z, None),
        }
    }

    /// Pooled features `[B × C·D]`.
    ///
    /// Rows of `x: [R × 1 × T]` are ordered item-major, then channel, then
    /// window, with `windows[i]` windows for item `i`. Each channel is
    /// averaged over patches and windows, and channels are concatenated.
    pub fn pooled(
        &self,
        f: &mut Pass<'_, S>,
        x: Var,
        channels: usize,
        windows: &[usize],
        tap: FeatureTap,
    ) -> Result<Var> {
        let rows = f.graph.shape(x)[0];
        if channels == 0 || windows.contains(&0) || windows.iter().sum::<usize>() * channels != rows
        {
            return Err(Error::shape(format!(
                "{rows} rows do not match {channels} channels × windows {windows:?}"
            )));
        }
        let h = self.features_at(f, x, tap)?;
        let &[_, p, d] = f.graph.shape(h) else {
            unreachable!()
        };
        let h = f.graph.reshape(h, &[rows * p, d])?;
        let groups: Vec<usize> = windows
            .iter()
            .flat_map(|&w| core::iter::repeat_n(w * p, channels))
            .collect();
        let pooled = f.graph.group_mean(h, &groups)?;
        f.graph.reshape(pooled, &[windows.len(), channels * d])
    }

    /// Classification logits `[B × K]`; see [`Model::pooled`] for the row layout.
    pub fn classify(
        &self,
        f: &mut Pass<'_, S>,
        x: Var,
        channels: usize,
        windows: &[usize],
    ) -> Result<Var> {
        let head = self
            .classifier
            .as_ref()
            .ok_or_else(|| Error::invalid("model has no classification head"))?;
        let feats = self.pooled(f, x, channels, windows, self.cfg.tap())?;
        head.forward(f, feats)
    }

    /// Masked forward of the single-stream pre-training modes. `x: [N × 1 × T]`,
    /// `mask` has `N·P` entries. Returns the signal `[N × 1 × T]` or the mel
    /// prediction `[N × n_mels × P]`.
    pub fn pretrain_forward(&self, f: &mut Pass<'_, S>, x: Var, mask: Vec<bool>) -> Result<Var> {
        let z = self.encode(f, x)?;
        let ctx = self.contextualize(f, z, Some(mask))?;
        match &self.pretrain_head {
            Some(PretrainHead::Signal(d)) => d.forward(f, ctx),
            Some(PretrainHead::Freq(h)) => h.forward(f, ctx),
            Some(PretrainHead::Multi(_)) => Err(Error::invalid(
                "multimodal head needs pretrain_forward_multi",
            )),
            None => Err(Error::invalid("model has no pre-training head")),
        }
    }

    /// Multimodal masked forward. `xs[m]: [N × 1 × T]` share the encoder and
    /// transformer (stacked modality-major along the batch); contexts are
    /// concatenated along features and fed to each modality's decoder.
    pub fn pretrain_forward_multi(
        &self,
        f: &mut Pass<'_, S>,
        xs: &[Var],
        masks: &[Vec<bool>],
    ) -> Result<Vec<Var>> {
        let Some(PretrainHead::Multi(decoders)) = &self.pretrain_head else {
            return Err(Error::invalid("model has no multimodal head"));
        };
        if xs.len() != decoders.len() || masks.len() != xs.len() {
            return Err(Error::shape(format!(
                "{} modalities and {} masks for {} decoders",
                xs.len(),
                masks.len(),
                decoders.len()
            )));
        }
        let n = f.graph.shape(xs[0])[0];
        if xs.iter().any(|&x| f.graph.shape(x) != f.graph.shape(xs[0])) {
            return Err(Error::shape("modalities differ in shape"));
        }
        let stacked = f.graph.concat_rows(xs)?;
        let z = self.encode(f, stacked)?;
        let mask: Vec<bool> = masks.concat();
        let ctx = self.contextualize(f, z, Some(mask))?;
        let mut joint = f.graph.slice_rows(ctx, 0, n)?;
        for m in 1..xs.len() {
            let part = f.graph.slice_rows(ctx, m * n, n)?;
            joint = f.graph.concat_last(joint, part)?;
        }
        decoders.iter().map(|d| d.forward(f, joint)).collect()
    }

    /// Drop the pre-training head.
    pub fn without_pretrain_head(mut self) -> Self {
        self.pretrain_head = None;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Variant;
    use crate::rng::seeded;

    #[test]
    fn fold_layout_and_inverse() {
        let x = Tensor::<f32>::from_vec(&[2, 3, 4], (0..24).map(|v| v as f32).collect()).unwrap();
        let (y, rec) = channel_fold(&x).unwrap();
        assert_eq!(y.shape(), &[6, 1, 4]);
        assert_eq!(&y.data()[4..8], &[4.0, 5.0, 6.0, 7.0]);
        let back = channel_unfold(&y, rec).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn shape_ladder_citrus() {
        let cfg = ModelConfig::new(Variant::Citrus);
        let model = Model::<f32>::for_pretraining(&cfg, PretrainMode::P, 1, 0, 1).unwrap();
        let x = Tensor::<f32>::from_vec(
            &[2, 3, 200],
            (0..1200).map(|v| (v as f32 * 0.01).sin()).collect(),
        )
        .unwrap();
        let (folded, _) = channel_fold(&x).unwrap();
        let mut f = Pass::new(&model.params, false, seeded(0));
        let xv = f.graph.input(folded);
        let z = model.encode(&mut f, xv).unwrap();
        assert_eq!(f.graph.shape(z), &[6, 25, 64]);
        let ctx = model.contextualize(&mut f, z, None).unwrap();
        assert_eq!(f.graph.shape(ctx), &[6, 25, 64]);
        let out = model
            .pretrain_forward(&mut f, xv, vec![false; 150])
            .unwrap();
        assert_eq!(f.graph.shape(out), &[6, 1, 200]);
    }
}
