//! Frequency-aligned fine-tuning: alignment to the pre-training rate,
//! sliding-window feature averaging, and the supervised training loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::autograd::softmax_rows;
use crate::data::SignalSet;
use crate::error::{Error, Result};
use crate::nn::{FeatureTap, LoadReport, Model, ModelConfig, ParamStore, Pass};
use crate::optim::{train_step, Adam};
use crate::rng::{seeded, streams, substream, Rng};
use crate::signal::{interpolate_to_length, resample_linear, window_plan, zero_pad_to, Recording};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignStrategy {
    /// Resample to the pre-training rate, then slide fixed windows.
    ResampleWindows,
    /// Stretch the whole recording to a single pre-training window.
    InterpolateFixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignSpec {
    pub strategy: AlignStrategy,
    pub pretrain_fs: f64,
    pub pretrain_window: usize,
    pub stride: usize,
}

impl Default for AlignSpec {
    fn default() -> Self {
        AlignSpec {
            strategy: AlignStrategy::ResampleWindows,
            pretrain_fs: 100.0,
            pretrain_window: 200,
            stride: 100,
        }
    }
}

impl AlignSpec {
    pub fn for_window(window: usize) -> Self {
        AlignSpec {
            pretrain_window: window,
            stride: window / 2,
            ..Default::default()
        }
    }
}

/// Windows of `[C × pretrain_window]` samples, channel-major.
pub fn align_recording(x: &Recording, spec: &AlignSpec) -> Result<Vec<Vec<f32>>> {
    let w = spec.pretrain_window;
    let c = x.channels();
    let to_f32 = |r: &Recording| r.samples().iter().map(|&v| v as f32).collect::<Vec<f32>>();
    match spec.strategy {
        AlignStrategy::InterpolateFixed => Ok(vec![to_f32(&interpolate_to_length(x, w)?)]),
        AlignStrategy::ResampleWindows => {
            let r = resample_linear(x, spec.pretrain_fs)?;
            if r.len() < w {
                return Ok(vec![to_f32(&zero_pad_to(&r, w)?)]);
            }
            let plan = window_plan(r.len(), w, spec.stride)?;
            Ok(plan
                .offsets
                .iter()
                .map(|&o| {
                    (0..c)
                        .flat_map(|ch| r.channel(ch)[o..o + w].iter().map(|&v| v as f32))
                        .collect()
                })
                .collect())
        }
    }
}

/// One aligned example: its windows and label.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub windows: Vec<Vec<f32>>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSet {
    pub channels: usize,
    pub window: usize,
    pub n_classes: usize,
    pub samples: Vec<AlignedSample>,
}

impl AlignedSet {
    pub fn from_set(set: &SignalSet, spec: &AlignSpec) -> Result<Self> {
        let samples = (0..set.len())
            .map(|i| {
                Ok(AlignedSample {
                    windows: align_recording(&set.recording(i)?, spec)?,
                    label: set.labels[i],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AlignedSet {
            channels: set.channels,
            window: spec.pretrain_window,
            n_classes: set.n_classes,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Input rows `[R × 1 × T]` ordered item, channel, window, plus per-item window counts.
    pub fn batch(&self, items: &[usize]) -> Result<(Tensor<f32>, Vec<usize>)> {
        batch_rows(
            items.iter().map(|&i| &self.samples[i].windows),
            self.channels,
            self.window,
        )
    }
}

fn batch_rows<'a, I>(items: I, channels: usize, window: usize) -> Result<(Tensor<f32>, Vec<usize>)>
where
    I: Iterator<Item = &'a Vec<Vec<f32>>>,
{
    let mut data = Vec::new();
    let mut counts = Vec::new();
    for windows in items {
        if windows.is_empty() {
            return Err(Error::Empty("window list".into()));
        }
        for c in 0..channels {
            for w in windows {
                if w.len() != channels * window {
                    return Err(Error::shape(format!(
                        "window has {} samples, expected {}",
                        w.len(),
                        channels * window
                    )));
                }
                data.extend_from_slice(&w[c * window..(c + 1) * window]);
            }
        }
        counts.push(windows.len());
    }
    let rows = data.len() / window;
    Ok((Tensor::from_vec(&[rows, 1, window], data)?, counts))
}

/// Eval-mode feature vector `[C·D]` averaged over patches and windows.
pub fn embed_windows(
    model: &Model<f32>,
    windows: &[Vec<f32>],
    channels: usize,
    tap: FeatureTap,
) -> Result<Vec<f32>> {
    if windows.is_empty() {
        return Err(Error::Empty("window list".into()));
    }
    let window = windows[0].len() / channels;
    let owned = windows.to_vec();
    let (x, counts) = batch_rows(core::iter::once(&owned), channels, window)?;
    let mut f = Pass::new(&model.params, false, seeded(0));
    let xv = f.graph.input(x);
    let v = model.pooled(&mut f, xv, channels, &counts, tap)?;
    Ok(f.graph.value(v).data().to_vec())
}

/// Items per eval-mode forward pass.
const EVAL_CHUNK: usize = 32;

/// Class probabilities `[n][K]` for every sample, eval mode.
pub fn predict_proba(model: &Model<f32>, set: &AlignedSet) -> Result<Vec<Vec<f64>>> {
    let k = model
        .classifier
        .as_ref()
        .ok_or_else(|| Error::invalid("model has no classification head"))?
        .n_classes();
    let idx: Vec<usize> = (0..set.len()).collect();
    let mut out = Vec::with_capacity(set.len());
    for chunk in idx.chunks(EVAL_CHUNK) {
        let (x, counts) = set.batch(chunk)?;
        let mut f = Pass::new(&model.params, false, seeded(0));
        let xv = f.graph.input(x);
        let logits = model.classify(&mut f, xv, set.channels, &counts)?;
        let l: Vec<f64> = f
            .graph
            .value(logits)
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect();
        out.extend(softmax_rows(&l, k).chunks(k).map(<[f64]>::to_vec));
    }
    Ok(out)
}

/// Class probabilities of a single recording.
pub fn predict(model: &Model<f32>, x: &Recording, spec: &AlignSpec) -> Result<Vec<f64>> {
    let set = AlignedSet {
        channels: x.channels(),
        window: spec.pretrain_window,
        n_classes: model.classifier.as_ref().map_or(0, |c| c.n_classes()),
        samples: vec![AlignedSample {
            windows: align_recording(x, spec)?,
            label: 0,
        }],
    };
    Ok(predict_proba(model, &set)?.remove(0))
}

pub fn accuracy(probs: &[Vec<f64>], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| argmax(p) == y)
        .count();
    hits as f64 / labels.len() as f64
}

/// First index of the largest value.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
    /// Train only the classification head.
    pub linear_probe: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 100,
            batch: 64,
            lr: 1e-4,
            seed: 42,
            linear_probe: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    /// Weights from the epoch with the best validation accuracy.
    pub model: Model<f32>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// `(train_loss, val_acc)` per epoch.
    pub log: Vec<(f64, f64)>,
    pub load_report: Option<LoadReport>,
}

/// Fine-tune a classifier on `train`, selecting the epoch with the best
/// accuracy on `val` (earliest on ties). `init` restores matching weights.
pub fn run_finetune(
    model_cfg: &ModelConfig,
    init: Option<&ParamStore<f32>>,
    train: &AlignedSet,
    val: &AlignedSet,
    cfg: &FinetuneConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<FinetuneOutcome> {
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set".into()));
    }
    if cfg.epochs == 0 || cfg.batch == 0 {
        return Err(Error::invalid("epochs and batch must be >= 1"));
    }
    let labels = train.labels();
    let mut present = labels.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::invalid(
            "training labels contain fewer than two classes",
        ));
    }
    if train.channels != val.channels || train.window != val.window {
        return Err(Error::shape(
            "training and validation sets differ in layout",
        ));
    }
    let n_classes = train
        .n_classes
        .max(val.n_classes)
        .max(present[present.len() - 1] + 1);
    let mut model = Model::<f32>::for_finetuning(model_cfg, n_classes, train.channels, cfg.seed)?;
    let load_report = init.map(|p| model.load_from(p)).transpose()?;
    if cfg.linear_probe {
        model.params.freeze_except(&["head."]);
    }

    let mut adam = Adam::new(cfg.lr);
    let mut shuffle_rng = substream(cfg.seed, streams::SHUFFLE);
    let mut dropout_rng = substream(cfg.seed, streams::DROPOUT);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let val_labels = val.labels();
    let mut best: Option<(usize, f64, ParamStore<f32>)> = None;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let (mut sum, mut weight) = (0.0, 0.0);
        for items in order.chunks(cfg.batch) {
            let (x, counts) = train.batch(items)?;
            let y: Vec<usize> = items.iter().map(|&i| train.samples[i].label).collect();
            let pass_rng = Rng::seed_from_u64(dropout_rng.random());
            let channels = train.channels;
            let loss = train_step(&mut model, &mut adam, pass_rng, |m, f| {
                let xv = f.graph.input(x);
                let logits = m.classify(f, xv, channels, &counts)?;
                f.graph.cross_entropy(logits, &y)
            })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            sum += loss * items.len() as f64;
            weight += items.len() as f64;
            step += 1;
        }
        let train_loss = sum / weight;
        let val_acc = accuracy(&predict_proba(&model, val)?, &val_labels);
        on_epoch(epoch, train_loss, val_acc);
        log.push((train_loss, val_acc));
        if best.as_ref().is_none_or(|b| val_acc > b.1) {
            best = Some((epoch, val_acc, model.params.clone()));
        }
    }
    let (best_epoch, best_val_acc, params) = best.expect("at least one epoch");
    model.params = params;
    model.params.unfreeze_all();
    Ok(FinetuneOutcome {
        model,
        best_epoch,
        best_val_acc,
        log,
        load_report,
    })
}
