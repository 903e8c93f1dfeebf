use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::folds::{grouped_folds, stratified_folds, subsample_regime, train_val_split, FoldPlan};
use super::metrics::metric_suite;
use super::records::RunRecord;
use crate::data::SignalSet;
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, ParamStore};
use crate::transfer::{predict_proba, run_finetune, AlignSpec, AlignedSet, FinetuneConfig};

/// Model seeds of the evaluation grid.
pub const MODEL_SEEDS: [u64; 4] = [42, 1337, 1212, 9999];
/// Seed of fold generation, regime subsampling and splitting.
pub const DATA_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub k: usize,
    pub data_seed: u64,
    pub model_seeds: Vec<u64>,
    pub regime_pct: f64,
    /// Hold out subjects instead of stratifying windows.
    pub grouped: bool,
    pub train_frac: f64,
    /// Restrict to these folds (all when `None`).
    pub folds: Option<Vec<usize>>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            k: 10,
            data_seed: DATA_SEED,
            model_seeds: MODEL_SEEDS.to_vec(),
            regime_pct: 100.0,
            grouped: false,
            train_frac: 0.75,
            folds: None,
        }
    }
}

impl ProtocolConfig {
    pub fn plan(&self, set: &SignalSet) -> Result<FoldPlan> {
        if self.grouped {
            let groups = set
                .subjects
                .as_ref()
                .ok_or_else(|| Error::invalid("grouped folds need subject ids"))?;
            grouped_folds(groups, self.k, self.data_seed)
        } else {
            stratified_folds(&set.labels, self.k, self.data_seed)
        }
    }

    pub fn fold_list(&self) -> Vec<usize> {
        self.folds.clone().unwrap_or_else(|| (0..self.k).collect())
    }
}

/// Train and validation indices of one fold under the configured regime.
pub fn fold_split(
    set: &SignalSet,
    plan: &FoldPlan,
    fold: usize,
    cfg: &ProtocolConfig,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if fold >= plan.k {
        return Err(Error::invalid(format!(
            "fold {fold} outside {} folds",
            plan.k
        )));
    }
    let pool = plan.rest(fold);
    let groups = if cfg.grouped {
        set.subjects.as_deref()
    } else {
        None
    };
    let kept = subsample_regime(&pool, &set.labels, groups, cfg.regime_pct, cfg.data_seed)?;
    train_val_split(&kept, &set.labels, cfg.train_frac, cfg.data_seed)
}

/// Names stamped on records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLabels {
    pub dataset: String,
    pub model: String,
    pub variant: String,
}

/// Everything one grid evaluation needs.
pub struct Evaluation<'a> {
    pub model: &'a ModelConfig,
    pub init: Option<&'a ParamStore<f32>>,
    pub align: &'a AlignSpec,
    pub finetune: &'a FinetuneConfig,
    pub protocol: &'a ProtocolConfig,
    pub labels: RunLabels,
}

impl AlignedSet {
    pub fn subset(&self, indices: &[usize]) -> AlignedSet {
        AlignedSet {
            channels: self.channels,
            window: self.window,
            n_classes: self.n_classes,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Fine-tune and test one (fold, seed) cell.
pub fn run_cell(
    ev: &Evaluation<'_>,
    set: &SignalSet,
    aligned: &AlignedSet,
    plan: &FoldPlan,
    fold: usize,
    seed: u64,
) -> Result<RunRecord> {
    let (train, val) = fold_split(set, plan, fold, ev.protocol)?;
    let test = plan.test(fold);
    let cfg = FinetuneConfig {
        seed,
        ..ev.finetune.clone()
    };
    let out = run_finetune(
        ev.model,
        ev.init,
        &aligned.subset(&train),
        &aligned.subset(&val),
        &cfg,
        |_, _, _| {},
    )?;
    let test_set = aligned.subset(&test);
    let probs = predict_proba(&out.model, &test_set)?;
    let metrics = metric_suite(&test_set.labels(), &probs)?;
    Ok(RunRecord {
        dataset: ev.labels.dataset.clone(),
        model: ev.labels.model.clone(),
        variant: ev.labels.variant.clone(),
        regime_pct: ev.protocol.regime_pct,
        fold,
        seed,
        metrics,
    })
}

/// Every configured fold × model seed, in fold-major order. Each record is
/// also handed to `on_record` as soon as it exists.
pub fn evaluate(
    ev: &Evaluation<'_>,
    set: &SignalSet,
    mut on_record: impl FnMut(&RunRecord),
) -> Result<Vec<RunRecord>> {
    set.validate()?;
    let plan = ev.protocol.plan(set)?;
    let aligned = AlignedSet::from_set(set, ev.align)?;
    let mut out = Vec::new();
    for fold in ev.protocol.fold_list() {
        for &seed in &ev.protocol.model_seeds {
            let r = run_cell(ev, set, &aligned, &plan, fold, seed)?;
            on_record(&r);
            out.push(r);
        }
    }
    Ok(out)
}

/// Records grouped as `grid[fold][seed]` in the given fold and seed order;
/// `None` where a cell is missing.
pub fn grid_of(
    records: &[RunRecord],
    folds: &[usize],
    seeds: &[u64],
) -> Vec<Vec<Option<super::Metrics>>> {
    let mut grid = vec![vec![None; seeds.len()]; folds.len()];
    for r in records {
        if let (Some(f), Some(s)) = (
            folds.iter().position(|&f| f == r.fold),
            seeds.iter().position(|&s| s == r.seed),
        ) {
            grid[f][s] = Some(r.metrics);
        }
    }
    grid
}
