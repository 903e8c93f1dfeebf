//! The stages behind each CLI subcommand.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use citrus_core::data::SignalSet;
use citrus_core::eval::{fold_split, run_cell, Evaluation, RunLabels, RunRecord};
use citrus_core::nn::{Model, ParamStore};
use citrus_core::pretrain::run_pretraining;
use citrus_core::synth::SyntheticSpec;
use citrus_core::transfer::{
    align_recording, predict_proba, run_finetune, AlignSpec, AlignStrategy, AlignedSet,
    FinetuneOutcome,
};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::dataset::{dataset_hash, load_dataset, save_dataset};
use crate::error::{Result, WbError};
use crate::fsutil::read_string;
use crate::records_io::append_records;

pub fn log_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

/// Append-only text log; every line is also echoed to stderr.
pub struct TrainLog {
    file: std::fs::File,
}

impl TrainLog {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| WbError::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| WbError::io(path, e))?;
        Ok(TrainLog { file })
    }

    pub fn line(&mut self, text: &str) {
        eprintln!("{text}");
        if let Err(e) = writeln!(self.file, "{text}") {
            log::warn!("training log write failed: {e}");
        }
    }
}

pub fn synth(spec_path: &Path, out: &Path) -> Result<SignalSet> {
    let spec: SyntheticSpec =
        serde_json::from_str(&read_string(spec_path)?).map_err(|e| WbError::Json {
            path: spec_path.into(),
            source: e,
        })?;
    let set = spec.generate()?;
    save_dataset(&set, out)?;
    Ok(set)
}

/// Windows of the pre-training length at the pre-training rate. A set
/// already in that shape is returned unchanged.
pub fn pretraining_windows(set: &SignalSet, cfg: &RunConfig) -> Result<SignalSet> {
    let spec = AlignSpec {
        strategy: AlignStrategy::ResampleWindows,
        ..cfg.align_spec()
    };
    if set.fs == spec.pretrain_fs && set.window_len == spec.pretrain_window {
        return Ok(set.clone());
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut subjects = Vec::new();
    for i in 0..set.len() {
        for w in align_recording(&set.recording(i)?, &spec)? {
            data.extend(w);
            labels.push(set.labels[i]);
            subjects.push(set.subject(i).unwrap_or(0));
        }
    }
    Ok(SignalSet {
        fs: spec.pretrain_fs,
        window_len: spec.pretrain_window,
        data,
        labels,
        subjects: set.subjects.as_ref().map(|_| subjects),
        ..set.clone()
    })
}

pub struct PretrainSummary {
    pub epoch_losses: Vec<f64>,
    pub checkpoint: Checkpoint,
}

pub fn pretrain(cfg: &RunConfig, data: &Path, out: &Path) -> Result<PretrainSummary> {
    let set = pretraining_windows(&load_dataset(data)?, cfg)?;
    let mut log = TrainLog::create(&log_path(out))?;
    log.line(&format!("# config {}", cfg.hash_hex()));
    let outcome = run_pretraining(&cfg.model(), &cfg.pretrain(), &set, |epoch, loss| {
        log.line(&format!("epoch,{epoch},loss,{loss}"));
    })?;
    let checkpoint = Checkpoint::from_params(&outcome.model.params, cfg.hash());
    save_checkpoint(&checkpoint, out)?;
    Ok(PretrainSummary {
        epoch_losses: outcome.epoch_losses,
        checkpoint,
    })
}

/// Pre-training mode tag of a checkpoint, read off its head parameter names.
pub fn variant_of(ckpt: Option<&Checkpoint>) -> String {
    let Some(c) = ckpt else { return "s".into() };
    if c.names().any(|n| n.starts_with("freq_head.")) {
        "fp".into()
    } else if c.names().any(|n| n.starts_with("decoder0.")) {
        "mp".into()
    } else {
        "p".into()
    }
}

/// Parameters of `ckpt` laid into a store; names not in the backbone are kept
/// so that the load report can list them as dropped.
pub fn init_store(ckpt: &Checkpoint) -> Result<ParamStore<f32>> {
    let mut store = ParamStore::new();
    for (name, t) in &ckpt.entries {
        store.insert(name.clone(), t.clone());
    }
    Ok(store)
}

pub struct FinetuneArgs<'a> {
    pub cfg: &'a RunConfig,
    pub data: &'a Path,
    pub init: Option<&'a Path>,
    pub fold: usize,
    pub regime: Option<f64>,
    pub seed: u64,
    pub out: &'a Path,
    pub record: &'a Path,
}

pub fn finetune(args: &FinetuneArgs<'_>) -> Result<(FinetuneOutcome, RunRecord)> {
    let mut cfg = args.cfg.clone();
    if let Some(r) = args.regime {
        cfg.regime_pct = r;
    }
    let set = load_dataset(args.data)?;
    let ckpt = args.init.map(load_checkpoint).transpose()?;
    let init = ckpt.as_ref().map(init_store).transpose()?;
    let protocol = cfg.protocol();
    let plan = protocol.plan(&set)?;
    let (train, val) = fold_split(&set, &plan, args.fold, &protocol)?;
    let aligned = AlignedSet::from_set(&set, &cfg.align_spec())?;
    let mut log = TrainLog::create(&log_path(args.out))?;
    log.line(&format!("# config {}", cfg.hash_hex()));
    let out = run_finetune(
        &cfg.model(),
        init.as_ref(),
        &aligned.subset(&train),
        &aligned.subset(&val),
        &cfg.finetune(args.seed),
        |epoch, loss, acc| log.line(&format!("epoch,{epoch},train_loss,{loss},val_acc,{acc}")),
    )?;
    if let Some(report) = &out.load_report {
        log::info!(
            "restored {} tensors, dropped {:?}, fresh {:?}",
            report.restored.len(),
            report.dropped,
            report.fresh
        );
    }
    save_checkpoint(
        &Checkpoint::from_params(&out.model.params, cfg.hash()),
        args.out,
    )?;
    let test = aligned.subset(&plan.test(args.fold));
    let probs = predict_proba(&out.model, &test)?;
    let record = RunRecord {
        dataset: set.name.clone(),
        model: cfg.record_model_name(),
        variant: variant_of(ckpt.as_ref()),
        regime_pct: cfg.regime_pct,
        fold: args.fold,
        seed: args.seed,
        metrics: citrus_core::eval::metric_suite(&test.labels(), &probs)?,
    };
    append_records(
        args.record,
        std::slice::from_ref(&record),
        &dataset_hash(args.data)?,
        &cfg.hash_hex(),
    )?;
    Ok((out, record))
}

/// Worker count from `CITRUS_THREADS` (default 1).
pub fn worker_count() -> usize {
    std::env::var("CITRUS_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// The full fold × seed grid. Cells run on up to `workers` threads, each
/// into its own slot; records are appended once, in fold-major order.
pub fn evaluate(
    cfg: &RunConfig,
    data: &Path,
    init: Option<&Path>,
    record: &Path,
    workers: usize,
) -> Result<Vec<RunRecord>> {
    let set = load_dataset(data)?;
    let ckpt = init.map(load_checkpoint).transpose()?;
    let init_params = ckpt.as_ref().map(init_store).transpose()?;
    let model_cfg = cfg.model();
    let align = cfg.align_spec();
    let finetune = cfg.finetune(cfg.seed);
    let protocol = cfg.protocol();
    let ev = Evaluation {
        model: &model_cfg,
        init: init_params.as_ref(),
        align: &align,
        finetune: &finetune,
        protocol: &protocol,
        labels: RunLabels {
            dataset: set.name.clone(),
            model: cfg.record_model_name(),
            variant: variant_of(ckpt.as_ref()),
        },
    };
    let plan = protocol.plan(&set)?;
    let aligned = AlignedSet::from_set(&set, &align)?;
    let cells: Vec<(usize, u64)> = protocol
        .fold_list()
        .into_iter()
        .flat_map(|f| protocol.model_seeds.iter().map(move |&s| (f, s)))
        .collect();
    let slots: Vec<Mutex<Option<citrus_core::Result<RunRecord>>>> =
        cells.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(cells.len()) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("queue lock");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(fold, seed)) = cells.get(i) else {
                    break;
                };
                let r = run_cell(&ev, &set, &aligned, &plan, fold, seed);
                if let Ok(rec) = &r {
                    eprintln!(
                        "fold {fold} seed {seed}: acc {:.2} roc {:.2} prc {:.2}",
                        rec.metrics.acc, rec.metrics.roc, rec.metrics.prc
                    );
                }
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let records = slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("slot lock")
                .expect("every cell ran")
                .map_err(WbError::from)
        })
        .collect::<Result<Vec<_>>>()?;
    append_records(record, &records, &dataset_hash(data)?, &cfg.hash_hex())?;
    Ok(records)
}

/// Fresh fine-tuning model for `cfg` with `ckpt` applied, for inspection.
pub fn model_from_checkpoint(
    cfg: &RunConfig,
    n_classes: usize,
    channels: usize,
    ckpt: &Checkpoint,
) -> Result<Model<f32>> {
    let mut model = Model::for_finetuning(&cfg.model(), n_classes, channels, cfg.seed)?;
    ckpt.apply(&mut model)?;
    Ok(model)
}
