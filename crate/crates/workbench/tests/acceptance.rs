//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! The transfer experiments (7 and 8) dominate the runtime; they share one
//! pre-trained checkpoint, whose cost is charged to whichever needs it first.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use citrus_core::data::SignalSet;
use citrus_core::eval::{
    auroc, average_precision, evaluate, grouped_folds, stratified_folds, subsample_regime,
    wilcoxon_one_sided, Evaluation, ProtocolConfig, RunLabels, RunRecord, EXACT_MAX,
};
use citrus_core::masking::{sample_block_mask, sample_multimodal_masks, sample_unit_mask};
use citrus_core::nn::{Model, ModelConfig, ParamStore, Pass, PretrainMode, Variant};
use citrus_core::pretrain::{run_pretraining, PretrainConfig};
use citrus_core::rng::{normal, seeded};
use citrus_core::signal::{
    mel_spectrogram, resample_linear, zscore_over_time, MelConfig, Recording,
};
use citrus_core::synth::SyntheticSpec;
use citrus_core::transfer::{AlignSpec, AlignStrategy, FinetuneConfig};
use citrus_core::Tensor;
use citrus_workbench::cli::main_with_args;
use citrus_workbench::records_io::read_records;
use rand::RngExt;
use support::grad::{model_cases, operator_cases};
use support::oracles::{
    enumerated_p, legal_masks, mel_oracle, pairwise_auroc, peak_frequency, random_config, rel_err,
    stepwise_ap,
};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

// 1. Shape chain.

fn shape_chain() -> Check {
    let mut seen = Vec::new();
    for (t, p, frames) in [(200usize, 25usize, 26usize), (3000, 375, 376)] {
        let cfg = ModelConfig {
            pretrain_window: t,
            ..ModelConfig::new(Variant::Citrus)
        };
        let model = Model::<f32>::for_pretraining(&cfg, PretrainMode::P, 1, 0, 1)
            .map_err(|e| e.to_string())?;
        let mut f = Pass::new(&model.params, false, seeded(0));
        let x =
            Tensor::from_vec(&[1, 1, t], (0..t).map(|i| (i as f32 * 0.1).sin()).collect()).unwrap();
        let xv = f.graph.input(x);
        let z = model.encode(&mut f, xv).map_err(|e| e.to_string())?;
        let got_p = f.graph.shape(z)[1];
        let y = model
            .pretrain_forward(&mut f, xv, vec![false; got_p])
            .map_err(|e| e.to_string())?;
        let got_t = f.graph.shape(y)[2];
        let mel = MelConfig::for_window(t, cfg.patch_stride());
        let signal: Vec<f64> = (0..t).map(|i| (i as f64 * 0.3).sin()).collect();
        let spec = mel_spectrogram(&signal, 100.0, &mel).map_err(|e| e.to_string())?;
        let got_frames = spec.len() / mel.n_mels;
        ensure(got_p == p, || format!("T={t}: {got_p} patches, want {p}"))?;
        ensure(got_t == t, || {
            format!("T={t}: decoder returned {got_t} samples")
        })?;
        ensure(got_frames == frames && mel.frame_count(t) == frames, || {
            format!("T={t}: {got_frames} mel frames, want {frames}")
        })?;
        seen.push(format!("T={t}: P={got_p}, frames={got_frames}"));
    }
    Ok(seen.join("; "))
}

// 2. DSP oracles.

fn dsp() -> Check {
    let mut rng = seeded(2024);
    let mut worst_mel = 0.0f64;
    for case in 0..100 {
        let cfg = random_config(&mut rng);
        let min_len = if cfg.center { 1 } else { cfg.n_fft };
        let len = rng.random_range(min_len..=512);
        let x: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
        let got = mel_spectrogram(&x, 100.0, &cfg).map_err(|e| e.to_string())?;
        let e = rel_err(&got, &mel_oracle(&x, 100.0, &cfg));
        ensure(e < 1e-5, || {
            format!("mel case {case}: relative error {e:.3e}")
        })?;
        worst_mel = worst_mel.max(e);
    }

    let mut worst_hz = 0.0f64;
    for (fs_in, fs_out) in [
        (64.0f64, 100.0f64),
        (250.0, 100.0),
        (100.0, 128.0),
        (50.0, 100.0),
    ] {
        for _ in 0..3 {
            let f0 = rng.random_range(1.0..(fs_in.min(fs_out) / 2.0 * 0.6));
            let n = (8.0 * fs_in) as usize;
            let x: Vec<f64> = (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 / fs_in).sin())
                .collect();
            let y = resample_linear(&Recording::new(x, 1, fs_in).unwrap(), fs_out)
                .map_err(|e| e.to_string())?;
            let got = peak_frequency(y.samples(), fs_out);
            ensure((got - f0).abs() < 0.05, || {
                format!("{fs_in}->{fs_out} Hz: {f0:.3} Hz became {got:.3} Hz")
            })?;
            worst_hz = worst_hz.max((got - f0).abs());
        }
    }

    let mut worst_z = 0.0f64;
    for _ in 0..200 {
        let (rows, cols) = (rng.random_range(1..6), rng.random_range(3..40));
        let x: Vec<f64> = (0..rows * cols).map(|_| normal(&mut rng)).collect();
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let mut zx = x.clone();
        zscore_over_time(&mut zx, rows, cols);
        let mut zy: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        zscore_over_time(&mut zy, rows, cols);
        let w = zx
            .iter()
            .zip(&zy)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        ensure(w < 1e-5, || {
            format!("z-score not affine invariant: {w:.3e}")
        })?;
        worst_z = worst_z.max(w);
    }
    Ok(format!(
        "mel max rel err {worst_mel:.1e} over 100 signals; resample max drift {worst_hz:.3} Hz; z-score max diff {worst_z:.1e}"
    ))
}

// 3. Gradients.

fn gradients() -> Check {
    let models = model_cases();
    let ops = operator_cases();
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut largest = 0;
    for c in models.iter().chain(&ops) {
        c.verdict()?;
        checked += c.reports.len();
        worst = worst.max(c.worst());
        largest = largest.max(c.weights);
    }
    let reached = |prefix: &str| models.iter().any(|c| c.reached(prefix));
    for prefix in [
        "encoder.block0.conv1",
        "encoder.block1.shortcut",
        "encoder.mlp0",
        "encoder.embed",
        "transformer.layer0.q",
        "transformer.layer0.ff2",
        "decoder.block1.conv",
        "decoder.linear",
        "decoder.mlp2",
        "decoder0.proj",
        "decoder1.block0.conv",
        "freq_head.fc1",
        "head.linear",
    ] {
        ensure(reached(prefix), || format!("no gradient reached {prefix}"))?;
    }
    Ok(format!(
        "{checked} tensors in {} cases, max rel err {worst:.1e}, largest instance {largest} weights",
        models.len() + ops.len()
    ))
}

// 4. Masking.

fn joint_rates(block: usize, draws: u64) -> (f64, f64, f64) {
    let p = 25;
    let mut rng = seeded(77);
    let (mut a, mut b, mut both) = (vec![0usize; p], vec![0usize; p], 0usize);
    for _ in 0..draws {
        let m = sample_multimodal_masks(p, 0.5, block, 2, &mut rng).unwrap();
        for i in 0..p {
            a[i] += m[0].masked[i] as usize;
            b[i] += m[1].masked[i] as usize;
            both += (m[0].masked[i] && m[1].masked[i]) as usize;
        }
    }
    let d = draws as f64;
    let joint = both as f64 / (d * p as f64);
    let ratio = (a.iter().sum::<usize>() + b.iter().sum::<usize>()) as f64 / (2.0 * d * p as f64);
    let product = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| x as f64 / d * y as f64 / d)
        .sum::<f64>()
        / p as f64;
    (joint, ratio, product)
}

fn masking() -> Check {
    let legal: BTreeSet<Vec<bool>> = legal_masks(25, 5, 3)
        .into_iter()
        .filter(|m| m.iter().filter(|&&v| v).count() >= 13)
        .collect();
    for seed in 0..10_000u64 {
        let m = sample_block_mask(25, 0.5, 5, &mut seeded(seed)).map_err(|e| e.to_string())?;
        let c = m.count();
        ensure((13..=15).contains(&c), || {
            format!("seed {seed}: {c} patches masked")
        })?;
        ensure(legal.contains(&m.masked), || {
            format!("seed {seed}: illegal run structure {:?}", m.runs())
        })?;
    }
    for seed in 0..1000u64 {
        let m = sample_unit_mask(25, 0.5, &mut seeded(seed)).map_err(|e| e.to_string())?;
        ensure(m.count() == 13, || {
            format!("unit mask seed {seed}: {} masked", m.count())
        })?;
    }
    let (unit, _, _) = joint_rates(1, 10_000);
    ensure((unit - 0.25).abs() < 0.05, || {
        format!("unit joint rate {unit:.4}")
    })?;
    let (joint, ratio, product) = joint_rates(5, 10_000);
    ensure((joint - ratio * ratio).abs() < 0.05, || {
        format!("block joint rate {joint:.4} vs ratio² {:.4}", ratio * ratio)
    })?;
    ensure((joint - product).abs() < 0.01, || {
        format!("block joint rate {joint:.4} vs marginal product {product:.4}")
    })?;
    Ok(format!(
        "10^4 block masks legal; joint rate unit {unit:.3} (ratio² 0.25), block {joint:.3} (realized ratio² {:.3}, marginal product {product:.3})",
        ratio * ratio
    ))
}

// 5. Metric and test oracles.

fn statistics() -> Check {
    let mut rng = seeded(5);
    let mut instances = 0;
    for n in 1..=50usize {
        for _ in 0..40 {
            let s: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..12) as f64 / 11.0)
                .collect();
            let pos: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(x), Some(y)) => (x - y).abs() < 1e-12,
                (x, y) => x == y,
            };
            ensure(same(auroc(&s, &pos), pairwise_auroc(&s, &pos)), || {
                format!("AUROC differs at n={n}")
            })?;
            ensure(
                same(average_precision(&s, &pos), stepwise_ap(&s, &pos)),
                || format!("AP differs at n={n}"),
            )?;
            instances += 1;
        }
    }
    let mut exact_cases = 0;
    for n in 5..=EXACT_MAX {
        for _ in 0..40 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4..=4) as f64).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|v| v + [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0][rng.random_range(0..6)])
                .collect();
            let got = wilcoxon_one_sided(&x, &y).map_err(|e| e.to_string())?;
            let (_, p) = enumerated_p(&x, &y);
            ensure(got.exact && (got.p - p).abs() < 1e-12, || {
                format!("Wilcoxon n={n}: {} vs enumeration {p}", got.p)
            })?;
            exact_cases += 1;
        }
    }
    let w = wilcoxon_one_sided(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0; 5]).map_err(|e| e.to_string())?;
    ensure(w.p == 0.03125, || format!("n=5 all positive: p={}", w.p))?;
    Ok(format!("{instances} AUROC/AP instances exact; {exact_cases} exact Wilcoxon cases (n 5..={EXACT_MAX}); n=5 p={}", w.p))
}

// 6. Protocol.

fn tiny_model(window: usize) -> ModelConfig {
    ModelConfig {
        conv_base_channels: 2,
        conv_layers: 2,
        d_model: 8,
        ff_dim: 8,
        n_heads: 2,
        n_layers: 1,
        pretrain_window: window,
        ..ModelConfig::new(Variant::Citrus)
    }
}

fn protocol() -> Check {
    let set = SyntheticSpec {
        n_subjects: 5,
        n_windows: 1000,
        seed: 6,
        ..Default::default()
    }
    .generate()
    .map_err(|e| e.to_string())?;
    let subjects = set.subjects.clone().unwrap();
    let n = set.len();
    for grouped in [false, true] {
        let plan = if grouped {
            grouped_folds(&subjects, 5, 42)
        } else {
            stratified_folds(&set.labels, 10, 42)
        }
        .map_err(|e| e.to_string())?;
        let mut all: Vec<usize> = (0..plan.k).flat_map(|f| plan.test(f)).collect();
        all.sort_unstable();
        ensure(all == (0..n).collect::<Vec<_>>(), || {
            "plan is not a partition".into()
        })?;
        let again = if grouped {
            grouped_folds(&subjects, 5, 42)
        } else {
            stratified_folds(&set.labels, 10, 42)
        };
        ensure(again.as_ref() == Ok(&plan), || {
            "plan not deterministic".into()
        })?;
        if grouped {
            let mut home = BTreeMap::new();
            for (i, &s) in subjects.iter().enumerate() {
                ensure(
                    *home.entry(s).or_insert(plan.assignments[i]) == plan.assignments[i],
                    || format!("subject {s} split"),
                )?;
            }
        }
    }
    let ten = SyntheticSpec {
        n_windows: 200,
        seed: 6,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let plan = grouped_folds(ten.subjects.as_ref().unwrap(), 10, 42).map_err(|e| e.to_string())?;
    ensure(plan.sizes().iter().all(|&s| s > 0), || {
        "empty subject fold".into()
    })?;

    let idx: Vec<usize> = (0..n).collect();
    let kept =
        subsample_regime(&idx, &set.labels, Some(&subjects), 1.0, 42).map_err(|e| e.to_string())?;
    let cells: BTreeSet<(u32, usize)> =
        kept.iter().map(|&i| (subjects[i], set.labels[i])).collect();
    let all_cells: BTreeSet<(u32, usize)> = (0..n).map(|i| (subjects[i], set.labels[i])).collect();
    ensure(cells == all_cells, || {
        format!(
            "1% regime kept {} of {} (subject, class) cells",
            cells.len(),
            all_cells.len()
        )
    })?;

    let small = SyntheticSpec {
        bands: vec![vec![[3.0, 4.0]], vec![[9.0, 10.0]]],
        channels: 2,
        window_len: 32,
        fs: 32.0,
        n_windows: 60,
        seed: 4,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let model = tiny_model(32);
    let align = AlignSpec {
        pretrain_fs: 32.0,
        pretrain_window: 32,
        stride: 16,
        ..Default::default()
    };
    let finetune = FinetuneConfig {
        epochs: 1,
        batch: 16,
        ..Default::default()
    };
    let protocol = ProtocolConfig::default();
    let ev = Evaluation {
        model: &model,
        init: None,
        align: &align,
        finetune: &finetune,
        protocol: &protocol,
        labels: RunLabels {
            dataset: "small".into(),
            model: "CiTrus".into(),
            variant: "s".into(),
        },
    };
    let records = evaluate(&ev, &small, |_| {}).map_err(|e| e.to_string())?;
    let keys: BTreeSet<(usize, u64)> = records.iter().map(|r| r.pair_key()).collect();
    ensure(records.len() == 40 && keys.len() == 40, || {
        format!("{} records, {} distinct", records.len(), keys.len())
    })?;
    Ok(format!(
        "plans are deterministic partitions; 1% regime keeps {} samples covering all {} cells; evaluate emitted {} records",
        kept.len(),
        all_cells.len(),
        records.len()
    ))
}

// 7 and 8. Transfer experiments.

fn downstream_spec() -> SyntheticSpec {
    SyntheticSpec {
        name: "toy4".into(),
        n_classes: 4,
        bands: vec![
            vec![[2.0, 4.0]],
            vec![[7.0, 9.0]],
            vec![[12.0, 14.0]],
            vec![[17.0, 19.0]],
        ],
        n_subjects: 20,
        subject_jitter: 1.0,
        subject_level_labels: true,
        noise_sigma: 0.5,
        channels: 2,
        window_len: 200,
        fs: 100.0,
        n_windows: 2000,
        seed: 1,
        ..Default::default()
    }
}

/// Same generator as the downstream set, different seed and size: no window is shared.
fn pretraining_corpus() -> SignalSet {
    SyntheticSpec {
        name: "corpus".into(),
        n_windows: 600,
        seed: 2,
        ..downstream_spec()
    }
    .generate()
    .unwrap()
}

static CORPUS: OnceLock<SignalSet> = OnceLock::new();
static PRETRAINED_P: OnceLock<ParamStore<f32>> = OnceLock::new();

fn pretrained(mode: PretrainMode) -> ParamStore<f32> {
    let build = || {
        let cfg = PretrainConfig {
            mode,
            epochs: 20,
            batch: 32,
            seed: 7,
            ..Default::default()
        };
        let corpus = CORPUS.get_or_init(pretraining_corpus);
        let out = run_pretraining(&ModelConfig::new(Variant::Citrus), &cfg, corpus, |e, l| {
            if e % 5 == 4 {
                eprintln!("    pretrain ({}) epoch {} loss {l:.4}", mode.tag(), e + 1);
            }
        })
        .expect("pre-training");
        out.model.params
    };
    match mode {
        PretrainMode::P => PRETRAINED_P.get_or_init(build).clone(),
        _ => build(),
    }
}

fn run_grid(
    set: &SignalSet,
    init: Option<&ParamStore<f32>>,
    align: &AlignSpec,
    protocol: &ProtocolConfig,
    variant: &str,
) -> Result<Vec<RunRecord>, String> {
    let model = ModelConfig::new(Variant::Citrus);
    let finetune = FinetuneConfig {
        epochs: 30,
        ..Default::default()
    };
    let ev = Evaluation {
        model: &model,
        init,
        align,
        finetune: &finetune,
        protocol,
        labels: RunLabels {
            dataset: set.name.clone(),
            model: "CiTrus".into(),
            variant: variant.into(),
        },
    };
    evaluate(&ev, set, |r| {
        eprintln!(
            "    {variant} fold {} seed {}: acc {:.1}",
            r.fold, r.seed, r.metrics.acc
        )
    })
    .map_err(|e| e.to_string())
}

fn accs(records: &[RunRecord]) -> Vec<f64> {
    records.iter().map(|r| r.metrics.acc).collect()
}

fn transfer() -> Check {
    let set = downstream_spec().generate().map_err(|e| e.to_string())?;
    let protocol = ProtocolConfig {
        regime_pct: 1.0,
        grouped: true,
        model_seeds: vec![42, 1337],
        folds: Some(vec![0, 1, 2]),
        ..Default::default()
    };
    let align = AlignSpec::default();
    let scratch = accs(&run_grid(&set, None, &align, &protocol, "s")?);
    let mut summary = vec![format!("s {:.2}", mean(&scratch))];
    let mut failures = Vec::new();
    for mode in [PretrainMode::P, PretrainMode::Fp] {
        let init = pretrained(mode);
        let got = accs(&run_grid(&set, Some(&init), &align, &protocol, mode.tag())?);
        let p = wilcoxon_one_sided(&got, &scratch)
            .map_err(|e| e.to_string())?
            .p;
        let gain = mean(&got) - mean(&scratch);
        summary.push(format!(
            "{} {:.2} (+{gain:.2}, p={p:.4})",
            mode.tag(),
            mean(&got)
        ));
        if gain < 5.0 || p >= 0.1 {
            failures.push(mode.tag());
        }
    }
    let line = format!("mean acc at 1%: {}", summary.join(", "));
    if failures.is_empty() {
        Ok(line)
    } else {
        Err(format!("{line}; short for {failures:?}"))
    }
}

fn alignment() -> Check {
    let band = |f: f64| vec![[f - 0.5, f + 0.5]];
    // 13 and 17 Hz fold onto 7 and 3 Hz when a 10 s, 64 Hz recording is
    // squeezed into 200 samples read at 100 Hz.
    let set = SyntheticSpec {
        name: "alias".into(),
        n_classes: 4,
        bands: vec![band(3.0), band(7.0), band(13.0), band(17.0)],
        n_subjects: 1,
        noise_sigma: 0.3,
        channels: 1,
        window_len: 640,
        fs: 64.0,
        n_windows: 400,
        seed: 3,
        ..Default::default()
    }
    .generate()
    .map_err(|e| e.to_string())?;
    let protocol = ProtocolConfig {
        regime_pct: 10.0,
        grouped: false,
        model_seeds: vec![42, 1337],
        folds: Some(vec![0, 1, 2]),
        ..Default::default()
    };
    let init = pretrained(PretrainMode::P);
    let interp = AlignSpec {
        strategy: AlignStrategy::InterpolateFixed,
        ..Default::default()
    };
    let windows = AlignSpec::default();
    let a = mean(&accs(&run_grid(
        &set,
        Some(&init),
        &interp,
        &protocol,
        "interpolate",
    )?));
    let b = mean(&accs(&run_grid(
        &set,
        Some(&init),
        &windows,
        &protocol,
        "windows",
    )?));
    let line = format!(
        "mean acc at 10%: windows {b:.2}, interpolate {a:.2} (+{:.2})",
        b - a
    );
    if b - a >= 3.0 {
        Ok(line)
    } else {
        Err(line)
    }
}

// 9. End-to-end determinism through the CLI.

fn cli(args: &[&str]) -> Result<(), String> {
    match main_with_args(std::iter::once("citrus").chain(args.iter().copied())) {
        0 => Ok(()),
        code => Err(format!("citrus {} exited with {code}", args.join(" "))),
    }
}

fn pipeline(dir: &Path) -> Result<(Vec<RunRecord>, Vec<u8>), String> {
    let path = |name: &str| dir.join(name).to_str().unwrap().to_string();
    std::fs::write(
        dir.join("spec.json"),
        r#"{"name": "e2e", "n_classes": 2, "bands": [[[4.0, 6.0]], [[14.0, 16.0]]], "channels": 2,
            "window_len": 200, "fs": 100.0, "n_windows": 120, "noise_sigma": 0.3, "seed": 11}"#,
    )
    .map_err(|e| e.to_string())?;
    let config = |epochs: usize| {
        format!(
            r#"{{"variant": "citrus", "mode": "p", "window": 200, "epochs": {epochs}, "batch": 32, "seed": 7}}"#
        )
    };
    std::fs::write(dir.join("pre.json"), config(2)).map_err(|e| e.to_string())?;
    std::fs::write(dir.join("ft.json"), config(5)).map_err(|e| e.to_string())?;
    cli(&[
        "synth",
        "--spec",
        &path("spec.json"),
        "--out",
        &path("data"),
    ])?;
    cli(&[
        "pretrain",
        "--config",
        &path("pre.json"),
        "--data",
        &path("data"),
        "--out",
        &path("pre.ckpt"),
    ])?;
    for seed in ["42", "1337"] {
        cli(&[
            "finetune",
            "--config",
            &path("ft.json"),
            "--data",
            &path("data"),
            "--init",
            &path("pre.ckpt"),
            "--fold",
            "0",
            "--regime",
            "100",
            "--seed",
            seed,
            "--out",
            &path("ft.ckpt"),
            "--record",
            &path("runs.csv"),
        ])?;
    }
    let records = read_records(&dir.join("runs.csv")).map_err(|e| e.to_string())?;
    let ckpt = std::fs::read(dir.join("pre.ckpt")).map_err(|e| e.to_string())?;
    Ok((records, ckpt))
}

fn determinism() -> Check {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, ca) = pipeline(a.path())?;
    let (rb, cb) = pipeline(b.path())?;
    ensure(ra.len() == 2 && rb.len() == 2, || {
        format!("{} and {} records", ra.len(), rb.len())
    })?;
    ensure(ca == cb, || "pre-trained checkpoints differ".into())?;
    let mut worst = 0.0f64;
    for (x, y) in ra.iter().zip(&rb) {
        for (u, v) in x.metrics.as_array().iter().zip(y.metrics.as_array()) {
            worst = worst.max((u - v).abs());
        }
    }
    ensure(worst <= 1e-6, || format!("metrics differ by {worst:.3e}"))?;
    Ok(format!(
        "two runs agree: max metric difference {worst:.1e}, identical checkpoints; acc {:.1}/{:.1}",
        ra[0].metrics.acc, ra[1].metrics.acc
    ))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "shape chain",
            budget: Duration::from_secs(30),
            run: shape_chain,
        },
        Criterion {
            id: 2,
            name: "DSP oracles",
            budget: Duration::from_secs(120),
            run: dsp,
        },
        Criterion {
            id: 3,
            name: "gradients",
            budget: Duration::from_secs(300),
            run: gradients,
        },
        Criterion {
            id: 4,
            name: "masking",
            budget: Duration::from_secs(60),
            run: masking,
        },
        Criterion {
            id: 5,
            name: "metric and test oracles",
            budget: Duration::from_secs(120),
            run: statistics,
        },
        Criterion {
            id: 6,
            name: "evaluation protocol",
            budget: Duration::from_secs(60),
            run: protocol,
        },
        Criterion {
            id: 7,
            name: "pre-training helps at 1%",
            budget: Duration::from_secs(1800),
            run: transfer,
        },
        Criterion {
            id: 8,
            name: "sliding windows beat interpolation",
            budget: Duration::from_secs(1800),
            run: alignment,
        },
        Criterion {
            id: 9,
            name: "end-to-end determinism",
            budget: Duration::from_secs(600),
            run: determinism,
        },
    ];
    let only: Option<BTreeSet<usize>> = std::env::var("CITRUS_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());

    let mut failed = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            println!("criterion {} ({}): SKIPPED", c.id, c.name);
            continue;
        }
        eprintln!("criterion {} ({}) running", c.id, c.name);
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let result = match result {
            Ok(detail) if took > c.budget => {
                Err(format!("{detail}; over the {:?} budget", c.budget))
            }
            other => other,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!(
            "criterion {} ({}): {tag} [{:.1} s of {} s] {detail}",
            c.id,
            c.name,
            took.as_secs_f64(),
            c.budget.as_secs()
        );
        failed += result.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
