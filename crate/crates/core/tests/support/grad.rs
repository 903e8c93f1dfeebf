//! Finite-difference gradient cases on models small enough to check every weight.

use citrus_core::autograd::{Graph, Var};
use citrus_core::gradcheck::{check_leaves, check_params, GradReport, NOISE_FLOOR, STEP};
use citrus_core::masking::MaskSpec;
use citrus_core::nn::{FeatureTap, Model, ModelConfig, PretrainMode, Variant};
use citrus_core::pretrain::{frequency_loss, multimodal_loss, sample_mask, signal_loss};
use citrus_core::rng::{normal, seeded, Rng};
use citrus_core::{Result, Tensor};

pub const TOL: f64 = 1e-3;
pub const MAX_WEIGHTS: usize = 1000;

pub fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig {
        conv_base_channels: 2,
        conv_layers: 2,
        d_model: 4,
        ff_dim: 6,
        n_heads: 2,
        n_layers: 1,
        patch_size: 4,
        freq_hidden: 5,
        pretrain_window: 16,
        ..ModelConfig::new(variant)
    }
}

pub fn randn(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| normal(rng)).collect()).unwrap()
}

fn masks(rows: usize, patches: usize, seed: u64) -> Vec<MaskSpec> {
    let mut rng = seeded(seed);
    (0..rows)
        .map(|_| sample_mask(patches, 0.5, 1, &mut rng).unwrap())
        .collect()
}

/// Reports of one check together with the size of the instance.
pub struct Case {
    pub name: String,
    pub weights: usize,
    pub reports: Vec<GradReport>,
}

impl Case {
    pub fn worst(&self) -> f64 {
        self.reports.iter().map(|r| r.rel_err).fold(0.0, f64::max)
    }

    /// Some parameter under `prefix` received a non-negligible gradient.
    pub fn reached(&self, prefix: &str) -> bool {
        self.reports
            .iter()
            .any(|r| r.name.starts_with(prefix) && r.norm > NOISE_FLOOR)
    }

    /// Every tolerance and size requirement, as a message on failure.
    pub fn verdict(&self) -> core::result::Result<(), String> {
        if self.reports.is_empty() {
            return Err(format!("{}: nothing checked", self.name));
        }
        if self.weights > MAX_WEIGHTS {
            return Err(format!("{}: {} weights", self.name, self.weights));
        }
        match self.reports.iter().find(|r| !(r.rel_err < TOL)) {
            Some(r) => Err(format!(
                "{}: {} relative error {:.3e} (norm {:.3e})",
                self.name, r.name, r.rel_err, r.norm
            )),
            None => Ok(()),
        }
    }
}

pub fn signal_case(variant: Variant, train: bool) -> Case {
    let cfg = tiny(variant);
    let mut model = Model::<f64>::for_pretraining(&cfg, PretrainMode::P, 2, 0, 3).unwrap();
    let p = cfg.patches_for(16);
    let x = randn(&mut seeded(10), &[3, 1, 16]);
    let m = masks(3, p, 11);
    let reports = check_params(&mut model, train, 5, STEP, |model, f| {
        signal_loss(model, f, x.clone(), &m)
    })
    .unwrap();
    Case {
        name: format!("{variant:?} signal reconstruction"),
        weights: model.params.weight_count(),
        reports,
    }
}

pub fn frequency_case() -> Case {
    let cfg = tiny(Variant::Citrus);
    let n_mels = 3;
    let mut model = Model::<f64>::for_pretraining(&cfg, PretrainMode::Fp, 2, n_mels, 4).unwrap();
    let p = cfg.patches_for(16);
    let x = randn(&mut seeded(12), &[2, 1, 16]);
    let target = randn(&mut seeded(13), &[2, n_mels, p]).into_data();
    let m = masks(2, p, 14);
    let reports = check_params(&mut model, true, 6, STEP, |model, f| {
        frequency_loss(model, f, x.clone(), target.clone(), &m)
    })
    .unwrap();
    Case {
        name: "frequency head".into(),
        weights: model.params.weight_count(),
        reports,
    }
}

pub fn multimodal_case() -> Case {
    let cfg = ModelConfig {
        conv_layers: 1,
        ..tiny(Variant::Citrus)
    };
    let mut model = Model::<f64>::for_pretraining(&cfg, PretrainMode::Mp, 2, 0, 5).unwrap();
    let p = cfg.patches_for(16);
    let mut rng = seeded(15);
    let xs = vec![randn(&mut rng, &[2, 1, 16]), randn(&mut rng, &[2, 1, 16])];
    let ms = vec![masks(2, p, 16), masks(2, p, 17)];
    let reports = check_params(&mut model, true, 7, STEP, |model, f| {
        multimodal_loss(model, f, xs.clone(), &ms).map(|(t, _)| t)
    })
    .unwrap();
    Case {
        name: "multimodal decoders".into(),
        weights: model.params.weight_count(),
        reports,
    }
}

pub fn classify_case(variant: Variant, train: bool, tap: Option<FeatureTap>) -> Case {
    let cfg = ModelConfig {
        feature_tap: tap,
        ..tiny(variant)
    };
    let mut model = Model::<f64>::for_finetuning(&cfg, 3, 2, 8).unwrap();
    // Two items with one and two windows, two channels each.
    let windows = [1usize, 2];
    let x = randn(&mut seeded(18), &[6, 1, 16]);
    let labels = [2usize, 0];
    let reports = check_params(&mut model, train, 9, STEP, |model, f| {
        let xv = f.graph.input(x.clone());
        let logits = model.classify(f, xv, 2, &windows)?;
        f.graph.cross_entropy(logits, &labels)
    })
    .unwrap();
    Case {
        name: format!("{variant:?} classifier"),
        weights: model.params.weight_count(),
        reports,
    }
}

fn op_case(
    name: &str,
    inputs: &[&[usize]],
    seed: u64,
    train: bool,
    build: impl Fn(&mut Graph<'_, f64>, &[Var]) -> Result<Var>,
) -> Case {
    let mut rng = seeded(seed);
    let xs: Vec<Tensor<f64>> = inputs.iter().map(|s| randn(&mut rng, s)).collect();
    let reports = check_leaves(&xs, train, seed, STEP, build).unwrap();
    Case {
        name: name.into(),
        weights: xs.iter().map(|x| x.len()).sum(),
        reports,
    }
}

/// Reduce any node to a scalar through a fixed random quadratic.
fn reduce(g: &mut Graph<'_, f64>, v: Var) -> Result<Var> {
    let shape = g.shape(v).to_vec();
    let t = randn(&mut seeded(99), &shape).into_data();
    let n = t.len();
    g.masked_mse(v, t, vec![true; n])
}

/// One case per graph operator; every input is a checked leaf.
pub fn operator_cases() -> Vec<Case> {
    vec![
        op_case(
            "conv1d",
            &[&[2, 3, 9], &[4, 3, 3], &[4]],
            20,
            false,
            |g, v| {
                let y = g.conv1d(v[0], v[1], Some(v[2]), 2, 1)?;
                reduce(g, y)
            },
        ),
        op_case(
            "conv_transpose1d",
            &[&[2, 3, 5], &[3, 2, 3], &[2]],
            21,
            false,
            |g, v| {
                let y = g.conv_transpose1d(v[0], v[1], Some(v[2]), 2, 1, 1)?;
                reduce(g, y)
            },
        ),
        op_case("batch_norm", &[&[3, 2, 5], &[2], &[2]], 22, true, |g, v| {
            let (y, _) = g.batch_norm(v[0], v[1], v[2])?;
            reduce(g, y)
        }),
        op_case(
            "batch_norm_eval",
            &[&[3, 2, 5], &[2], &[2]],
            23,
            false,
            |g, v| {
                let y = g.batch_norm_eval(v[0], v[1], v[2], &[0.3, -0.2], &[1.5, 0.7])?;
                reduce(g, y)
            },
        ),
        op_case(
            "layer_norm",
            &[&[2, 3, 6], &[6], &[6]],
            24,
            false,
            |g, v| {
                let y = g.layer_norm(v[0], v[1], v[2])?;
                reduce(g, y)
            },
        ),
        op_case(
            "attention",
            &[&[2, 5, 6], &[2, 5, 6], &[2, 5, 6]],
            25,
            false,
            |g, v| {
                let y = g.attention(v[0], v[1], v[2], 3)?;
                reduce(g, y)
            },
        ),
        op_case(
            "positions and mask token",
            &[&[2, 4, 3], &[4, 3], &[3]],
            26,
            false,
            |g, v| {
                let y = g.add_positional(v[0], v[1])?;
                let keep = vec![true, false, false, true, false, true, true, false];
                let y = g.mask_replace(y, v[2], keep)?;
                reduce(g, y)
            },
        ),
        op_case(
            "linear, gelu, dropout",
            &[&[3, 4], &[5, 4], &[5]],
            27,
            true,
            |g, v| {
                let y = g.linear(v[0], v[1], Some(v[2]))?;
                let y = g.gelu(y);
                let y = g.dropout(y, 0.3);
                let y = g.scale(y, 1.7);
                reduce(g, y)
            },
        ),
        op_case("layout", &[&[2, 3, 4], &[2, 3, 2]], 28, false, |g, v| {
            let t = g.transpose12(v[0])?;
            let t = g.transpose12(t)?;
            let y = g.concat_last(t, v[1])?;
            let y = g.reshape(y, &[6, 6])?;
            let y = g.group_mean(y, &[2, 1, 3])?;
            reduce(g, y)
        }),
        op_case("rows", &[&[2, 3], &[1, 3]], 29, false, |g, v| {
            let y = g.concat_rows(&[v[0], v[1], v[0]])?;
            let a = g.slice_rows(y, 1, 3)?;
            let b = g.slice_rows(y, 0, 3)?;
            let y = g.add(a, b)?;
            reduce(g, y)
        }),
        op_case("cross entropy", &[&[3, 4]], 30, false, |g, v| {
            g.cross_entropy(v[0], &[1, 3, 0])
        }),
        op_case("masked mse", &[&[2, 5]], 31, false, |g, v| {
            let t = vec![0.5; 10];
            let w = (0..10).map(|i| i % 3 != 0).collect();
            g.masked_mse(v[0], t, w)
        }),
    ]
}

/// Every model-level case, in both training and evaluation mode where they differ.
pub fn model_cases() -> Vec<Case> {
    let mut out = Vec::new();
    for v in [Variant::Citrus, Variant::Patchtst, Variant::Nlpatchtst] {
        out.push(signal_case(v, true));
    }
    out.push(signal_case(Variant::Citrus, false));
    out.push(frequency_case());
    out.push(multimodal_case());
    for v in [
        Variant::Patchtst,
        Variant::Nlpatchtst,
        Variant::Citrus,
        Variant::Ci,
    ] {
        out.push(classify_case(v, true, None));
    }
    out.push(classify_case(Variant::Citrus, false, None));
    out.push(classify_case(Variant::Ci, false, Some(FeatureTap::Context)));
    out
}
