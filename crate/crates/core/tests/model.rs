use citrus_core::nn::{
    channel_fold, channel_unfold, FeatureTap, Model, ModelConfig, Pass, PretrainMode, Variant,
};
use citrus_core::rng::{normal, seeded, Rng};
use citrus_core::signal::MelConfig;
use citrus_core::Tensor;

fn randn(rng: &mut Rng, shape: &[usize]) -> Tensor<f32> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| normal(rng) as f32).collect()).unwrap()
}

fn close(a: &[f32], b: &[f32], tol: f32) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

#[test]
fn shape_chain_for_both_window_lengths() {
    for (t, p, frames) in [(200usize, 25usize, 26usize), (3000, 375, 376)] {
        let cfg = ModelConfig {
            pretrain_window: t,
            ..ModelConfig::new(Variant::Citrus)
        };
        assert_eq!(cfg.patch_stride(), 8);
        assert_eq!(cfg.patches_for(t), p);
        let mel = MelConfig::for_window(t, cfg.patch_stride());
        assert_eq!(mel.frame_count(t), frames);
        let model = Model::<f32>::for_pretraining(&cfg, PretrainMode::P, 1, 0, 1).unwrap();
        let x = randn(&mut seeded(2), &[2, 1, t]);
        let mut f = Pass::new(&model.params, false, seeded(0));
        let xv = f.graph.input(x);
        let z = model.encode(&mut f, xv).unwrap();
        assert_eq!(f.graph.shape(z), &[2, p, 64]);
        let y = model
            .pretrain_forward(&mut f, xv, vec![false; 2 * p])
            .unwrap();
        assert_eq!(f.graph.shape(y), &[2, 1, t]);
    }
}

#[test]
fn frequency_head_emits_one_column_per_patch() {
    let cfg = ModelConfig::new(Variant::Citrus);
    let model = Model::<f32>::for_pretraining(&cfg, PretrainMode::Fp, 1, 64, 1).unwrap();
    let mut f = Pass::new(&model.params, false, seeded(0));
    let xv = f.graph.input(randn(&mut seeded(3), &[3, 1, 200]));
    let y = model.pretrain_forward(&mut f, xv, vec![false; 75]).unwrap();
    assert_eq!(f.graph.shape(y), &[3, 64, 25]);
}

#[test]
fn patch_variants_split_into_fixed_patches() {
    for v in [Variant::Patchtst, Variant::Nlpatchtst] {
        let cfg = ModelConfig::new(v);
        let model = Model::<f32>::for_pretraining(&cfg, PretrainMode::P, 1, 0, 1).unwrap();
        let mut f = Pass::new(&model.params, false, seeded(0));
        let xv = f.graph.input(randn(&mut seeded(4), &[2, 1, 200]));
        let z = model.encode(&mut f, xv).unwrap();
        assert_eq!(f.graph.shape(z), &[2, 10, 64]);
        let y = model.pretrain_forward(&mut f, xv, vec![true; 20]).unwrap();
        assert_eq!(f.graph.shape(y), &[2, 1, 200]);
        let bad = f.graph.input(randn(&mut seeded(4), &[1, 1, 210]));
        assert!(model.encode(&mut f, bad).is_err());
    }
}

#[test]
fn fold_round_trip() {
    let x = randn(&mut seeded(5), &[3, 4, 7]);
    let (folded, rec) = channel_fold(&x).unwrap();
    assert_eq!(folded.shape(), &[12, 1, 7]);
    assert_eq!(folded.data(), x.data());
    assert_eq!(channel_unfold(&folded, rec).unwrap(), x);
}

fn per_channel_features(model: &Model<f32>, x: &Tensor<f32>) -> Vec<f32> {
    let (b, c) = (x.dim(0), x.dim(1));
    let (rows, _) = channel_fold(x).unwrap();
    let mut f = Pass::new(&model.params, false, seeded(0));
    let xv = f.graph.input(rows);
    let h = model
        .pooled(&mut f, xv, c, &vec![1; b], model.cfg.tap())
        .unwrap();
    f.graph.value(h).data().to_vec()
}

#[test]
fn channels_are_processed_independently() {
    for v in [Variant::Citrus, Variant::Ci, Variant::Patchtst] {
        let cfg = ModelConfig::new(v);
        let model = Model::<f32>::for_finetuning(&cfg, 3, 3, 7).unwrap();
        let d = cfg.d_model;
        let x = randn(&mut seeded(6), &[2, 3, 200]);
        let base = per_channel_features(&model, &x);

        // Permuting channels permutes the feature blocks.
        let perm = [2usize, 0, 1];
        let mut xp = x.clone();
        for b in 0..2 {
            for (dst, &src) in perm.iter().enumerate() {
                let from = x.data()[(b * 3 + src) * 200..(b * 3 + src + 1) * 200].to_vec();
                xp.data_mut()[(b * 3 + dst) * 200..(b * 3 + dst + 1) * 200].copy_from_slice(&from);
            }
        }
        let permuted = per_channel_features(&model, &xp);
        for b in 0..2 {
            for (dst, &src) in perm.iter().enumerate() {
                let got = &permuted[(b * 3 + dst) * d..(b * 3 + dst + 1) * d];
                let want = &base[(b * 3 + src) * d..(b * 3 + src + 1) * d];
                assert!(
                    close(got, want, 1e-5),
                    "{v:?}: channel {src} changed under permutation"
                );
            }
        }

        // Replacing the other channels by noise leaves channel 1 alone.
        let mut noisy = randn(&mut seeded(8), &[2, 3, 200]);
        for b in 0..2 {
            let keep = x.data()[(b * 3 + 1) * 200..(b * 3 + 2) * 200].to_vec();
            noisy.data_mut()[(b * 3 + 1) * 200..(b * 3 + 2) * 200].copy_from_slice(&keep);
        }
        let other = per_channel_features(&model, &noisy);
        for b in 0..2 {
            let r = (b * 3 + 1) * d..(b * 3 + 2) * d;
            assert!(
                close(&other[r.clone()], &base[r], 1e-5),
                "{v:?}: channel 1 depends on its neighbours"
            );
        }
    }
}

#[test]
fn zeroed_output_projections_make_the_transformer_add_positions() {
    let cfg = ModelConfig::new(Variant::Citrus);
    let mut model = Model::<f32>::for_finetuning(&cfg, 2, 1, 3).unwrap();
    for l in 0..cfg.n_layers {
        for part in ["out", "ff2"] {
            for t in ["weight", "bias"] {
                let id = model
                    .params
                    .id(&format!("transformer.layer{l}.{part}.{t}"))
                    .unwrap();
                model.params.value_mut(id).data_mut().fill(0.0);
            }
        }
    }
    let z = randn(&mut seeded(9), &[2, 25, 64]);
    let pos = model
        .params
        .value(model.params.id("transformer.pos_embedding").unwrap())
        .clone();
    let mut f = Pass::new(&model.params, false, seeded(0));
    let zv = f.graph.input(z.clone());
    let out = model.contextualize(&mut f, zv, None).unwrap();
    let want: Vec<f32> = z
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| v + pos.data()[i % (25 * 64)])
        .collect();
    assert!(close(f.graph.value(out).data(), &want, 1e-6));
}

#[test]
fn ci_taps_encoder_output() {
    let cfg = ModelConfig::new(Variant::Ci);
    assert_eq!(cfg.tap(), FeatureTap::Encoded);
    let model = Model::<f32>::for_finetuning(&cfg, 2, 1, 3).unwrap();
    let x = randn(&mut seeded(10), &[1, 1, 200]);
    let mut f = Pass::new(&model.params, false, seeded(0));
    let xv = f.graph.input(x);
    let feats = model.features(&mut f, xv).unwrap();
    let enc = model.encode(&mut f, xv).unwrap();
    assert_eq!(f.graph.value(feats), f.graph.value(enc));
}

#[test]
fn parameter_names_cover_the_architecture() {
    let cfg = ModelConfig::new(Variant::Citrus);
    let m = Model::<f32>::for_pretraining(&cfg, PretrainMode::P, 1, 0, 1).unwrap();
    for name in [
        "encoder.block0.conv1.weight",
        "encoder.block2.bn2.running_var",
        "encoder.proj.weight",
        "mask_token",
        "transformer.pos_embedding",
        "transformer.layer3.ff2.bias",
        "decoder.proj.weight",
        "decoder.block2.conv.bias",
    ] {
        assert!(m.params.id(name).is_some(), "missing {name}");
    }
    assert_eq!(
        m.params
            .value(m.params.id("transformer.pos_embedding").unwrap())
            .shape(),
        &[25, 64]
    );
    // Backbone initialisation does not depend on the head.
    let ft = Model::<f32>::for_finetuning(&cfg, 4, 2, 1).unwrap();
    let id = |m: &Model<f32>, n: &str| m.params.id(n).unwrap();
    for n in [
        "encoder.block1.conv2.weight",
        "transformer.layer0.q.weight",
        "mask_token",
    ] {
        assert_eq!(m.params.value(id(&m, n)), ft.params.value(id(&ft, n)));
    }
}
