mod support;

use std::collections::BTreeSet;

use citrus_core::masking::{
    apply_mask, sample_block_mask, sample_multimodal_masks, sample_unit_mask, MaskSpec,
};
use citrus_core::rng::seeded;
use citrus_core::{Error, Tensor};
use proptest::prelude::*;
use support::oracles::{block_capacity, legal_masks};

#[test]
fn default_block_masks_against_enumeration() {
    let (p, ratio, block) = (25, 0.5, 5);
    let target = 13;
    let legal: BTreeSet<Vec<bool>> = legal_masks(p, block, 3)
        .into_iter()
        .filter(|m| m.iter().filter(|&&v| v).count() >= target)
        .collect();
    assert_eq!(legal.len(), 165 + 55 + 66);
    let mut seen = BTreeSet::new();
    for seed in 0..10_000u64 {
        let m = sample_block_mask(p, ratio, block, &mut seeded(seed)).unwrap();
        let c = m.count();
        assert!((13..=15).contains(&c), "seed {seed}: {c} masked");
        let runs = m.runs();
        assert_eq!(runs.len(), 3, "seed {seed}: {runs:?}");
        for &(start, len) in &runs {
            assert!(
                len == block || start + len == p,
                "seed {seed}: run {start}+{len}"
            );
        }
        if c < 15 {
            assert_eq!(
                runs.last().map(|&(s, l)| s + l),
                Some(p),
                "only a cut tail run can shorten the count"
            );
        }
        assert!(
            legal.contains(&m.masked),
            "seed {seed}: mask outside the legal set"
        );
        seen.insert(m.masked);
    }
    assert_eq!(seen.len(), legal.len(), "some legal masks were never drawn");
}

#[test]
fn masks_are_deterministic_per_seed() {
    for seed in 0..50 {
        assert_eq!(
            sample_block_mask(25, 0.5, 5, &mut seeded(seed)).unwrap(),
            sample_block_mask(25, 0.5, 5, &mut seeded(seed)).unwrap()
        );
        assert_eq!(
            sample_unit_mask(25, 0.3, &mut seeded(seed)).unwrap(),
            sample_unit_mask(25, 0.3, &mut seeded(seed)).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn unit_mask_count_is_rounded(p in 1usize..80, ratio in 0.0f64..=1.0, seed in any::<u64>()) {
        let m = sample_unit_mask(p, ratio, &mut seeded(seed)).unwrap();
        prop_assert_eq!(m.len(), p);
        prop_assert_eq!(m.count(), (ratio * p as f64).round() as usize);
    }

    #[test]
    fn block_mask_count_bounds(p in 1usize..60, ratio in 0.0f64..=1.0, block in 1usize..8, seed in any::<u64>()) {
        prop_assume!(block <= p);
        let target = (ratio * p as f64 - 1e-9).ceil().max(0.0) as usize;
        match sample_block_mask(p, ratio, block, &mut seeded(seed)) {
            Ok(m) => {
                let upper = target.div_ceil(block) * block;
                prop_assert!(m.count() >= target && m.count() <= upper.min(p), "{} not in [{target}, {upper}]", m.count());
                if block > 1 {
                    let runs = m.runs();
                    for (i, &(s, l)) in runs.iter().enumerate() {
                        prop_assert!(l == block || (s + l == p && i + 1 == runs.len()), "run {s}+{l}");
                    }
                }
            }
            Err(Error::InfeasibleMask(_)) => prop_assert!(block_capacity(p, block) < target),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn apply_mask_touches_only_masked_rows(p in 1usize..20, d in 1usize..6, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let m = sample_unit_mask(p, 0.5, &mut rng).unwrap();
        let t = Tensor::<f64>::from_vec(&[2, p, d], (0..2 * p * d).map(|v| v as f64 * 0.5 - 3.0).collect()).unwrap();
        let token: Vec<f64> = (0..d).map(|i| 100.0 + i as f64).collect();
        let out = apply_mask(&t, &m, &token).unwrap();
        for r in 0..2 * p {
            let row = &out.data()[r * d..(r + 1) * d];
            if m.masked[r % p] {
                prop_assert_eq!(row, &token[..]);
            } else {
                prop_assert_eq!(row, &t.data()[r * d..(r + 1) * d]);
            }
        }
    }
}

struct Joint {
    joint: f64,
    /// Mean over positions of the product of the two per-position rates.
    product: f64,
}

fn monte_carlo(p: usize, ratio: f64, block: usize, draws: u64) -> Joint {
    let mut both = 0usize;
    let (mut a, mut b) = (vec![0usize; p], vec![0usize; p]);
    let mut rng = seeded(77);
    for _ in 0..draws {
        let m = sample_multimodal_masks(p, ratio, block, 2, &mut rng).unwrap();
        for i in 0..p {
            a[i] += m[0].masked[i] as usize;
            b[i] += m[1].masked[i] as usize;
            both += (m[0].masked[i] && m[1].masked[i]) as usize;
        }
    }
    let d = draws as f64;
    let product = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| x as f64 / d * y as f64 / d)
        .sum::<f64>()
        / p as f64;
    Joint {
        joint: both as f64 / (d * p as f64),
        product,
    }
}

#[test]
fn multimodal_masks_are_independent() {
    let unit = monte_carlo(25, 0.5, 1, 10_000);
    assert!(
        (unit.joint - 0.25).abs() < 0.05,
        "unit joint rate {}",
        unit.joint
    );
    // Block masks overshoot the ratio (13 to 15 of 25) and favour some
    // positions, so the joint rate is compared with the per-position product
    // of the observed marginals.
    let block = monte_carlo(25, 0.5, 5, 10_000);
    assert!(
        (block.joint - block.product).abs() < 0.01,
        "block joint {} vs product {}",
        block.joint,
        block.product
    );
    let m = sample_multimodal_masks(25, 0.5, 5, 2, &mut seeded(1)).unwrap();
    assert_eq!(m.len(), 2);
}

#[test]
fn multimodal_masks_differ_across_modalities() {
    let differ = (0..200).filter(|&s| {
        let m: Vec<MaskSpec> = sample_multimodal_masks(25, 0.5, 5, 2, &mut seeded(s)).unwrap();
        m[0] != m[1]
    });
    assert!(differ.count() > 150);
}
