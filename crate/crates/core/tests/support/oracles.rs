//! Brute-force references shared by the test suites.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use citrus_core::rng::Rng;
use citrus_core::signal::MelConfig;
use rand::RngExt;

// Slaney mel scale, written out independently of the library.
pub fn hz_to_mel(f: f64) -> f64 {
    let sp = 200.0 / 3.0;
    if f < 1000.0 {
        f / sp
    } else {
        1000.0 / sp + (f / 1000.0).ln() / (6.4f64.ln() / 27.0)
    }
}

pub fn mel_to_hz(m: f64) -> f64 {
    let sp = 200.0 / 3.0;
    let knee = 1000.0 / sp;
    if m < knee {
        m * sp
    } else {
        1000.0 * ((6.4f64.ln() / 27.0) * (m - knee)).exp()
    }
}

/// Direct-summation DFT power spectrogram followed by a triangular filterbank.
pub fn mel_oracle(x: &[f64], fs: f64, cfg: &MelConfig) -> Vec<f64> {
    let n = cfg.n_fft;
    let bins = n / 2 + 1;
    let mut win = vec![0.0; n];
    let off = (n - cfg.win_length) / 2;
    for i in 0..cfg.win_length {
        win[off + i] = 0.5 * (1.0 - (2.0 * PI * i as f64 / cfg.win_length as f64).cos());
    }
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax);
    let pts: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let fb: Vec<Vec<f64>> = (0..cfg.n_mels)
        .map(|m| {
            (0..bins)
                .map(|k| {
                    let f = k as f64 * fs / n as f64;
                    let up = (f - pts[m]) / (pts[m + 1] - pts[m]);
                    let down = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
                    up.min(down).max(0.0) * 2.0 / (pts[m + 2] - pts[m])
                })
                .collect()
        })
        .collect();
    let pad = if cfg.center { n / 2 } else { 0 };
    let frames = if cfg.center {
        1 + x.len() / cfg.hop
    } else {
        1 + (x.len() - n) / cfg.hop
    };
    let mut out = vec![0.0; cfg.n_mels * frames];
    for t in 0..frames {
        let seg: Vec<f64> = (0..n)
            .map(|i| {
                let j = (t * cfg.hop + i) as isize - pad as isize;
                let v = if j >= 0 && (j as usize) < x.len() {
                    x[j as usize]
                } else {
                    0.0
                };
                v * win[i]
            })
            .collect();
        let power: Vec<f64> = (0..bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in seg.iter().enumerate() {
                    let a = -2.0 * PI * (k * i % n) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect();
        for m in 0..cfg.n_mels {
            let e: f64 = fb[m].iter().zip(&power).map(|(w, p)| w * p).sum();
            out[m * frames + t] = (e + cfg.affine_offset) / cfg.affine_scale;
        }
    }
    out
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

pub fn random_config(rng: &mut Rng) -> MelConfig {
    let n_fft = [128usize, 160, 200, 256][rng.random_range(0..4)];
    MelConfig {
        n_fft,
        hop: rng.random_range(1..=32),
        win_length: rng.random_range(n_fft / 4..=n_fft),
        n_mels: rng.random_range(2..=16),
        fmin: rng.random_range(0.0..2.0),
        fmax: rng.random_range(15.0..=50.0),
        center: rng.random_bool(0.5),
        affine_offset: 0.0,
        affine_scale: 1.0,
    }
}

/// Frequency of the largest DFT bin between 0 and Nyquist, refined on a 0.01 Hz grid.
pub fn peak_frequency(x: &[f64], fs: f64) -> f64 {
    let power = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let a = 2.0 * PI * f * i as f64 / fs;
            re += v * a.cos();
            im += v * a.sin();
        }
        re * re + im * im
    };
    let mut best = (0.0, f64::MIN);
    let mut f = 0.5;
    while f < fs / 2.0 {
        let p = power(f);
        if p > best.1 {
            best = (f, p);
        }
        f += 0.01;
    }
    best.0
}

pub fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2)
        .filter(|w| (w[0] < 0.0) != (w[1] < 0.0))
        .count()
}

/// Every mask made of `runs` runs of `block` patches over `p` patches, with at
/// least one visible patch between runs; the last run may be cut at `p`.
pub fn legal_masks(p: usize, block: usize, runs: usize) -> BTreeSet<Vec<bool>> {
    fn go(
        p: usize,
        block: usize,
        left: usize,
        from: usize,
        cur: &mut Vec<bool>,
        out: &mut BTreeSet<Vec<bool>>,
    ) {
        if left == 0 {
            out.insert(cur.clone());
            return;
        }
        for s in from..p {
            let len = block.min(p - s);
            if len < block && left > 1 {
                continue;
            }
            cur[s..s + len].iter_mut().for_each(|m| *m = true);
            go(p, block, left - 1, s + len + 1, cur, out);
            cur[s..s + len].iter_mut().for_each(|m| *m = false);
        }
    }
    let mut out = BTreeSet::new();
    go(p, block, runs, 0, &mut vec![false; p], &mut out);
    out
}

/// Most patches coverable by runs of exactly `block` separated by gaps, with
/// an optional cut tail run.
pub fn block_capacity(p: usize, block: usize) -> usize {
    let mut best = vec![0usize; p + 2];
    for i in (0..p).rev() {
        let skip = best[i + 1];
        let len = block.min(p - i);
        let take = len
            + if i + len + 1 <= p {
                best[i + len + 1]
            } else {
                0
            };
        best[i] = skip.max(take);
    }
    best[0]
}

pub fn pairwise_auroc(s: &[f64], pos: &[bool]) -> Option<f64> {
    let (mut win, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if pos[i] && !pos[j] {
                pairs += 1.0;
                win += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (pairs > 0.0).then(|| win / pairs)
}

pub fn stepwise_ap(s: &[f64], pos: &[bool]) -> Option<f64> {
    let n_pos = pos.iter().filter(|&&p| p).count() as f64;
    if n_pos == 0.0 {
        return None;
    }
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut ap, mut prev) = (0.0, 0.0);
    for t in thresholds {
        let called: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= t).collect();
        let tp = called.iter().filter(|&&i| pos[i]).count() as f64;
        let recall = tp / n_pos;
        ap += (recall - prev) * tp / called.len() as f64;
        prev = recall;
    }
    Some(ap)
}

/// Average ranks of `|d|` computed by counting, independent of sorting.
pub fn count_ranks(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let same = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect()
}

pub fn enumerated_p(x: &[f64], y: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|v| *v != 0.0)
        .collect();
    let r = count_ranks(&d);
    let w: f64 = r
        .iter()
        .zip(&d)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| r)
        .sum();
    let n = d.len();
    let mut hits = 0u64;
    for signs in 0u64..1 << n {
        let s: f64 = (0..n).filter(|i| signs >> i & 1 == 1).map(|i| r[i]).sum();
        if s >= w - 1e-9 {
            hits += 1;
        }
    }
    (w, hits as f64 / (1u64 << n) as f64)
}
