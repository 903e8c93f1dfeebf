use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fft::Fft;
use crate::error::{Error, Result};

pub const ZSCORE_EPS: f64 = 1e-8;

/// Mel spectrogram settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub center: bool,
    pub affine_offset: f64,
    pub affine_scale: f64,
}

impl MelConfig {
    /// Settings for 2 s windows at 100 Hz: 200-point DFT, 64 mels over 0–20 Hz.
    pub fn short_window() -> Self {
        MelConfig {
            n_fft: 200,
            hop: 8,
            win_length: 60,
            n_mels: 64,
            fmin: 0.0,
            fmax: 20.0,
            center: true,
            affine_offset: 40.0,
            affine_scale: 40.0,
        }
    }

    /// Settings for 30 s windows at 100 Hz: 1024-point DFT, 128 mels.
    pub fn long_window() -> Self {
        MelConfig {
            n_fft: 1024,
            n_mels: 128,
            ..MelConfig::short_window()
        }
    }

    /// The preset matching a pre-training window length, with the hop set to
    /// the encoder stride so that frame `p` lines up with patch `p`.
    pub fn for_window(window: usize, hop: usize) -> Self {
        let base = if window >= 3000 {
            MelConfig::long_window()
        } else {
            MelConfig::short_window()
        };
        MelConfig { hop, ..base }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.n_fft == 0 || self.win_length == 0 || self.win_length > self.n_fft {
            return Err(Error::invalid("mel: need 1 <= win_length <= n_fft"));
        }
        if self.hop == 0 {
            return Err(Error::invalid("mel: hop must be >= 1"));
        }
        if self.n_mels == 0 {
            return Err(Error::invalid("mel: n_mels must be >= 1"));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return Err(Error::invalid("mel: need 0 <= fmin < fmax"));
        }
        if self.fmax > fs / 2.0 {
            return Err(Error::invalid(alloc::format!(
                "mel: fmax {} exceeds Nyquist {}",
                self.fmax,
                fs / 2.0
            )));
        }
        if self.affine_scale == 0.0 {
            return Err(Error::invalid("mel: affine scale must be non-zero"));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if self.center {
            1 + len / self.hop
        } else if len < self.n_fft {
            0
        } else {
            1 + (len - self.n_fft) / self.hop
        }
    }
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    libm::log(6.4) / 27.0
}

pub(crate) fn hz_to_mel(f: f64) -> f64 {
    if f < MIN_LOG_HZ {
        f / F_SP
    } else {
        MIN_LOG_MEL + libm::log(f / MIN_LOG_HZ) / log_step()
    }
}

pub(crate) fn mel_to_hz(m: f64) -> f64 {
    if m < MIN_LOG_MEL {
        m * F_SP
    } else {
        MIN_LOG_HZ * libm::exp(log_step() * (m - MIN_LOG_MEL))
    }
}

/// A prepared mel analysis for one sampling rate: DFT plan, analysis window
/// and triangular filterbank.
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    cfg: MelConfig,
    fft: Fft,
    window: Vec<f64>,
    /// `[n_mels × (n_fft/2 + 1)]`
    filters: Vec<f64>,
}

impl MelSpectrogram {
    pub fn new(cfg: &MelConfig, fs: f64) -> Result<Self> {
        cfg.validate(fs)?;
        let n_bins = cfg.n_fft / 2 + 1;
        // periodic Hann of win_length, centered inside n_fft
        let mut window = vec![0.0; cfg.n_fft];
        let offset = (cfg.n_fft - cfg.win_length) / 2;
        for i in 0..cfg.win_length {
            window[offset + i] = 0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / cfg.win_length as f64);
        }

        let mel_lo = hz_to_mel(cfg.fmin);
        let mel_hi = hz_to_mel(cfg.fmax);
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let mut filters = vec![0.0; cfg.n_mels * n_bins];
        for m in 0..cfg.n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            let row = &mut filters[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * fs / cfg.n_fft as f64;
                let rise = (f - lo) / (mid - lo);
                let fall = (hi - f) / (hi - mid);
                *w = rise.min(fall).max(0.0) * norm;
            }
            if row.iter().all(|&w| w == 0.0) {
                return Err(Error::DegenerateFilterbank(m));
            }
        }
        Ok(MelSpectrogram {
            cfg: cfg.clone(),
            fft: Fft::new(cfg.n_fft),
            window,
            filters,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    /// Mel power spectrogram of one channel, `[n_mels × F]` row-major, after
    /// the affine map `(S + offset) / scale`.
    pub fn compute(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.is_empty() {
            return Err(Error::invalid("mel: empty signal"));
        }
        let cfg = &self.cfg;
        let frames = cfg.frame_count(x.len());
        let n_bins = cfg.n_fft / 2 + 1;
        let left = if cfg.center { cfg.n_fft / 2 } else { 0 };
        let mut out = vec![0.0; cfg.n_mels * frames];
        let mut frame = vec![0.0; cfg.n_fft];
        let mut power = vec![0.0; n_bins];
        for f in 0..frames {
            // frame f spans padded samples [f*hop, f*hop + n_fft); padding is zeros
            for (i, v) in frame.iter_mut().enumerate() {
                let src = (f * cfg.hop + i) as isize - left as isize;
                let s = if src >= 0 && (src as usize) < x.len() {
                    x[src as usize]
                } else {
                    0.0
                };
                *v = s * self.window[i];
            }
            self.fft.power_spectrum(&frame, &mut power);
            for m in 0..cfg.n_mels {
                let row = &self.filters[m * n_bins..(m + 1) * n_bins];
                let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                out[m * frames + f] = (e + cfg.affine_offset) / cfg.affine_scale;
            }
        }
        Ok(out)
    }

    /// Z-scored first `patches` frames: the per-patch frequency target, `[n_mels × patches]`.
    pub fn target(&self, x: &[f64], patches: usize) -> Result<Vec<f64>> {
        let frames = self.cfg.frame_count(x.len());
        if frames < patches {
            return Err(Error::TargetPatchMisalignment { frames, patches });
        }
        let spec = self.compute(x)?;
        let n_mels = self.cfg.n_mels;
        let mut cut = Vec::with_capacity(n_mels * patches);
        for m in 0..n_mels {
            cut.extend_from_slice(&spec[m * frames..m * frames + patches]);
        }
        zscore_over_time(&mut cut, n_mels, patches);
        Ok(cut)
    }
}

/// Mel spectrogram of one channel as `[n_mels × F]`, row-major.
pub fn mel_spectrogram(x: &[f64], fs: f64, cfg: &MelConfig) -> Result<Vec<f64>> {
    MelSpectrogram::new(cfg, fs)?.compute(x)
}

/// Standardize every row of an `[rows × cols]` matrix over its columns
/// (population deviation, `ε = 1e-8`).
pub fn zscore_over_time(s: &mut [f64], rows: usize, cols: usize) {
    assert_eq!(s.len(), rows * cols);
    for row in s.chunks_exact_mut(cols) {
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let denom = libm::sqrt(var) + ZSCORE_EPS;
        row.iter_mut().for_each(|v| *v = (*v - mean) / denom);
    }
}

/// Frequency pre-training target for `patches` patches, `[n_mels × patches]`.
pub fn frequency_target(x: &[f64], fs: f64, cfg: &MelConfig, patches: usize) -> Result<Vec<f64>> {
    MelSpectrogram::new(cfg, fs)?.target(x, patches)
}
