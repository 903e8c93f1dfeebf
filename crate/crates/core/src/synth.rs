//! Synthetic frequency-coded datasets.
//!
//! Each window is a sum of sinusoids whose frequencies are drawn from the
//! bands of its class, shifted by a per-subject offset, plus Gaussian noise.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::data::SignalSet;
use crate::error::{Error, Result};
use crate::rng::{normal, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_classes: usize,
    /// `bands[k]` lists the `[lo, hi]` Hz bands of class `k`; one sinusoid per band.
    pub bands: Vec<Vec<[f64; 2]>>,
    /// Bands present in every window regardless of class.
    pub shared_bands: Vec<[f64; 2]>,
    pub n_subjects: usize,
    /// Half-width (Hz) of the uniform per-subject frequency offset.
    pub subject_jitter: f64,
    /// Every subject carries a single class (`subject mod n_classes`).
    pub subject_level_labels: bool,
    pub noise_sigma: f64,
    pub channels: usize,
    pub window_len: usize,
    pub fs: f64,
    pub n_windows: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            name: "synthetic".into(),
            n_classes: 2,
            bands: vec![vec![[4.0, 6.0]], vec![[14.0, 16.0]]],
            shared_bands: Vec::new(),
            n_subjects: 10,
            subject_jitter: 0.0,
            subject_level_labels: false,
            noise_sigma: 0.1,
            channels: 1,
            window_len: 200,
            fs: 100.0,
            n_windows: 200,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 1 || self.bands.len() != self.n_classes {
            return Err(Error::invalid(format!(
                "{} band lists for {} classes",
                self.bands.len(),
                self.n_classes
            )));
        }
        if self.channels == 0 || self.window_len == 0 || self.n_windows == 0 || self.n_subjects == 0
        {
            return Err(Error::invalid(
                "channels, window length, window count and subjects must be >= 1",
            ));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if !(self.noise_sigma >= 0.0) || !(self.subject_jitter >= 0.0) {
            return Err(Error::invalid("noise and jitter must be non-negative"));
        }
        let nyquist = self.fs / 2.0;
        for &[lo, hi] in self.bands.iter().flatten().chain(&self.shared_bands) {
            if !(lo <= hi) || lo - self.subject_jitter <= 0.0 || hi + self.subject_jitter >= nyquist
            {
                return Err(Error::invalid(format!(
                    "band [{lo}, {hi}] ± {} Hz leaves (0, {nyquist}) Hz",
                    self.subject_jitter
                )));
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SignalSet> {
        self.validate()?;
        let mut rng = seeded(self.seed);
        let offsets: Vec<f64> = (0..self.n_subjects)
            .map(|_| {
                if self.subject_jitter > 0.0 {
                    rng.random_range(-self.subject_jitter..=self.subject_jitter)
                } else {
                    0.0
                }
            })
            .collect();
        let (c, t, k) = (self.channels, self.window_len, self.n_classes);
        let mut data = Vec::with_capacity(self.n_windows * c * t);
        let mut labels = Vec::with_capacity(self.n_windows);
        let mut subjects = Vec::with_capacity(self.n_windows);
        let tau = 2.0 * core::f64::consts::PI;
        for i in 0..self.n_windows {
            let (label, subject) = if self.subject_level_labels {
                let s = i % self.n_subjects;
                (s % k, s)
            } else {
                (i % k, (i / k) % self.n_subjects)
            };
            let bands = self.bands[label].iter().chain(&self.shared_bands);
            let freqs: Vec<f64> = bands
                .map(|&[lo, hi]| if hi > lo { rng.random_range(lo..hi) } else { lo } + offsets[subject])
                .collect();
            for _ in 0..c {
                let comps: Vec<(f64, f64, f64)> = freqs
                    .iter()
                    .map(|&f| (f, rng.random_range(0.0..tau), rng.random_range(0.5..1.5)))
                    .collect();
                for n in 0..t {
                    let time = n as f64 / self.fs;
                    let mut v: f64 = comps
                        .iter()
                        .map(|&(f, ph, a)| a * libm::sin(tau * f * time + ph))
                        .sum();
                    if self.noise_sigma > 0.0 {
                        v += self.noise_sigma * normal(&mut rng);
                    }
                    data.push(v as f32);
                }
            }
            labels.push(label);
            subjects.push(subject as u32);
        }
        let set = SignalSet {
            name: self.name.clone(),
            fs: self.fs,
            channels: c,
            window_len: t,
            n_classes: k,
            label_names: (0..k).map(|i| format!("class{i}")).collect(),
            data,
            labels,
            subjects: Some(subjects),
        };
        set.validate()?;
        Ok(set)
    }
}
