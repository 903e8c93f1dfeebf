use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A multichannel time series, stored channel-major as `[C × T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    samples: Vec<f64>,
    channels: usize,
    fs: f64,
    pub label: Option<usize>,
    pub subject: Option<u32>,
}

impl Recording {
    pub fn new(samples: Vec<f64>, channels: usize, fs: f64) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("recording needs at least one channel"));
        }
        if samples.is_empty() || samples.len() % channels != 0 {
            return Err(Error::shape(alloc::format!(
                "{} samples cannot form {} non-empty channels",
                samples.len(),
                channels
            )));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Recording {
            samples,
            channels,
            fs,
            label: None,
            subject: None,
        })
    }

    pub fn from_channels(channels: &[Vec<f64>], fs: f64) -> Result<Self> {
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::shape("channels differ in length"));
        }
        let flat = channels.iter().flatten().copied().collect();
        Recording::new(flat, channels.len(), fs)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_subject(mut self, subject: u32) -> Self {
        self.subject = Some(subject);
        self
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let t = self.len();
        &self.samples[c * t..(c + 1) * t]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Same metadata, new samples and rate.
    pub(crate) fn derive(&self, samples: Vec<f64>, fs: f64) -> Result<Self> {
        let mut out = Recording::new(samples, self.channels, fs)?;
        out.label = self.label;
        out.subject = self.subject;
        Ok(out)
    }
}
