//! Labelled collections of equal-length multichannel windows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::signal::Recording;

/// `n` windows of `[C × T]` samples at rate `fs`, stored `[window][channel][time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSet {
    pub name: String,
    pub fs: f64,
    pub channels: usize,
    pub window_len: usize,
    pub n_classes: usize,
    pub label_names: Vec<String>,
    pub data: Vec<f32>,
    pub labels: Vec<usize>,
    pub subjects: Option<Vec<u32>>,
}

impl SignalSet {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.window_len == 0 {
            return Err(Error::invalid("signal set needs C >= 1 and T >= 1"));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        let n = self.labels.len();
        if self.data.len() != n * self.channels * self.window_len {
            return Err(Error::shape(format!(
                "{} samples for {n} windows of {} × {}",
                self.data.len(),
                self.channels,
                self.window_len
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside [0, {})",
                self.n_classes
            )));
        }
        if let Some(s) = &self.subjects {
            if s.len() != n {
                return Err(Error::shape(format!(
                    "{} subject ids for {n} windows",
                    s.len()
                )));
            }
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Samples of window `i`, `[C × T]`.
    pub fn window(&self, i: usize) -> &[f32] {
        let w = self.channels * self.window_len;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn subject(&self, i: usize) -> Option<u32> {
        self.subjects.as_ref().map(|s| s[i])
    }

    pub fn recording(&self, i: usize) -> Result<Recording> {
        let samples = self.window(i).iter().map(|&v| v as f64).collect();
        let mut rec = Recording::new(samples, self.channels, self.fs)?.with_label(self.labels[i]);
        rec.subject = self.subject(i);
        Ok(rec)
    }

    /// The windows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> SignalSet {
        let mut data = Vec::with_capacity(indices.len() * self.channels * self.window_len);
        for &i in indices {
            data.extend_from_slice(self.window(i));
        }
        SignalSet {
            name: self.name.clone(),
            fs: self.fs,
            channels: self.channels,
            window_len: self.window_len,
            n_classes: self.n_classes,
            label_names: self.label_names.clone(),
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subjects: self
                .subjects
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
        }
    }

    /// Only the listed channels, in that order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<SignalSet> {
        if channels.is_empty() || channels.iter().any(|&c| c >= self.channels) {
            return Err(Error::invalid(format!(
                "channel selection {channels:?} of {}",
                self.channels
            )));
        }
        let t = self.window_len;
        let mut data = Vec::with_capacity(self.len() * channels.len() * t);
        for i in 0..self.len() {
            let w = self.window(i);
            for &c in channels {
                data.extend_from_slice(&w[c * t..(c + 1) * t]);
            }
        }
        Ok(SignalSet {
            channels: channels.len(),
            data,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SignalSet {
        SignalSet {
            name: "toy".into(),
            fs: 10.0,
            channels: 2,
            window_len: 3,
            n_classes: 2,
            label_names: vec!["a".into(), "b".into()],
            data: (0..18).map(|v| v as f32).collect(),
            labels: vec![0, 1, 0],
            subjects: Some(vec![7, 8, 9]),
        }
    }

    #[test]
    fn subset_and_channels() {
        let s = toy();
        s.validate().unwrap();
        let sub = s.subset(&[2, 0]);
        assert_eq!(sub.window(0), &[12.0, 13.0, 14.0, 15.0, 16.0, 17.0]);
        assert_eq!(sub.subjects, Some(vec![9, 7]));
        let ch = s.select_channels(&[1]).unwrap();
        assert_eq!(ch.window(1), &[9.0, 10.0, 11.0]);
        assert_eq!(s.recording(1).unwrap().channel(0), &[6.0, 7.0, 8.0]);
    }

    #[test]
    fn rejects_bad_labels() {
        let mut s = toy();
        s.labels[0] = 2;
        assert!(s.validate().is_err());
    }
}
