//! Deterministic signal-processing primitives.
//!
//! All functions here are pure and operate in `f64`.

mod fft;
mod mel;
mod recording;
mod resample;
mod window;

pub use fft::Fft;
pub use mel::{
    frequency_target, mel_spectrogram, zscore_over_time, MelConfig, MelSpectrogram, ZSCORE_EPS,
};
pub use recording::Recording;
pub use resample::{interpolate_to_length, resample_linear};
pub use window::{window_plan, zero_pad_to, WindowPlan};
