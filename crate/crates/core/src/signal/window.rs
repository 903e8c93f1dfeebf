use alloc::vec::Vec;

use super::Recording;
use crate::error::{Error, Result};

/// Start offsets of overlapping fixed-length windows over a signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub window_len: usize,
    pub stride: usize,
    pub offsets: Vec<usize>,
}

/// Strided windows, plus an end-aligned tail window when the strided ones
/// stop short of `len`.
pub fn window_plan(len: usize, window_len: usize, stride: usize) -> Result<WindowPlan> {
    if window_len == 0 || stride == 0 {
        return Err(Error::invalid("window length and stride must be >= 1"));
    }
    if stride > window_len {
        return Err(Error::invalid(alloc::format!(
            "stride {stride} exceeds window {window_len}; windows would leave gaps"
        )));
    }
    if window_len > len {
        return Err(Error::invalid(alloc::format!(
            "window of {window_len} samples exceeds signal of {len}; zero-pad first"
        )));
    }
    let mut offsets: Vec<usize> = (0..=len - window_len).step_by(stride).collect();
    let tail = len - window_len;
    if offsets.last() != Some(&tail) {
        offsets.push(tail);
    }
    Ok(WindowPlan {
        window_len,
        stride,
        offsets,
    })
}

/// Append zeros to every channel up to `len` samples.
pub fn zero_pad_to(x: &Recording, len: usize) -> Result<Recording> {
    let t = x.len();
    if t > len {
        return Err(Error::invalid(alloc::format!(
            "cannot pad {t} samples down to {len}"
        )));
    }
    let mut out = Vec::with_capacity(len * x.channels());
    for c in 0..x.channels() {
        out.extend_from_slice(x.channel(c));
        out.resize((c + 1) * len, 0.0);
    }
    x.derive(out, x.fs())
}
