use alloc::vec::Vec;

use super::Recording;
use crate::error::{Error, Result};

/// Linear interpolation of `x` at fractional position `pos`, clamped to the last sample.
fn lerp_at(x: &[f64], pos: f64) -> f64 {
    let last = x.len() - 1;
    if pos >= last as f64 {
        return x[last];
    }
    let i = libm::floor(pos) as usize;
    let frac = pos - i as f64;
    if frac == 0.0 {
        x[i]
    } else {
        x[i] + (x[i + 1] - x[i]) * frac
    }
}

/// Resample every channel to `fs_out` on a uniform grid starting at the first sample.
///
/// The output has `round(T · fs_out / fs_in)` samples. No anti-aliasing filter
/// is applied, so content above the new Nyquist frequency folds back.
pub fn resample_linear(x: &Recording, fs_out: f64) -> Result<Recording> {
    if !(fs_out > 0.0 && fs_out.is_finite()) {
        return Err(Error::invalid(alloc::format!(
            "target rate must be positive, got {fs_out}"
        )));
    }
    if x.samples().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if fs_out == x.fs() {
        return Ok(x.clone());
    }
    let t_in = x.len();
    let t_out = libm::round(t_in as f64 * fs_out / x.fs()) as usize;
    if t_out < 1 {
        return Err(Error::DegenerateResample(t_out));
    }
    let step = x.fs() / fs_out;
    let mut out = Vec::with_capacity(t_out * x.channels());
    for c in 0..x.channels() {
        let ch = x.channel(c);
        out.extend((0..t_out).map(|j| lerp_at(ch, j as f64 * step)));
    }
    x.derive(out, fs_out)
}

/// Stretch or squeeze every channel to exactly `len` samples, keeping both endpoints.
pub fn interpolate_to_length(x: &Recording, len: usize) -> Result<Recording> {
    if len < 2 {
        return Err(Error::invalid(alloc::format!(
            "interpolation length must be >= 2, got {len}"
        )));
    }
    let t_in = x.len();
    let fs_out = x.fs() * len as f64 / t_in as f64;
    if len == t_in {
        return x.derive(x.samples().to_vec(), fs_out);
    }
    let step = (t_in - 1) as f64 / (len - 1) as f64;
    let mut out = Vec::with_capacity(len * x.channels());
    for c in 0..x.channels() {
        let ch = x.channel(c);
        out.extend((0..len).map(|j| lerp_at(ch, j as f64 * step)));
    }
    x.derive(out, fs_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_rate_is_exact() {
        let x = Recording::new(vec![0.3, -1.0, 2.5, 7.0], 2, 100.0).unwrap();
        assert_eq!(resample_linear(&x, 100.0).unwrap(), x);
    }

    #[test]
    fn ramp_interpolates_exactly() {
        let x = Recording::new(vec![0.0, 1.0, 2.0, 3.0], 1, 4.0).unwrap();
        let y = interpolate_to_length(&x, 7).unwrap();
        assert_eq!(y.samples(), &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!((y.fs() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn interpolate_identity_and_errors() {
        let x = Recording::new(vec![1.0, 5.0, -2.0], 1, 3.0).unwrap();
        assert_eq!(interpolate_to_length(&x, 3).unwrap().samples(), x.samples());
        assert!(interpolate_to_length(&x, 1).is_err());
    }

    #[test]
    fn degenerate_resample_is_rejected() {
        let x = Recording::new(vec![1.0, 2.0], 1, 1000.0).unwrap();
        assert_eq!(
            resample_linear(&x, 1.0).unwrap_err(),
            Error::DegenerateResample(0)
        );
        assert!(resample_linear(&x, 0.0).is_err());
    }

    #[test]
    fn first_sample_preserved_and_labels_carried() {
        let x = Recording::new(vec![4.0, 1.0, 0.0, 2.0, 8.0], 1, 50.0)
            .unwrap()
            .with_label(3)
            .with_subject(9);
        let y = resample_linear(&x, 100.0).unwrap();
        assert_eq!(y.len(), 10);
        assert_eq!(y.samples()[0], 4.0);
        assert_eq!(y.label, Some(3));
        assert_eq!(y.subject, Some(9));
    }
}
