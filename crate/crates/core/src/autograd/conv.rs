//! 1-D convolution and transposed convolution via im2col and GEMM.

use alloc::vec;
use alloc::vec::Vec;

use super::basic::dims3;
use super::graph::{GradSlots, Graph, Op, Var};
use super::kernels::matmul;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) struct ConvSaved<S> {
    x: Var,
    w: Var,
    b: Option<Var>,
    stride: usize,
    pad: usize,
    t_out: usize,
    /// im2col matrix `[Cin·K × N·T_out]`
    cols: Vec<S>,
}

pub(crate) struct ConvTSaved {
    x: Var,
    w: Var,
    b: Option<Var>,
    stride: usize,
    pad: usize,
    t_out: usize,
}

/// Output length of a strided convolution.
pub fn conv_out_len(t: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (t + 2 * pad).checked_sub(kernel).map(|v| v / stride + 1)
}

/// Output length of a transposed convolution.
pub fn conv_transpose_out_len(
    t: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Option<usize> {
    ((t.checked_sub(1)?) * stride + kernel + out_pad).checked_sub(2 * pad)
}

/// `[N × C × T] → [C × N·T]`
fn to_channel_major<S: Scalar>(x: &[S], n: usize, c: usize, t: usize) -> Vec<S> {
    let mut out = vec![S::zero(); n * c * t];
    for ni in 0..n {
        for ci in 0..c {
            let src = &x[(ni * c + ci) * t..(ni * c + ci + 1) * t];
            out[ci * n * t + ni * t..ci * n * t + (ni + 1) * t].copy_from_slice(src);
        }
    }
    out
}

/// `[C × N·T] → [N × C × T]`, accumulated into `out`.
fn add_from_channel_major<S: Scalar>(src: &[S], n: usize, c: usize, t: usize, out: &mut [S]) {
    for ni in 0..n {
        for ci in 0..c {
            let s = &src[ci * n * t + ni * t..ci * n * t + (ni + 1) * t];
            super::kernels::add_into(&mut out[(ni * c + ci) * t..(ni * c + ci + 1) * t], s);
        }
    }
}

impl<'p, S: Scalar> Graph<'p, S> {
    /// `x: [N × Cin × T]`, `w: [Cout × Cin × K]`, zero padding `pad` on both sides.
    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let [n, cin, t] = dims3(self.shape(x), "conv1d input")?;
        let [cout, wcin, k] = dims3(self.shape(w), "conv1d weight")?;
        if wcin != cin || stride == 0 {
            return Err(Error::shape(alloc::format!(
                "conv1d: {cin} input channels vs weight {wcin}"
            )));
        }
        let t_out = conv_out_len(t, k, stride, pad).ok_or_else(|| {
            Error::shape(alloc::format!(
                "conv1d: length {t} too short for kernel {k}"
            ))
        })?;
        let cols_w = n * t_out;
        let xs = self.data(x);
        let mut cols = vec![S::zero(); cin * k * cols_w];
        for ci in 0..cin {
            for kk in 0..k {
                let row = &mut cols[(ci * k + kk) * cols_w..(ci * k + kk + 1) * cols_w];
                for ni in 0..n {
                    let src = &xs[(ni * cin + ci) * t..(ni * cin + ci + 1) * t];
                    for to in 0..t_out {
                        let pos = (to * stride + kk) as isize - pad as isize;
                        if pos >= 0 && (pos as usize) < t {
                            row[ni * t_out + to] = src[pos as usize];
                        }
                    }
                }
            }
        }
        let mut y = vec![S::zero(); cout * cols_w];
        matmul(
            cout,
            cin * k,
            cols_w,
            self.data(w),
            false,
            &cols,
            false,
            S::zero(),
            &mut y,
        );
        let mut out = vec![S::zero(); n * cout * t_out];
        for co in 0..cout {
            let bias = b.map_or(S::zero(), |b| self.data(b)[co]);
            for ni in 0..n {
                let src = &y[co * cols_w + ni * t_out..co * cols_w + (ni + 1) * t_out];
                let dst = &mut out[(ni * cout + co) * t_out..(ni * cout + co + 1) * t_out];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = *s + bias;
                }
            }
        }
        let tensor = Tensor::from_vec(&[n, cout, t_out], out)?;
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        let saved = ConvSaved {
            x,
            w,
            b,
            stride,
            pad,
            t_out,
            cols,
        };
        Ok(self.push(tensor, Op::Conv1d(saved), &inputs))
    }

    pub(crate) fn conv1d_backward(&self, s: &ConvSaved<S>, g: &[S], grads: &mut GradSlots<S>) {
        let xs = self.shape(s.x);
        let (n, cin, t) = (xs[0], xs[1], xs[2]);
        let ws = self.shape(s.w);
        let (cout, k) = (ws[0], ws[2]);
        let cols_w = n * s.t_out;
        let gy = to_channel_major(g, n, cout, s.t_out);
        if let Some(gw) = grads.slot(s.w) {
            matmul(
                cout,
                cols_w,
                cin * k,
                &gy,
                false,
                &s.cols,
                true,
                S::one(),
                gw,
            );
        }
        if let Some(b) = s.b {
            if let Some(gb) = grads.slot(b) {
                for (co, d) in gb.iter_mut().enumerate() {
                    *d += gy[co * cols_w..(co + 1) * cols_w]
                        .iter()
                        .copied()
                        .sum::<S>();
                }
            }
        }
        if self.needs_grad(s.x) {
            let mut gcols = vec![S::zero(); cin * k * cols_w];
            matmul(
                cin * k,
                cout,
                cols_w,
                self.data(s.w),
                true,
                &gy,
                false,
                S::zero(),
                &mut gcols,
            );
            let gx = grads.slot(s.x).expect("needs grad");
            for ci in 0..cin {
                for kk in 0..k {
                    let row = &gcols[(ci * k + kk) * cols_w..(ci * k + kk + 1) * cols_w];
                    for ni in 0..n {
                        let dst = &mut gx[(ni * cin + ci) * t..(ni * cin + ci + 1) * t];
                        for to in 0..s.t_out {
                            let pos = (to * s.stride + kk) as isize - s.pad as isize;
                            if pos >= 0 && (pos as usize) < t {
                                dst[pos as usize] += row[ni * s.t_out + to];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Transposed convolution, `x: [N × Cin × T]`, `w: [Cin × Cout × K]`;
    /// output length `(T − 1)·stride − 2·pad + K + out_pad`.
    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Result<Var> {
        let [n, cin, t] = dims3(self.shape(x), "conv_transpose1d input")?;
        let [wcin, cout, k] = dims3(self.shape(w), "conv_transpose1d weight")?;
        if wcin != cin || stride == 0 {
            return Err(Error::shape(alloc::format!(
                "conv_transpose1d: {cin} input channels vs weight {wcin}"
            )));
        }
        let t_out = conv_transpose_out_len(t, k, stride, pad, out_pad)
            .ok_or_else(|| Error::shape("conv_transpose1d: padding exceeds output"))?;
        let xc = to_channel_major(self.data(x), n, cin, t);
        let nt = n * t;
        let mut cols = vec![S::zero(); cout * k * nt];
        matmul(
            cout * k,
            cin,
            nt,
            self.data(w),
            true,
            &xc,
            false,
            S::zero(),
            &mut cols,
        );
        let mut out = vec![S::zero(); n * cout * t_out];
        for co in 0..cout {
            let bias = b.map_or(S::zero(), |b| self.data(b)[co]);
            for ni in 0..n {
                let dst = &mut out[(ni * cout + co) * t_out..(ni * cout + co + 1) * t_out];
                dst.iter_mut().for_each(|v| *v = bias);
                for kk in 0..k {
                    let row = &cols[(co * k + kk) * nt + ni * t..(co * k + kk) * nt + (ni + 1) * t];
                    for (ti, &v) in row.iter().enumerate() {
                        let j = (ti * stride + kk) as isize - pad as isize;
                        if j >= 0 && (j as usize) < t_out {
                            dst[j as usize] += v;
                        }
                    }
                }
            }
        }
        let tensor = Tensor::from_vec(&[n, cout, t_out], out)?;
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        let saved = ConvTSaved {
            x,
            w,
            b,
            stride,
            pad,
            t_out,
        };
        Ok(self.push(tensor, Op::ConvTranspose1d(saved), &inputs))
    }

    pub(crate) fn conv_transpose1d_backward(
        &self,
        s: &ConvTSaved,
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let xs = self.shape(s.x);
        let (n, cin, t) = (xs[0], xs[1], xs[2]);
        let ws = self.shape(s.w);
        let (cout, k) = (ws[1], ws[2]);
        let nt = n * t;
        let mut gcols = vec![S::zero(); cout * k * nt];
        for co in 0..cout {
            for ni in 0..n {
                let src = &g[(ni * cout + co) * s.t_out..(ni * cout + co + 1) * s.t_out];
                for kk in 0..k {
                    let row =
                        &mut gcols[(co * k + kk) * nt + ni * t..(co * k + kk) * nt + (ni + 1) * t];
                    for (ti, d) in row.iter_mut().enumerate() {
                        let j = (ti * s.stride + kk) as isize - s.pad as isize;
                        if j >= 0 && (j as usize) < s.t_out {
                            *d = src[j as usize];
                        }
                    }
                }
            }
        }
        if let Some(b) = s.b {
            if let Some(gb) = grads.slot(b) {
                for (co, d) in gb.iter_mut().enumerate() {
                    for ni in 0..n {
                        *d += g[(ni * cout + co) * s.t_out..(ni * cout + co + 1) * s.t_out]
                            .iter()
                            .copied()
                            .sum::<S>();
                    }
                }
            }
        }
        if grads.slot(s.w).is_some() {
            let xc = to_channel_major(self.data(s.x), n, cin, t);
            let gw = grads.slot(s.w).unwrap();
            matmul(cin, nt, cout * k, &xc, false, &gcols, true, S::one(), gw);
        }
        if self.needs_grad(s.x) {
            let mut gxc = vec![S::zero(); cin * nt];
            matmul(
                cin,
                cout * k,
                nt,
                self.data(s.w),
                false,
                &gcols,
                false,
                S::zero(),
                &mut gxc,
            );
            let gx = grads.slot(s.x).expect("needs grad");
            add_from_channel_major(&gxc, n, cin, t, gx);
        }
    }
}
