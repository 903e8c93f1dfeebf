use alloc::vec;
use alloc::vec::Vec;

use super::basic::dims3;
use super::graph::{GradSlots, Graph, Op, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;
pub const LN_EPS: f64 = 1e-5;

/// Per-channel batch statistics from a training-mode batch norm; the
/// variance is the unbiased estimate used for running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub(crate) struct BnSaved<S> {
    x: Var,
    gamma: Var,
    beta: Var,
    xhat: Vec<S>,
    inv_std: Vec<S>,
}

pub(crate) struct BnEvalSaved<S> {
    x: Var,
    gamma: Var,
    beta: Var,
    mean: Vec<S>,
    inv_std: Vec<S>,
}

pub(crate) struct LnSaved<S> {
    x: Var,
    gamma: Var,
    beta: Var,
    xhat: Vec<S>,
    inv_std: Vec<S>,
}

impl<'p, S: Scalar> Graph<'p, S> {
    /// Batch norm over `[N × C × T]` with statistics over `N` and `T`.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<(Var, BatchStats)> {
        let [n, c, t] = dims3(self.shape(x), "batch_norm")?;
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return Err(Error::shape("batch_norm affine width"));
        }
        let m = n * t;
        let xs = self.data(x);
        let (gs, bs) = (self.data(gamma), self.data(beta));
        let eps = S::from_f64(BN_EPS);
        let mut xhat = vec![S::zero(); xs.len()];
        let mut out = vec![S::zero(); xs.len()];
        let mut inv_std = vec![S::zero(); c];
        let mut stats = BatchStats {
            mean: vec![0.0; c],
            var: vec![0.0; c],
        };
        for ci in 0..c {
            let mut sum = S::zero();
            for ni in 0..n {
                sum += xs[(ni * c + ci) * t..(ni * c + ci + 1) * t]
                    .iter()
                    .copied()
                    .sum::<S>();
            }
            let mean = sum / S::from_f64(m as f64);
            let mut sq = S::zero();
            for ni in 0..n {
                for &v in &xs[(ni * c + ci) * t..(ni * c + ci + 1) * t] {
                    sq += (v - mean) * (v - mean);
                }
            }
            let var = sq / S::from_f64(m as f64);
            let is = S::one() / (var + eps).sqrt();
            inv_std[ci] = is;
            stats.mean[ci] = mean.as_f64();
            stats.var[ci] = if m > 1 {
                sq.as_f64() / (m - 1) as f64
            } else {
                0.0
            };
            for ni in 0..n {
                let range = (ni * c + ci) * t..(ni * c + ci + 1) * t;
                for i in range {
                    let h = (xs[i] - mean) * is;
                    xhat[i] = h;
                    out[i] = h * gs[ci] + bs[ci];
                }
            }
        }
        let tensor = Tensor::from_vec(&[n, c, t], out)?;
        let saved = BnSaved {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
        };
        Ok((
            self.push(tensor, Op::BatchNorm(saved), &[x, gamma, beta]),
            stats,
        ))
    }

    pub(crate) fn batch_norm_backward(&self, s: &BnSaved<S>, g: &[S], grads: &mut GradSlots<S>) {
        let sh = self.shape(s.x);
        let (n, c, t) = (sh[0], sh[1], sh[2]);
        let m = S::from_f64((n * t) as f64);
        let gs = self.data(s.gamma);
        let mut sum_g = vec![S::zero(); c];
        let mut sum_gx = vec![S::zero(); c];
        for ni in 0..n {
            for ci in 0..c {
                for i in (ni * c + ci) * t..(ni * c + ci + 1) * t {
                    sum_g[ci] += g[i];
                    sum_gx[ci] += g[i] * s.xhat[i];
                }
            }
        }
        if let Some(gg) = grads.slot(s.gamma) {
            super::kernels::add_into(gg, &sum_gx);
        }
        if let Some(gb) = grads.slot(s.beta) {
            super::kernels::add_into(gb, &sum_g);
        }
        if let Some(gx) = grads.slot(s.x) {
            for ni in 0..n {
                for ci in 0..c {
                    let k = gs[ci] * s.inv_std[ci] / m;
                    for i in (ni * c + ci) * t..(ni * c + ci + 1) * t {
                        gx[i] += k * (m * g[i] - sum_g[ci] - s.xhat[i] * sum_gx[ci]);
                    }
                }
            }
        }
    }

    /// Batch norm with frozen statistics (evaluation mode).
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[S],
        var: &[S],
    ) -> Result<Var> {
        let [n, c, t] = dims3(self.shape(x), "batch_norm_eval")?;
        if self.shape(gamma) != [c] || self.shape(beta) != [c] || mean.len() != c || var.len() != c
        {
            return Err(Error::shape("batch_norm_eval statistics width"));
        }
        let eps = S::from_f64(BN_EPS);
        let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();
        let (gs, bs) = (self.data(gamma), self.data(beta));
        let mut out = self.data(x).to_vec();
        for ni in 0..n {
            for ci in 0..c {
                for v in &mut out[(ni * c + ci) * t..(ni * c + ci + 1) * t] {
                    *v = (*v - mean[ci]) * inv_std[ci] * gs[ci] + bs[ci];
                }
            }
        }
        let tensor = Tensor::from_vec(&[n, c, t], out)?;
        let saved = BnEvalSaved {
            x,
            gamma,
            beta,
            mean: mean.to_vec(),
            inv_std,
        };
        Ok(self.push(tensor, Op::BatchNormEval(saved), &[x, gamma, beta]))
    }

    pub(crate) fn batch_norm_eval_backward(
        &self,
        s: &BnEvalSaved<S>,
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let sh = self.shape(s.x);
        let (n, c, t) = (sh[0], sh[1], sh[2]);
        let xs = self.data(s.x);
        let gs = self.data(s.gamma);
        let mut sum_g = vec![S::zero(); c];
        let mut sum_gx = vec![S::zero(); c];
        for ni in 0..n {
            for ci in 0..c {
                for i in (ni * c + ci) * t..(ni * c + ci + 1) * t {
                    sum_g[ci] += g[i];
                    sum_gx[ci] += g[i] * (xs[i] - s.mean[ci]) * s.inv_std[ci];
                }
            }
        }
        if let Some(gg) = grads.slot(s.gamma) {
            super::kernels::add_into(gg, &sum_gx);
        }
        if let Some(gb) = grads.slot(s.beta) {
            super::kernels::add_into(gb, &sum_g);
        }
        if let Some(gx) = grads.slot(s.x) {
            for ni in 0..n {
                for ci in 0..c {
                    let k = gs[ci] * s.inv_std[ci];
                    for i in (ni * c + ci) * t..(ni * c + ci + 1) * t {
                        gx[i] += k * g[i];
                    }
                }
            }
        }
    }

    /// Layer norm over the last axis.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let d = *self
            .shape(x)
            .last()
            .ok_or_else(|| Error::shape("layer_norm on scalar"))?;
        if self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::shape("layer_norm affine width"));
        }
        let eps = S::from_f64(LN_EPS);
        let inv_d = S::one() / S::from_f64(d as f64);
        let xs = self.data(x);
        let (gs, bs) = (self.data(gamma), self.data(beta));
        let rows = xs.len() / d;
        let mut xhat = vec![S::zero(); xs.len()];
        let mut out = vec![S::zero(); xs.len()];
        let mut inv_std = vec![S::zero(); rows];
        for r in 0..rows {
            let row = &xs[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<S>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() * inv_d;
            let is = S::one() / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gs[j] + bs[j];
            }
        }
        let tensor = Tensor::from_vec(self.shape(x), out)?;
        let saved = LnSaved {
            x,
            gamma,
            beta,
            xhat,
            inv_std,
        };
        Ok(self.push(tensor, Op::LayerNorm(saved), &[x, gamma, beta]))
    }

    pub(crate) fn layer_norm_backward(&self, s: &LnSaved<S>, g: &[S], grads: &mut GradSlots<S>) {
        let d = self.shape(s.gamma)[0];
        let gs = self.data(s.gamma);
        let rows = g.len() / d;
        if let Some(gg) = grads.slot(s.gamma) {
            for (gr, hr) in g.chunks_exact(d).zip(s.xhat.chunks_exact(d)) {
                for j in 0..d {
                    gg[j] += gr[j] * hr[j];
                }
            }
        }
        if let Some(gb) = grads.slot(s.beta) {
            for gr in g.chunks_exact(d) {
                super::kernels::add_into(gb, gr);
            }
        }
        if let Some(gx) = grads.slot(s.x) {
            let dn = S::from_f64(d as f64);
            for r in 0..rows {
                let gr = &g[r * d..(r + 1) * d];
                let hr = &s.xhat[r * d..(r + 1) * d];
                let mut sum = S::zero();
                let mut sum_h = S::zero();
                for j in 0..d {
                    let gh = gr[j] * gs[j];
                    sum += gh;
                    sum_h += gh * hr[j];
                }
                let k = s.inv_std[r] / dn;
                for j in 0..d {
                    gx[r * d + j] += k * (dn * gr[j] * gs[j] - sum - hr[j] * sum_h);
                }
            }
        }
    }
}
