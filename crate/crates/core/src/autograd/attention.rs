use alloc::vec;
use alloc::vec::Vec;

use super::basic::dims3;
use super::graph::{GradSlots, Graph, Op, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) struct AttnSaved<S> {
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    /// softmax weights `[N × H × P × P]`
    probs: Vec<S>,
}

/// Scaled dot-product attention weights `[N × H × P × P]` for `q, k: [N × P × D]`.
/// Every row is a softmax and sums to one.
pub fn attention_weights<S: Scalar>(
    q: &[S],
    k: &[S],
    n: usize,
    p: usize,
    d: usize,
    heads: usize,
) -> Vec<S> {
    let dh = d / heads;
    let scale = S::one() / S::from_f64(dh as f64).sqrt();
    let mut probs = vec![S::zero(); n * heads * p * p];
    for ni in 0..n {
        let qn = &q[ni * p * d..(ni + 1) * p * d];
        let kn = &k[ni * p * d..(ni + 1) * p * d];
        for h in 0..heads {
            let off = h * dh;
            for i in 0..p {
                let row =
                    &mut probs[((ni * heads + h) * p + i) * p..((ni * heads + h) * p + i + 1) * p];
                let qi = &qn[i * d + off..i * d + off + dh];
                let mut max = S::neg_infinity();
                for (j, r) in row.iter_mut().enumerate() {
                    let kj = &kn[j * d + off..j * d + off + dh];
                    let s = qi.iter().zip(kj).map(|(a, b)| *a * *b).sum::<S>() * scale;
                    *r = s;
                    if s > max {
                        max = s;
                    }
                }
                let mut total = S::zero();
                for r in row.iter_mut() {
                    *r = (*r - max).exp();
                    total += *r;
                }
                let inv = S::one() / total;
                row.iter_mut().for_each(|r| *r *= inv);
            }
        }
    }
    probs
}

impl<'p, S: Scalar> Graph<'p, S> {
    /// Multi-head scaled dot-product attention without masking.
    /// `q, k, v: [N × P × D]`, `D` divisible by `heads`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize) -> Result<Var> {
        let [n, p, d] = dims3(self.shape(q), "attention")?;
        if self.shape(k) != [n, p, d] || self.shape(v) != [n, p, d] {
            return Err(Error::shape("attention: q, k, v shapes differ"));
        }
        if heads == 0 || d % heads != 0 {
            return Err(Error::shape(alloc::format!(
                "attention: width {d} not divisible by {heads} heads"
            )));
        }
        let dh = d / heads;
        let probs = attention_weights(self.data(q), self.data(k), n, p, d, heads);
        let vs = self.data(v);
        let mut out = vec![S::zero(); n * p * d];
        for ni in 0..n {
            for h in 0..heads {
                let off = h * dh;
                for i in 0..p {
                    let a =
                        &probs[((ni * heads + h) * p + i) * p..((ni * heads + h) * p + i + 1) * p];
                    let dst = &mut out[(ni * p + i) * d + off..(ni * p + i) * d + off + dh];
                    for (j, &w) in a.iter().enumerate() {
                        let vj = &vs[(ni * p + j) * d + off..(ni * p + j) * d + off + dh];
                        for (o, &x) in dst.iter_mut().zip(vj) {
                            *o += w * x;
                        }
                    }
                }
            }
        }
        let tensor = Tensor::from_vec(&[n, p, d], out)?;
        let saved = AttnSaved {
            q,
            k,
            v,
            heads,
            probs,
        };
        Ok(self.push(tensor, Op::Attention(saved), &[q, k, v]))
    }

    pub(crate) fn attention_backward(&self, s: &AttnSaved<S>, g: &[S], grads: &mut GradSlots<S>) {
        let sh = self.shape(s.q);
        let (n, p, d) = (sh[0], sh[1], sh[2]);
        let heads = s.heads;
        let dh = d / heads;
        let scale = S::one() / S::from_f64(dh as f64).sqrt();
        let (qs, ks, vs) = (self.data(s.q), self.data(s.k), self.data(s.v));
        let mut gq = vec![S::zero(); n * p * d];
        let mut gk = vec![S::zero(); n * p * d];
        let mut gv = vec![S::zero(); n * p * d];
        let mut ds = vec![S::zero(); p * p];
        for ni in 0..n {
            let base = ni * p * d;
            for h in 0..heads {
                let off = h * dh;
                let a = &s.probs[(ni * heads + h) * p * p..(ni * heads + h + 1) * p * p];
                for i in 0..p {
                    let go = &g[base + i * d + off..base + i * d + off + dh];
                    // dA[i][j] = <dO_i, V_j>
                    let mut dot = S::zero();
                    for j in 0..p {
                        let vj = &vs[base + j * d + off..base + j * d + off + dh];
                        let da = go.iter().zip(vj).map(|(x, y)| *x * *y).sum::<S>();
                        ds[i * p + j] = da;
                        dot += da * a[i * p + j];
                        let w = a[i * p + j];
                        for (gvj, &x) in gv[base + j * d + off..base + j * d + off + dh]
                            .iter_mut()
                            .zip(go)
                        {
                            *gvj += w * x;
                        }
                    }
                    for j in 0..p {
                        ds[i * p + j] = a[i * p + j] * (ds[i * p + j] - dot) * scale;
                    }
                }
                for i in 0..p {
                    for j in 0..p {
                        let w = ds[i * p + j];
                        if w == S::zero() {
                            continue;
                        }
                        for c in 0..dh {
                            gq[base + i * d + off + c] += w * ks[base + j * d + off + c];
                            gk[base + j * d + off + c] += w * qs[base + i * d + off + c];
                        }
                    }
                }
            }
        }
        grads.accumulate(s.q, &gq);
        grads.accumulate(s.k, &gk);
        grads.accumulate(s.v, &gv);
    }
}
