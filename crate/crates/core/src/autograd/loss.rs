use alloc::vec;
use alloc::vec::Vec;

use super::graph::{GradSlots, Graph, Op, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

impl<'p, S: Scalar> Graph<'p, S> {
    /// Mean squared error over the elements flagged in `weights`; unflagged
    /// elements contribute nothing to the value or the gradient.
    pub fn masked_mse(&mut self, pred: Var, target: Vec<S>, weights: Vec<bool>) -> Result<Var> {
        let n = self.value(pred).len();
        if target.len() != n || weights.len() != n {
            return Err(Error::shape(alloc::format!(
                "masked_mse: prediction has {n} elements, target {} and mask {}",
                target.len(),
                weights.len()
            )));
        }
        let count = weights.iter().filter(|&&w| w).count();
        if count == 0 {
            return Err(Error::NoPretextSignal);
        }
        let mut sum = S::zero();
        for ((&p, &t), &w) in self.data(pred).iter().zip(&target).zip(&weights) {
            if w {
                sum += (p - t) * (p - t);
            }
        }
        let loss = sum / S::from_f64(count as f64);
        let tensor = Tensor::from_vec(&[1], vec![loss])?;
        Ok(self.push(
            tensor,
            Op::MaskedMse {
                pred,
                target,
                weights,
                count,
            },
            &[pred],
        ))
    }

    pub(crate) fn masked_mse_backward(
        &self,
        pred: Var,
        target: &[S],
        weights: &[bool],
        count: usize,
        g: S,
        grads: &mut GradSlots<S>,
    ) {
        let k = g * S::from_f64(2.0 / count as f64);
        let ps = self.data(pred);
        if let Some(gp) = grads.slot(pred) {
            for (i, d) in gp.iter_mut().enumerate() {
                if weights[i] {
                    *d += k * (ps[i] - target[i]);
                }
            }
        }
    }

    /// Mean negative log-likelihood of `labels` under softmax of `logits: [N × K]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits);
        if s.len() != 2 || s[0] != labels.len() || s[0] == 0 {
            return Err(Error::shape(alloc::format!(
                "cross_entropy: logits {s:?} vs {} labels",
                labels.len()
            )));
        }
        let (n, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(alloc::format!(
                "label {bad} outside {k} classes"
            )));
        }
        let probs = softmax_rows(self.data(logits), k);
        let mut nll = S::zero();
        for (i, &l) in labels.iter().enumerate() {
            nll -= probs[i * k + l].max(S::min_positive_value()).ln();
        }
        let loss = nll / S::from_f64(n as f64);
        let tensor = Tensor::from_vec(&[1], vec![loss])?;
        Ok(self.push(
            tensor,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    pub(crate) fn cross_entropy_backward(
        &self,
        logits: Var,
        labels: &[usize],
        probs: &[S],
        g: S,
        grads: &mut GradSlots<S>,
    ) {
        let n = labels.len();
        let k = probs.len() / n;
        let scale = g / S::from_f64(n as f64);
        if let Some(gl) = grads.slot(logits) {
            for (i, &l) in labels.iter().enumerate() {
                for j in 0..k {
                    let y = if j == l { S::one() } else { S::zero() };
                    gl[i * k + j] += scale * (probs[i * k + j] - y);
                }
            }
        }
    }
}

/// Row-wise softmax of a `[rows × k]` matrix.
pub fn softmax_rows<S: Scalar>(x: &[S], k: usize) -> Vec<S> {
    let mut out = x.to_vec();
    for row in out.chunks_exact_mut(k) {
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let mut total = S::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}
