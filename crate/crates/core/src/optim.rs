//! Adam without weight decay.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::autograd::{ParamRef, Var};
use crate::error::Result;
use crate::nn::{apply_bn_updates, Model, ParamStore, Pass};
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Adam<S> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: BTreeMap<ParamRef, (Vec<S>, Vec<S>)>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update to every trainable parameter present in `grads`.
    pub fn step(&mut self, store: &mut ParamStore<S>, grads: &BTreeMap<ParamRef, Vec<S>>) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (S::from_f64(self.beta1), S::from_f64(self.beta2));
        let (one_b1, one_b2) = (S::from_f64(1.0 - self.beta1), S::from_f64(1.0 - self.beta2));
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        let step_size = S::from_f64(self.lr / c1);
        let sqrt_c2 = S::from_f64(libm::sqrt(c2));
        let eps = S::from_f64(self.eps);
        for (&id, g) in grads {
            if !store.trainable(id) {
                continue;
            }
            let value = store.value_mut(id).data_mut();
            let (m, v) = self
                .moments
                .entry(id)
                .or_insert_with(|| (vec![S::zero(); g.len()], vec![S::zero(); g.len()]));
            for i in 0..g.len() {
                m[i] = b1 * m[i] + one_b1 * g[i];
                v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
                value[i] -= step_size * m[i] / (v[i].sqrt() / sqrt_c2 + eps);
            }
        }
    }
}


/// One forward/backward/update cycle. `build` records the loss on the pass;
/// returns the loss value before the update.
pub fn train_step<S, F>(model: &mut Model<S>, adam: &mut Adam<S>, rng: Rng, build: F) -> Result<f64>
where
    S: Scalar,
    F: FnOnce(&Model<S>, &mut Pass<'_, S>) -> Result<Var>,
{
    let (loss, grads, updates) = {
        let mut f = Pass::new(&model.params, true, rng);
        let loss_var = build(model, &mut f)?;
        let loss = f.graph.scalar(loss_var).as_f64();
        if !loss.is_finite() {
            return Ok(loss);
        }
        let grads = f.graph.backward(loss_var)?.param_grads();
        (loss, grads, f.take_bn_updates())
    };
    apply_bn_updates(&mut model.params, &updates);
    adam.step(&mut model.params, &grads);
    Ok(loss)
}
