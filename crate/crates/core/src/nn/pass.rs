use alloc::vec::Vec;

use super::params::ParamStore;
use crate::autograd::{BatchStats, Graph, ParamRef, Var};
use crate::rng::Rng;
use crate::scalar::Scalar;

/// BatchNorm running-average momentum.
pub const BN_MOMENTUM: f64 = 0.1;

/// One forward pass: the tape plus the parameter store it borrows from.
pub struct Pass<'p, S: Scalar> {
    pub graph: Graph<'p, S>,
    params: &'p ParamStore<S>,
    bn_updates: Vec<(ParamRef, ParamRef, BatchStats)>,
}

impl<'p, S: Scalar> Pass<'p, S> {
    pub fn new(params: &'p ParamStore<S>, train: bool, rng: Rng) -> Self {
        Pass {
            graph: Graph::new(train, rng),
            params,
            bn_updates: Vec::new(),
        }
    }

    pub fn train(&self) -> bool {
        self.graph.is_train()
    }

    pub fn params(&self) -> &'p ParamStore<S> {
        self.params
    }

    /// Record parameter `id` on the tape.
    pub fn p(&mut self, id: ParamRef) -> Var {
        let params = self.params;
        self.graph.param(id, params.value(id), params.trainable(id))
    }

    pub(crate) fn record_bn(&mut self, mean: ParamRef, var: ParamRef, stats: BatchStats) {
        self.bn_updates.push((mean, var, stats));
    }

    /// Running-statistic updates collected during a training pass.
    pub fn take_bn_updates(&mut self) -> Vec<(ParamRef, ParamRef, BatchStats)> {
        core::mem::take(&mut self.bn_updates)
    }
}

/// Fold batch statistics into running averages.
pub fn apply_bn_updates<S: Scalar>(
    store: &mut ParamStore<S>,
    updates: &[(ParamRef, ParamRef, BatchStats)],
) {
    let m = BN_MOMENTUM;
    for (mean_id, var_id, stats) in updates {
        if store.frozen(*mean_id) {
            continue;
        }
        for (r, &b) in store
            .value_mut(*mean_id)
            .data_mut()
            .iter_mut()
            .zip(&stats.mean)
        {
            *r = S::from_f64((1.0 - m) * r.as_f64() + m * b);
        }
        for (r, &b) in store
            .value_mut(*var_id)
            .data_mut()
            .iter_mut()
            .zip(&stats.var)
        {
            *r = S::from_f64((1.0 - m) * r.as_f64() + m * b);
        }
    }
}
