use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::attention::AttnSaved;
use super::conv::{ConvSaved, ConvTSaved};
use super::norm::{BnEvalSaved, BnSaved, LnSaved};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub(crate) usize);

/// Index of a parameter in its store.
pub type ParamRef = usize;

pub(crate) enum Value<'p, S> {
    Owned(Tensor<S>),
    Borrowed(&'p Tensor<S>),
}

pub(crate) enum Op<S> {
    Input,
    Leaf,
    Param(ParamRef),
    Add(Var, Var),
    Scale(Var, S),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv1d(ConvSaved<S>),
    ConvTranspose1d(ConvTSaved),
    BatchNorm(BnSaved<S>),
    BatchNormEval(BnEvalSaved<S>),
    LayerNorm(LnSaved<S>),
    Gelu(Var),
    Dropout {
        x: Var,
        mask: Vec<S>,
    },
    Transpose12(Var),
    Reshape(Var),
    AddPositional {
        x: Var,
        pos: Var,
    },
    MaskReplace {
        x: Var,
        token: Var,
        mask: Vec<bool>,
    },
    Attention(AttnSaved<S>),
    GroupMean {
        x: Var,
        groups: Vec<usize>,
    },
    ConcatLast {
        a: Var,
        b: Var,
    },
    SliceRows {
        x: Var,
        start: usize,
    },
    ConcatRows(Vec<Var>),
    MaskedMse {
        pred: Var,
        target: Vec<S>,
        weights: Vec<bool>,
        count: usize,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<S>,
    },
}

pub(crate) struct Node<'p, S> {
    pub(crate) value: Value<'p, S>,
    pub(crate) op: Op<S>,
    pub(crate) needs_grad: bool,
}

/// Tape of one forward pass.
pub struct Graph<'p, S: Scalar> {
    pub(crate) nodes: Vec<Node<'p, S>>,
    train: bool,
    pub(crate) rng: Rng,
}

impl<'p, S: Scalar> Graph<'p, S> {
    /// A tape in training (`train = true`: dropout active, batch statistics)
    /// or evaluation mode. `rng` drives dropout.
    pub fn new(train: bool, rng: Rng) -> Self {
        Graph {
            nodes: Vec::new(),
            train,
            rng,
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, value: Tensor<S>, op: Op<S>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Input,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Free leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed parameter. Frozen parameters (`trainable = false`) are
    /// recorded without a gradient.
    pub fn param(&mut self, id: ParamRef, value: &'p Tensor<S>, trainable: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(value),
            op: Op::Param(id),
            needs_grad: trainable,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub(crate) fn data(&self, v: Var) -> &[S] {
        self.value(v).data()
    }

    pub(crate) fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> S {
        self.data(v)[0]
    }

    /// Gradients of the scalar `loss` with respect to every leaf and parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape("backward needs a scalar loss"));
        }
        let mut grads = GradSlots::new(self);
        grads.slots[loss.0] = Some(vec![S::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads.slots[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Leaf | Op::Param(_) => {
                    grads.slots[i] = Some(g);
                }
                _ if !node.needs_grad => {}
                Op::Add(a, b) => {
                    grads.accumulate(*a, &g);
                    grads.accumulate(*b, &g);
                }
                Op::Scale(a, c) => {
                    if let Some(ga) = grads.slot(*a) {
                        for (d, s) in ga.iter_mut().zip(&g) {
                            *d += *s * *c;
                        }
                    }
                }
                Op::Linear { x, w, b } => self.linear_backward(*x, *w, *b, &g, &mut grads),
                Op::Conv1d(saved) => self.conv1d_backward(saved, &g, &mut grads),
                Op::ConvTranspose1d(saved) => self.conv_transpose1d_backward(saved, &g, &mut grads),
                Op::BatchNorm(saved) => self.batch_norm_backward(saved, &g, &mut grads),
                Op::BatchNormEval(saved) => self.batch_norm_eval_backward(saved, &g, &mut grads),
                Op::LayerNorm(saved) => self.layer_norm_backward(saved, &g, &mut grads),
                Op::Gelu(x) => self.gelu_backward(*x, &g, &mut grads),
                Op::Dropout { x, mask } => {
                    if let Some(gx) = grads.slot(*x) {
                        for ((d, s), m) in gx.iter_mut().zip(&g).zip(mask) {
                            *d += *s * *m;
                        }
                    }
                }
                Op::Transpose12(x) => self.transpose12_backward(*x, &g, &mut grads),
                Op::Reshape(x) => grads.accumulate(*x, &g),
                Op::AddPositional { x, pos } => {
                    self.add_positional_backward(*x, *pos, &g, &mut grads)
                }
                Op::MaskReplace { x, token, mask } => {
                    self.mask_replace_backward(*x, *token, mask, &g, &mut grads)
                }
                Op::Attention(saved) => self.attention_backward(saved, &g, &mut grads),
                Op::GroupMean { x, groups } => self.group_mean_backward(*x, groups, &g, &mut grads),
                Op::ConcatLast { a, b } => self.concat_last_backward(*a, *b, &g, &mut grads),
                Op::SliceRows { x, start } => self.slice_rows_backward(*x, *start, &g, &mut grads),
                Op::ConcatRows(parts) => self.concat_rows_backward(parts, &g, &mut grads),
                Op::MaskedMse {
                    pred,
                    target,
                    weights,
                    count,
                } => self.masked_mse_backward(*pred, target, weights, *count, g[0], &mut grads),
                Op::CrossEntropy {
                    logits,
                    labels,
                    probs,
                } => self.cross_entropy_backward(*logits, labels, probs, g[0], &mut grads),
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) if n.needs_grad => Some((id, Var(i))),
                _ => None,
            })
            .collect();
        Ok(Gradients {
            slots: grads.slots,
            params,
        })
    }
}

/// Gradient accumulators, one per node, allocated on first use.
pub(crate) struct GradSlots<S> {
    pub(crate) slots: Vec<Option<Vec<S>>>,
    needs: Vec<bool>,
    lens: Vec<usize>,
}

impl<S: Scalar> GradSlots<S> {
    fn new(g: &Graph<'_, S>) -> Self {
        GradSlots {
            slots: (0..g.nodes.len()).map(|_| None).collect(),
            needs: g.nodes.iter().map(|n| n.needs_grad).collect(),
            lens: (0..g.nodes.len()).map(|i| g.value(Var(i)).len()).collect(),
        }
    }

    /// Mutable accumulator for `v`, or `None` when `v` needs no gradient.
    pub(crate) fn slot(&mut self, v: Var) -> Option<&mut [S]> {
        if !self.needs[v.0] {
            return None;
        }
        let len = self.lens[v.0];
        Some(self.slots[v.0].get_or_insert_with(|| vec![S::zero(); len]))
    }

    pub(crate) fn accumulate(&mut self, v: Var, g: &[S]) {
        if let Some(dst) = self.slot(v) {
            super::kernels::add_into(dst, g);
        }
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients<S> {
    slots: Vec<Option<Vec<S>>>,
    params: Vec<(ParamRef, Var)>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of a leaf or parameter node; `None` if nothing reached it.
    pub fn wrt(&self, v: Var) -> Option<&[S]> {
        self.slots.get(v.0).and_then(|s| s.as_deref())
    }

    /// Parameter gradients keyed by parameter id, summed over repeated uses.
    pub fn param_grads(&self) -> BTreeMap<ParamRef, Vec<S>> {
        let mut out: BTreeMap<ParamRef, Vec<S>> = BTreeMap::new();
        for &(id, v) in &self.params {
            if let Some(g) = self.wrt(v) {
                match out.get_mut(&id) {
                    Some(acc) => super::kernels::add_into(acc, g),
                    None => {
                        out.insert(id, g.to_vec());
                    }
                }
            }
        }
        out
    }
}
