//! Parameterized building blocks.

use alloc::vec::Vec;

use super::params::{Builder, ParamKind};
use super::pass::Pass;
use crate::autograd::{ParamRef, Var};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamRef,
    pub bias: Option<ParamRef>,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        name: &str,
        inp: usize,
        out: usize,
        bias: bool,
    ) -> Self {
        let mut s = b.scope(name);
        let bound = 1.0 / libm::sqrt(inp as f64);
        let weight = s.uniform("weight", &[out, inp], bound);
        let bias = bias.then(|| s.uniform("bias", &[out], bound));
        Linear {
            weight,
            bias,
            in_features: inp,
            out_features: out,
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let w = f.p(self.weight);
        let b = self.bias.map(|b| f.p(b));
        f.graph.linear(x, w, b)
    }
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: ParamRef,
    pub bias: Option<ParamRef>,
    pub stride: usize,
    pub pad: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
    ) -> Self {
        let mut s = b.scope(name);
        let bound = 1.0 / libm::sqrt((cin * kernel) as f64);
        let weight = s.uniform("weight", &[cout, cin, kernel], bound);
        let bias = bias.then(|| s.uniform("bias", &[cout], bound));
        Conv1d {
            weight,
            bias,
            stride,
            pad,
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let w = f.p(self.weight);
        let b = self.bias.map(|b| f.p(b));
        f.graph.conv1d(x, w, b, self.stride, self.pad)
    }
}

#[derive(Debug, Clone)]
pub struct ConvTranspose1d {
    pub weight: ParamRef,
    pub bias: Option<ParamRef>,
    pub stride: usize,
    pub pad: usize,
    pub out_pad: usize,
}

impl ConvTranspose1d {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new<S: Scalar>(
        b: &mut Builder<'_, S>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        out_pad: usize,
        bias: bool,
    ) -> Self {
        let mut s = b.scope(name);
        let bound = 1.0 / libm::sqrt((cout * kernel) as f64);
        let weight = s.uniform("weight", &[cin, cout, kernel], bound);
        let bias = bias.then(|| s.uniform("bias", &[cout], bound));
        ConvTranspose1d {
            weight,
            bias,
            stride,
            pad,
            out_pad,
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let w = f.p(self.weight);
        let b = self.bias.map(|b| f.p(b));
        f.graph
            .conv_transpose1d(x, w, b, self.stride, self.pad, self.out_pad)
    }
}

/// Batch statistics while training, running statistics otherwise.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub weight: ParamRef,
    pub bias: ParamRef,
    pub running_mean: ParamRef,
    pub running_var: ParamRef,
}

impl BatchNorm {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, name: &str, channels: usize) -> Self {
        let mut s = b.scope(name);
        BatchNorm {
            weight: s.constant("weight", &[channels], 1.0, ParamKind::Weight),
            bias: s.constant("bias", &[channels], 0.0, ParamKind::Weight),
            running_mean: s.constant("running_mean", &[channels], 0.0, ParamKind::Buffer),
            running_var: s.constant("running_var", &[channels], 1.0, ParamKind::Buffer),
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let gamma = f.p(self.weight);
        let beta = f.p(self.bias);
        if f.train() {
            let (y, stats) = f.graph.batch_norm(x, gamma, beta)?;
            f.record_bn(self.running_mean, self.running_var, stats);
            Ok(y)
        } else {
            let params = f.params();
            let mean: Vec<S> = params.value(self.running_mean).data().to_vec();
            let var: Vec<S> = params.value(self.running_var).data().to_vec();
            f.graph.batch_norm_eval(x, gamma, beta, &mean, &var)
        }
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub weight: ParamRef,
    pub bias: ParamRef,
}

impl LayerNorm {
    pub(crate) fn new<S: Scalar>(b: &mut Builder<'_, S>, name: &str, width: usize) -> Self {
        let mut s = b.scope(name);
        LayerNorm {
            weight: s.constant("weight", &[width], 1.0, ParamKind::Weight),
            bias: s.constant("bias", &[width], 0.0, ParamKind::Weight),
        }
    }

    pub fn forward<S: Scalar>(&self, f: &mut Pass<'_, S>, x: Var) -> Result<Var> {
        let g = f.p(self.weight);
        let b = f.p(self.bias);
        f.graph.layer_norm(x, g, b)
    }
}
