//! Central finite-difference checks of the analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autograd::{Graph, Var};
use crate::error::{Error, Result};
use crate::nn::{Model, Pass};
use crate::rng::seeded;
use crate::tensor::Tensor;

/// Default step for 64-bit checks.
pub const STEP: f64 = 1e-6;

/// Gradient norms below this are indistinguishable from the rounding noise
/// of a central difference and count as zero.
pub const NOISE_FLOOR: f64 = 1e-7;

/// Agreement between analytic and numerical gradients for one tensor.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub name: String,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`, 0 when both are below [`NOISE_FLOOR`].
    pub rel_err: f64,
    pub norm: f64,
}

fn rel_err(a: &[f64], n: &[f64]) -> (f64, f64) {
    let norm = |v: &[f64]| libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(n));
    if scale < NOISE_FLOOR {
        (0.0, scale)
    } else {
        (norm(&diff) / scale, scale)
    }
}

fn scalar_of(g: &Graph<'_, f64>, v: Var) -> Result<f64> {
    if g.value(v).len() != 1 {
        return Err(Error::shape("gradient check needs a scalar loss"));
    }
    Ok(g.scalar(v))
}

/// Check every trainable parameter of `model` against central differences of
/// `loss`. Each evaluation gets a fresh pass seeded with `seed`, so dropout
/// masks repeat exactly.
pub fn check_params<F>(
    model: &mut Model<f64>,
    train: bool,
    seed: u64,
    step: f64,
    loss: F,
) -> Result<Vec<GradReport>>
where
    F: for<'a> Fn(&'a Model<f64>, &mut Pass<'a, f64>) -> Result<Var>,
{
    let eval = |m: &Model<f64>| -> Result<f64> {
        let mut f = Pass::new(&m.params, train, seeded(seed));
        let v = loss(m, &mut f)?;
        scalar_of(&f.graph, v)
    };
    let analytic = {
        let mut f = Pass::new(&model.params, train, seeded(seed));
        let v = loss(model, &mut f)?;
        scalar_of(&f.graph, v)?;
        f.graph.backward(v)?.param_grads()
    };
    let mut out = Vec::new();
    for id in 0..model.params.len() {
        if !model.params.trainable(id) {
            continue;
        }
        let n = model.params.value(id).len();
        let mut numeric = Vec::with_capacity(n);
        for j in 0..n {
            let x0 = model.params.value(id).data()[j];
            model.params.value_mut(id).data_mut()[j] = x0 + step;
            let up = eval(model)?;
            model.params.value_mut(id).data_mut()[j] = x0 - step;
            let down = eval(model)?;
            model.params.value_mut(id).data_mut()[j] = x0;
            numeric.push((up - down) / (2.0 * step));
        }
        let zeros = alloc::vec![0.0; n];
        let a = analytic.get(&id).map_or(&zeros[..], |g| &g[..]);
        let (rel_err, norm) = rel_err(a, &numeric);
        out.push(GradReport {
            name: model.params.name(id).into(),
            rel_err,
            norm,
        });
    }
    Ok(out)
}

/// Check the gradients of free inputs. `build` maps leaves to a scalar loss.
pub fn check_leaves<F>(
    inputs: &[Tensor<f64>],
    train: bool,
    seed: u64,
    step: f64,
    build: F,
) -> Result<Vec<GradReport>>
where
    F: Fn(&mut Graph<'_, f64>, &[Var]) -> Result<Var>,
{
    let eval = |xs: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new(train, seeded(seed));
        let vars: Vec<Var> = xs.iter().map(|x| g.leaf(x.clone())).collect();
        let v = build(&mut g, &vars)?;
        scalar_of(&g, v)
    };
    let mut g = Graph::new(train, seeded(seed));
    let vars: Vec<Var> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let v = build(&mut g, &vars)?;
    scalar_of(&g, v)?;
    let grads = g.backward(v)?;
    let mut xs = inputs.to_vec();
    let mut out = Vec::new();
    for (i, &var) in vars.iter().enumerate() {
        let n = xs[i].len();
        let mut numeric = Vec::with_capacity(n);
        for j in 0..n {
            let x0 = xs[i].data()[j];
            xs[i].data_mut()[j] = x0 + step;
            let up = eval(&xs)?;
            xs[i].data_mut()[j] = x0 - step;
            let down = eval(&xs)?;
            xs[i].data_mut()[j] = x0;
            numeric.push((up - down) / (2.0 * step));
        }
        let zeros = alloc::vec![0.0; n];
        let a = grads.wrt(var).unwrap_or(&zeros);
        let (rel_err, norm) = rel_err(a, &numeric);
        out.push(GradReport {
            name: alloc::format!("input{i}"),
            rel_err,
            norm,
        });
    }
    Ok(out)
}
