use alloc::vec;
use alloc::vec::Vec;

use rand::RngExt;

use super::graph::{GradSlots, Graph, Op, Var};
use super::kernels::{matmul, transpose12};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(alloc::format!(
                "add: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| *x + *y)
            .collect();
        let t = Tensor::from_vec(self.shape(a), data)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: S) -> Var {
        let t = self.value(a).map(|v| v * c);
        self.push(t, Op::Scale(a, c), &[a])
    }

    /// `x @ wᵀ + b` over the last axis; `w` is `[out × in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (out_f, in_f) = match self.shape(w) {
            [o, i] => (*o, *i),
            s => {
                return Err(Error::shape(alloc::format!(
                    "linear weight must be 2-D, got {s:?}"
                )))
            }
        };
        let xs = self.shape(x);
        if xs.last() != Some(&in_f) {
            return Err(Error::shape(alloc::format!(
                "linear: input {xs:?} vs weight [{out_f}, {in_f}]"
            )));
        }
        if let Some(b) = b {
            if self.shape(b) != [out_f] {
                return Err(Error::shape("linear: bias width"));
            }
        }
        let rows = self.value(x).len() / in_f;
        let mut shape = xs.to_vec();
        *shape.last_mut().unwrap() = out_f;
        let mut out = vec![S::zero(); rows * out_f];
        if let Some(b) = b {
            let bias = self.data(b);
            for row in out.chunks_exact_mut(out_f) {
                row.copy_from_slice(bias);
            }
        }
        let beta = if b.is_some() { S::one() } else { S::zero() };
        matmul(
            rows,
            in_f,
            out_f,
            self.data(x),
            false,
            self.data(w),
            true,
            beta,
            &mut out,
        );
        let t = Tensor::from_vec(&shape, out)?;
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        Ok(self.push(t, Op::Linear { x, w, b }, &inputs))
    }

    pub(crate) fn linear_backward(
        &self,
        x: Var,
        w: Var,
        b: Option<Var>,
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let [out_f, in_f] = [self.shape(w)[0], self.shape(w)[1]];
        let rows = self.value(x).len() / in_f;
        if let Some(gx) = grads.slot(x) {
            matmul(
                rows,
                out_f,
                in_f,
                g,
                false,
                self.data(w),
                false,
                S::one(),
                gx,
            );
        }
        if let Some(gw) = grads.slot(w) {
            matmul(
                out_f,
                rows,
                in_f,
                g,
                true,
                self.data(x),
                false,
                S::one(),
                gw,
            );
        }
        if let Some(b) = b {
            if let Some(gb) = grads.slot(b) {
                for row in g.chunks_exact(out_f) {
                    super::kernels::add_into(gb, row);
                }
            }
        }
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let half = S::from_f64(0.5);
        let r = S::from_f64(FRAC_1_SQRT_2);
        let t = self.value(x).map(|v| half * v * (S::one() + (v * r).erf()));
        self.push(t, Op::Gelu(x), &[x])
    }

    pub(crate) fn gelu_backward(&self, x: Var, g: &[S], grads: &mut GradSlots<S>) {
        let half = S::from_f64(0.5);
        let r = S::from_f64(FRAC_1_SQRT_2);
        let c = S::from_f64(FRAC_1_SQRT_2PI);
        let xs = self.data(x);
        if let Some(gx) = grads.slot(x) {
            for ((d, &v), &gy) in gx.iter_mut().zip(xs).zip(g) {
                let cdf = half * (S::one() + (v * r).erf());
                let pdf = c * (-half * v * v).exp();
                *d += gy * (cdf + v * pdf);
            }
        }
    }

    /// Inverted dropout; the identity in evaluation mode or for `p = 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        if !self.is_train() || p <= 0.0 {
            return x;
        }
        let keep = S::from_f64(1.0 / (1.0 - p));
        let n = self.value(x).len();
        let mask: Vec<S> = (0..n)
            .map(|_| {
                if self.rng.random::<f64>() < p {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = self
            .data(x)
            .iter()
            .zip(&mask)
            .map(|(v, m)| *v * *m)
            .collect();
        let t = Tensor::from_vec(self.shape(x), data).expect("same length");
        self.push(t, Op::Dropout { x, mask }, &[x])
    }

    /// `[a × b × c] → [a × c × b]`.
    pub fn transpose12(&mut self, x: Var) -> Result<Var> {
        let [a, b, c] = dims3(self.shape(x), "transpose12")?;
        let mut out = vec![S::zero(); a * b * c];
        transpose12(self.data(x), a, b, c, &mut out);
        let t = Tensor::from_vec(&[a, c, b], out)?;
        Ok(self.push(t, Op::Transpose12(x), &[x]))
    }

    pub(crate) fn transpose12_backward(&self, x: Var, g: &[S], grads: &mut GradSlots<S>) {
        let s = self.shape(x);
        let (a, b, c) = (s[0], s[1], s[2]);
        if let Some(gx) = grads.slot(x) {
            let mut tmp = vec![S::zero(); a * b * c];
            transpose12(g, a, c, b, &mut tmp);
            super::kernels::add_into(gx, &tmp);
        }
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(x), &[x]))
    }

    /// Add the first `P` rows of `pos: [P_max × D]` to every `[P × D]` slice of `x`.
    pub fn add_positional(&mut self, x: Var, pos: Var) -> Result<Var> {
        let [n, p, d] = dims3(self.shape(x), "add_positional")?;
        let ps = self.shape(pos);
        if ps.len() != 2 || ps[1] != d {
            return Err(Error::shape("positional table width"));
        }
        if p > ps[0] {
            return Err(Error::shape(alloc::format!(
                "{p} patches exceed positional table of {}",
                ps[0]
            )));
        }
        let table = &self.data(pos)[..p * d];
        let mut out = self.data(x).to_vec();
        for chunk in out.chunks_exact_mut(p * d) {
            super::kernels::add_into(chunk, table);
        }
        let t = Tensor::from_vec(&[n, p, d], out)?;
        Ok(self.push(t, Op::AddPositional { x, pos }, &[x, pos]))
    }

    pub(crate) fn add_positional_backward(
        &self,
        x: Var,
        pos: Var,
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let s = self.shape(x);
        let (p, d) = (s[1], s[2]);
        grads.accumulate(x, g);
        if let Some(gp) = grads.slot(pos) {
            for chunk in g.chunks_exact(p * d) {
                super::kernels::add_into(&mut gp[..p * d], chunk);
            }
        }
    }

    /// Replace rows of `x: [N × P × D]` flagged in `mask` (length `N·P`) by `token: [D]`.
    pub fn mask_replace(&mut self, x: Var, token: Var, mask: Vec<bool>) -> Result<Var> {
        let [n, p, d] = dims3(self.shape(x), "mask_replace")?;
        if mask.len() != n * p {
            return Err(Error::shape(alloc::format!(
                "mask has {} entries, need {}",
                mask.len(),
                n * p
            )));
        }
        if self.shape(token) != [d] {
            return Err(Error::shape("mask token width"));
        }
        let tok = self.data(token);
        let mut out = self.data(x).to_vec();
        for (row, &m) in out.chunks_exact_mut(d).zip(&mask) {
            if m {
                row.copy_from_slice(tok);
            }
        }
        let t = Tensor::from_vec(&[n, p, d], out)?;
        Ok(self.push(t, Op::MaskReplace { x, token, mask }, &[x, token]))
    }

    pub(crate) fn mask_replace_backward(
        &self,
        x: Var,
        token: Var,
        mask: &[bool],
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let d = self.shape(token)[0];
        if let Some(gx) = grads.slot(x) {
            for ((dst, src), &m) in gx.chunks_exact_mut(d).zip(g.chunks_exact(d)).zip(mask) {
                if !m {
                    super::kernels::add_into(dst, src);
                }
            }
        }
        if let Some(gt) = grads.slot(token) {
            for (src, &m) in g.chunks_exact(d).zip(mask) {
                if m {
                    super::kernels::add_into(gt, src);
                }
            }
        }
    }

    /// Mean over consecutive row groups of `x: [R × F]`; `groups` holds the
    /// group sizes and must sum to `R`. Output `[G × F]`.
    pub fn group_mean(&mut self, x: Var, groups: &[usize]) -> Result<Var> {
        let s = self.shape(x);
        if s.len() != 2 {
            return Err(Error::shape("group_mean expects [R × F]"));
        }
        let (r, f) = (s[0], s[1]);
        if groups.iter().sum::<usize>() != r || groups.contains(&0) {
            return Err(Error::shape(alloc::format!(
                "groups {groups:?} do not partition {r} rows"
            )));
        }
        let xs = self.data(x);
        let mut out = vec![S::zero(); groups.len() * f];
        let mut row = 0;
        for (gi, &size) in groups.iter().enumerate() {
            let dst = &mut out[gi * f..(gi + 1) * f];
            for k in 0..size {
                super::kernels::add_into(dst, &xs[(row + k) * f..(row + k + 1) * f]);
            }
            let inv = S::one() / S::from_f64(size as f64);
            dst.iter_mut().for_each(|v| *v *= inv);
            row += size;
        }
        let t = Tensor::from_vec(&[groups.len(), f], out)?;
        Ok(self.push(
            t,
            Op::GroupMean {
                x,
                groups: groups.to_vec(),
            },
            &[x],
        ))
    }

    pub(crate) fn group_mean_backward(
        &self,
        x: Var,
        groups: &[usize],
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let f = self.shape(x)[1];
        if let Some(gx) = grads.slot(x) {
            let mut row = 0;
            for (gi, &size) in groups.iter().enumerate() {
                let inv = S::one() / S::from_f64(size as f64);
                let src = &g[gi * f..(gi + 1) * f];
                for k in 0..size {
                    for (d, s) in gx[(row + k) * f..(row + k + 1) * f].iter_mut().zip(src) {
                        *d += *s * inv;
                    }
                }
                row += size;
            }
        }
    }

    /// Concatenate along the last axis; leading axes must agree.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::shape(alloc::format!(
                "concat_last: {sa:?} vs {sb:?}"
            )));
        }
        let (da, db) = (*sa.last().unwrap(), *sb.last().unwrap());
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = da + db;
        let rows = self.value(a).len() / da;
        let mut out = Vec::with_capacity(rows * (da + db));
        for r in 0..rows {
            out.extend_from_slice(&self.data(a)[r * da..(r + 1) * da]);
            out.extend_from_slice(&self.data(b)[r * db..(r + 1) * db]);
        }
        let t = Tensor::from_vec(&shape, out)?;
        Ok(self.push(t, Op::ConcatLast { a, b }, &[a, b]))
    }

    pub(crate) fn concat_last_backward(&self, a: Var, b: Var, g: &[S], grads: &mut GradSlots<S>) {
        let da = *self.shape(a).last().unwrap();
        let db = *self.shape(b).last().unwrap();
        if let Some(ga) = grads.slot(a) {
            for (dst, src) in ga.chunks_exact_mut(da).zip(g.chunks_exact(da + db)) {
                super::kernels::add_into(dst, &src[..da]);
            }
        }
        if let Some(gb) = grads.slot(b) {
            for (dst, src) in gb.chunks_exact_mut(db).zip(g.chunks_exact(da + db)) {
                super::kernels::add_into(dst, &src[da..]);
            }
        }
    }

    /// Rows `[start, start + len)` along the first axis.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if start + len > s[0] {
            return Err(Error::shape(alloc::format!(
                "slice {start}+{len} beyond {}",
                s[0]
            )));
        }
        let w = self.value(x).len() / s[0];
        let data = self.data(x)[start * w..(start + len) * w].to_vec();
        let mut shape = s;
        shape[0] = len;
        let t = Tensor::from_vec(&shape, data)?;
        Ok(self.push(t, Op::SliceRows { x, start }, &[x]))
    }

    pub(crate) fn slice_rows_backward(
        &self,
        x: Var,
        start: usize,
        g: &[S],
        grads: &mut GradSlots<S>,
    ) {
        let w = self.value(x).len() / self.shape(x)[0];
        if let Some(gx) = grads.slot(x) {
            super::kernels::add_into(&mut gx[start * w..start * w + g.len()], g);
        }
    }

    /// Stack along the first axis; trailing axes must agree.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Empty("concat_rows".into()))?;
        let tail = self.shape(*first)[1..].to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            if self.shape(p)[1..] != tail[..] {
                return Err(Error::shape("concat_rows: trailing shapes differ"));
            }
            rows += self.shape(p)[0];
            data.extend_from_slice(self.data(p));
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(&tail);
        let t = Tensor::from_vec(&shape, data)?;
        Ok(self.push(t, Op::ConcatRows(parts.to_vec()), parts))
    }

    pub(crate) fn concat_rows_backward(&self, parts: &[Var], g: &[S], grads: &mut GradSlots<S>) {
        let mut off = 0;
        for &p in parts {
            let n = self.value(p).len();
            grads.accumulate(p, &g[off..off + n]);
            off += n;
        }
    }
}

pub(crate) fn dims3(s: &[usize], what: &str) -> Result<[usize; 3]> {
    match s {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::shape(alloc::format!(
            "{what} expects a 3-D tensor, got {s:?}"
        ))),
    }
}
