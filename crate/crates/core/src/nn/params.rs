use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::autograd::ParamRef;
use crate::error::{Error, Result};
use crate::rng::{normal, Rng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use rand::RngExt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Learned by gradient descent.
    Weight,
    /// Running statistic, updated outside the gradient path.
    Buffer,
}

#[derive(Debug, Clone)]
pub struct ParamEntry<S> {
    pub name: String,
    pub value: Tensor<S>,
    pub kind: ParamKind,
    pub frozen: bool,
}

/// Named tensors of a model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S> {
    entries: Vec<ParamEntry<S>>,
    index: BTreeMap<String, ParamRef>,
}

/// Outcome of restoring a store from named tensors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub restored: Vec<String>,
    /// Present in the source, absent from the model (e.g. a pre-training head).
    pub dropped: Vec<String>,
    /// Present in the model, absent from the source (e.g. a fresh classifier).
    pub fresh: Vec<String>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub(crate) fn add(&mut self, name: String, value: Tensor<S>, kind: ParamKind) -> ParamRef {
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter {name}"
        );
        let id = self.entries.len();
        self.index.insert(name.clone(), id);
        self.entries.push(ParamEntry {
            name,
            value,
            kind,
            frozen: false,
        });
        id
    }

    /// Insert or overwrite a named weight.
    pub fn insert(&mut self, name: String, value: Tensor<S>) -> ParamRef {
        match self.id(&name) {
            Some(id) => {
                self.entries[id].value = value;
                id
            }
            None => self.add(name, value, ParamKind::Weight),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamRef> {
        self.index.get(name).copied()
    }

    pub fn value(&self, id: ParamRef) -> &Tensor<S> {
        &self.entries[id].value
    }

    pub fn value_mut(&mut self, id: ParamRef) -> &mut Tensor<S> {
        &mut self.entries[id].value
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.id(name).map(|id| self.value(id))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.id(name).map(|id| &mut self.entries[id].value)
    }

    pub fn name(&self, id: ParamRef) -> &str {
        &self.entries[id].name
    }

    pub fn kind(&self, id: ParamRef) -> ParamKind {
        self.entries[id].kind
    }

    pub fn trainable(&self, id: ParamRef) -> bool {
        let e = &self.entries[id];
        e.kind == ParamKind::Weight && !e.frozen
    }

    pub fn frozen(&self, id: ParamRef) -> bool {
        self.entries[id].frozen
    }

    pub fn entries(&self) -> &[ParamEntry<S>] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// Freeze every entry whose name does not start with one of `keep`.
    /// Frozen buffers also stop tracking running statistics.
    pub fn freeze_except(&mut self, keep: &[&str]) {
        for e in &mut self.entries {
            e.frozen = !keep.iter().any(|p| e.name.starts_with(p));
        }
    }

    pub fn unfreeze_all(&mut self) {
        self.entries.iter_mut().for_each(|e| e.frozen = false);
    }

    /// Number of learned scalars (buffers excluded).
    pub fn weight_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.kind == ParamKind::Weight)
            .map(|e| e.value.len())
            .sum()
    }

    /// Overwrite matching names from `source`; shapes must agree.
    pub fn load_named<'a, I>(&mut self, source: I) -> Result<LoadReport>
    where
        I: IntoIterator<Item = (&'a str, &'a Tensor<S>)>,
    {
        let mut report = LoadReport::default();
        let mut seen = alloc::collections::BTreeSet::new();
        for (name, tensor) in source {
            match self.id(name) {
                Some(id) => {
                    let dst = &mut self.entries[id].value;
                    if dst.shape() != tensor.shape() {
                        return Err(Error::Checkpoint(alloc::format!(
                            "shape mismatch for {name}: model {:?}, checkpoint {:?}",
                            dst.shape(),
                            tensor.shape()
                        )));
                    }
                    dst.data_mut().copy_from_slice(tensor.data());
                    report.restored.push(name.to_string());
                    seen.insert(id);
                }
                None => report.dropped.push(name.to_string()),
            }
        }
        report.fresh = (0..self.entries.len())
            .filter(|id| !seen.contains(id))
            .map(|id| self.entries[id].name.clone())
            .collect();
        Ok(report)
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    value: e.value.cast(),
                    kind: e.kind,
                    frozen: e.frozen,
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Copy every value from a store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore<S>) {
        assert_eq!(self.entries.len(), other.entries.len());
        for (d, s) in self.entries.iter_mut().zip(&other.entries) {
            d.value.data_mut().copy_from_slice(s.value.data());
        }
    }
}

/// Scoped parameter registration with seeded initialization.
pub(crate) struct Builder<'a, S> {
    pub(crate) store: &'a mut ParamStore<S>,
    pub(crate) rng: &'a mut Rng,
    prefix: String,
}

impl<'a, S: Scalar> Builder<'a, S> {
    pub(crate) fn new(store: &'a mut ParamStore<S>, rng: &'a mut Rng) -> Self {
        Builder {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub(crate) fn scope<'b>(&'b mut self, name: &str) -> Builder<'b, S> {
        let prefix = self.full(name);
        Builder {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn full(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            alloc::format!("{}.{}", self.prefix, name)
        }
    }

    /// `U(−bound, bound)` weights.
    pub(crate) fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> ParamRef {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| S::from_f64(self.rng.random_range(-bound..bound)))
            .collect();
        let t = Tensor::from_vec(shape, data).expect("shape");
        self.store.add(self.full(name), t, ParamKind::Weight)
    }

    /// `N(0, std²)` weights.
    pub(crate) fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> ParamRef {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| S::from_f64(normal(self.rng) * std))
            .collect();
        let t = Tensor::from_vec(shape, data).expect("shape");
        self.store.add(self.full(name), t, ParamKind::Weight)
    }

    pub(crate) fn constant(
        &mut self,
        name: &str,
        shape: &[usize],
        value: f64,
        kind: ParamKind,
    ) -> ParamRef {
        let t = Tensor::filled(shape, S::from_f64(value));
        self.store.add(self.full(name), t, kind)
    }
}
