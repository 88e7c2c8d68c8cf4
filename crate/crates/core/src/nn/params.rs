use std::collections::HashMap;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors with their gradients and Adam moments.
///
/// Entries keep insertion order, which is also the serialization order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T = f32> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
    grads: Vec<Tensor<T>>,
    adam_m: Vec<Tensor<T>>,
    adam_v: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
    pub(crate) step: u64,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
            grads: Vec::new(),
            adam_m: Vec::new(),
            adam_v: Vec::new(),
            index: HashMap::new(),
            step: 0,
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter {name:?}")));
        }
        let id = self.values.len();
        let zeros = Tensor::zeros(value.shape());
        self.names.push(name.to_string());
        self.grads.push(zeros.clone());
        self.adam_m.push(zeros.clone());
        self.adam_v.push(zeros);
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<T> {
        &self.grads[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// `(name, value)` pairs in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of trainable scalars.
    pub fn num_elements(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(T::zero());
        }
    }

    /// Adds externally accumulated gradients into the stored ones.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (g, d) in self.grads.iter_mut().zip(&grads.0) {
            g.add_assign(d);
        }
    }

    pub(crate) fn adam_parts(
        &mut self,
    ) -> impl Iterator<Item = (&mut Tensor<T>, &mut Tensor<T>, &mut Tensor<T>, &mut Tensor<T>)> {
        self.values
            .iter_mut()
            .zip(self.grads.iter_mut())
            .zip(self.adam_m.iter_mut().zip(self.adam_v.iter_mut()))
            .map(|((w, g), (m, v))| (w, g, m, v))
    }

    pub fn adam_moments(&self, id: ParamId) -> (&Tensor<T>, &Tensor<T>) {
        (&self.adam_m[id.0], &self.adam_v[id.0])
    }

    /// Same parameters in another precision. Optimizer state is reset.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for (name, v) in self.iter() {
            out.insert(name, v.cast()).expect("names are unique");
        }
        out
    }
}

/// Gradient buffers aligned with a [`ParamStore`]'s entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32>(Vec<Tensor<T>>);

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(store: &ParamStore<T>) -> Self {
        Gradients(store.values.iter().map(|v| Tensor::zeros(v.shape())).collect())
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.0[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.0[id.0]
    }

    pub fn add(&mut self, id: ParamId, delta: &Tensor<T>) {
        self.0[id.0].add_assign(delta);
    }

    pub fn zero(&mut self) {
        for g in &mut self.0 {
            g.fill(T::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_and_count() {
        let mut s = ParamStore::<f32>::new();
        let a = s.insert("dense/kernel", Tensor::zeros(&[4, 3])).unwrap();
        s.insert("dense/bias", Tensor::zeros(&[3])).unwrap();
        assert_eq!(s.num_elements(), 15);
        assert_eq!(s.id("dense/kernel"), Some(a));
        assert!(s.insert("dense/bias", Tensor::zeros(&[3])).is_err());
        let names: Vec<&str> = s.iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["dense/kernel", "dense/bias"]);
    }

    #[test]
    fn accumulate_adds() {
        let mut s = ParamStore::<f64>::new();
        let a = s.insert("w", Tensor::zeros(&[2])).unwrap();
        let mut g = Gradients::zeros_like(&s);
        g.get_mut(a).data_mut()[1] = 2.0;
        s.accumulate(&g);
        s.accumulate(&g);
        assert_eq!(s.grad(a).data(), &[0.0, 4.0]);
    }
}
