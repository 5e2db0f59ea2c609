//! Named trainable parameters and the ordered collection the optimizer and
//! gradient checker walk.

use std::collections::BTreeMap;

use super::{Real, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct Parameter<T: Real> {
    pub id: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Ordered, uniquely named parameter collection. Iteration order is the
/// insertion order, which the model constructor fixes, so optimizer state and
/// gradient reports are stable across runs.
#[derive(Clone, Debug, Default)]
pub struct ParamSet<T: Real> {
    items: Vec<Parameter<T>>,
    index: BTreeMap<String, usize>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { items: Vec::new(), index: BTreeMap::new() }
    }

    pub fn insert(&mut self, id: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let id = id.into();
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateParam(id));
        }
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.index.insert(id.clone(), self.items.len());
        self.items.push(Parameter { id, value, grad });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Parameter<T>> {
        self.index
            .get(id)
            .map(|&i| &self.items[i])
            .ok_or_else(|| Error::UnknownParam(id.to_string()))
    }

    pub fn get_mut(&mut self, id: &str) -> Result<&mut Parameter<T>> {
        match self.index.get(id) {
            Some(&i) => Ok(&mut self.items[i]),
            None => Err(Error::UnknownParam(id.to_string())),
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.items.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.items.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.items {
            p.grad.fill(T::zero());
        }
    }

    /// Inserts every parameter value as a leaf on `tape`; the returned vars
    /// align with iteration order.
    pub fn leaves(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.items.iter().map(|p| tape.leaf(p.value.clone())).collect()
    }

    /// Adds tape gradients into the stored `grad` buffers. `vars` must be the
    /// vector returned by [`ParamSet::leaves`] on the tape that produced
    /// `grads`. Parameters the loss never touched receive nothing.
    pub fn accumulate_grads(&mut self, grads: &super::tape::Grads<T>, vars: &[Var]) {
        debug_assert_eq!(vars.len(), self.items.len());
        for (p, &v) in self.items.iter_mut().zip(vars) {
            if let Some(g) = grads.get(v) {
                for (dst, &src) in p.grad.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *dst = *dst + src;
                }
            }
        }
    }

    /// Scales all gradients, e.g. by 1/batch-size after accumulation.
    pub fn scale_grads(&mut self, s: T) {
        for p in &mut self.items {
            for g in p.grad.as_mut_slice() {
                *g = *g * s;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        let mut out = ParamSet::new();
        for p in &self.items {
            out.insert(p.id.clone(), p.value.cast::<U>()).expect("ids unique by construction");
        }
        out
    }

    /// Var handles by name for one tape: resolves each id to the leaf var.
    pub fn bind<'a>(&'a self, tape: &mut Tape<T>) -> BoundParams<'a, T> {
        let vars = self.leaves(tape);
        BoundParams { set: self, vars }
    }

    /// Binds leaves created elsewhere (in set order) to parameter names;
    /// used by callers like the gradient checker that own the leaf list.
    pub fn bind_vars<'a>(&'a self, vars: &[Var]) -> BoundParams<'a, T> {
        debug_assert_eq!(vars.len(), self.items.len());
        BoundParams { set: self, vars: vars.to_vec() }
    }
}

/// A ParamSet registered on a tape: name → Var lookup for one forward pass.
pub struct BoundParams<'a, T: Real> {
    set: &'a ParamSet<T>,
    vars: Vec<Var>,
}

impl<'a, T: Real> BoundParams<'a, T> {
    pub fn var(&self, id: &str) -> Result<Var> {
        self.set
            .index
            .get(id)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::UnknownParam(id.to_string()))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_rejected() {
        let mut set = ParamSet::<f64>::new();
        set.insert("w", Tensor::zeros(2, 2)).unwrap();
        assert!(matches!(set.insert("w", Tensor::zeros(1, 1)), Err(Error::DuplicateParam(_))));
    }

    #[test]
    fn grads_accumulate_through_tape() {
        let mut set = ParamSet::<f64>::new();
        set.insert("x", Tensor::scalar(3.0)).unwrap();
        let mut tape = Tape::new();
        let bound = set.bind(&mut tape);
        let x = bound.var("x").unwrap();
        let y = tape.mul(x, x);
        let grads = tape.backward(y);
        let vars = bound.vars().to_vec();
        set.accumulate_grads(&grads, &vars);
        assert_eq!(set.get("x").unwrap().grad.item(), 6.0);
    }
}
