use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named tensor of learnable values with its gradient buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::Shape(format!(
                "parameter {name}: shape {shape:?} holds {n} values, got {}",
                values.len()
            )));
        }
        Ok(Parameter {
            name,
            shape,
            grad: vec![0.0; n],
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered parameter list; layers refer to entries through [`ParamId`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> ParamId {
        let p = Parameter::new(name, shape, values).expect("layer constructors pass consistent shapes");
        self.params.push(p);
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        &self.params[id.0].values
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar values.
    pub fn count(&self) -> usize {
        self.params.iter().map(Parameter::len).sum()
    }

    pub fn as_slice(&self) -> &[Parameter] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    /// Copies gradients into each parameter's `grad` buffer.
    pub fn set_grads(&mut self, grads: &Grads) {
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            p.grad.copy_from_slice(g);
        }
    }

    /// Replaces values from `other`, which must have identical names and shapes.
    pub fn load_values(&mut self, other: &[Parameter]) -> Result<()> {
        if other.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} tensors, got {}",
                self.params.len(),
                other.len()
            )));
        }
        for (p, o) in self.params.iter_mut().zip(other) {
            if p.name != o.name || p.shape != o.shape {
                return Err(Error::Shape(format!(
                    "tensor mismatch: expected {} {:?}, got {} {:?}",
                    p.name, p.shape, o.name, o.shape
                )));
            }
            p.values.copy_from_slice(&o.values);
        }
        Ok(())
    }
}

/// Gradient buffers aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads(store.params.iter().map(|p| vec![0.0; p.len()]).collect())
    }

    pub fn slot(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.0[id.0]
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.0[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().flatten().for_each(|x| *x *= k);
    }
}
