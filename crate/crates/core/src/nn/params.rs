use std::collections::HashMap;

use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Convolution or transposed-convolution kernel (rank 4).
    Kernel,
    /// Bias vector (rank 1, stored as `(len, 1, 1, 1)`).
    Bias,
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Named parameters with matching gradient buffers, kept in insertion order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T = f32> {
    params: Vec<Param<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        self.index.insert(name.clone(), self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.params.push(Param {
            name,
            kind,
            value,
            grad,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.index.get(name).map(|&i| &mut self.params[i])
    }

    pub fn value(&self, name: &str) -> Result<&Tensor<T>> {
        self.get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    /// Adds `delta` into the named gradient buffer.
    pub fn accumulate_grad(&mut self, name: &str, delta: &Tensor<T>) -> Result<()> {
        let p = self
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))?;
        if p.grad.shape() != delta.shape() {
            return Err(Error::Shape(format!(
                "gradient for `{name}` has shape {}, expected {}",
                delta.shape(),
                p.grad.shape()
            )));
        }
        for (g, &d) in p.grad.data_mut().iter_mut().zip(delta.data()) {
            *g = *g + d;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.params.iter_mut()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    kind: p.kind,
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}
