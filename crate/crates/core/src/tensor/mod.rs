//! Dense real tensors with a recording tape for reverse-mode gradients.
//!
//! Values live in [`Tensor`]s (row-major `f64`). Trainable parameters sit in
//! a [`ParamStore`]; each forward pass records onto a fresh [`Tape`], and
//! [`Tape::backward`] returns [`Gradients`] that can be accumulated back into
//! the store before an optimizer step.

mod init;
pub mod ops;
pub mod optim;
pub mod schedule;
mod tape;

pub use init::{kaiming_uniform, uniform};
pub use ops::{Activation, BatchNormState, Mode};
pub use optim::{clip_gradients, Adam, AdamConfig};
pub use schedule::{schedules, LrPolicy, ScheduleConfig, ScheduleKind};
pub use tape::{Backward, Gradients, Tape, Var};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    #[serde(default)]
    requires_grad: bool,
    #[serde(skip)]
    grad: Option<Vec<f64>>,
}

/// Equality of shape and values; gradient buffers are scratch space.
impl PartialEq for Tensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.data == other.data
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} holds {n} values but {} were given",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
            requires_grad: false,
            grad: None,
        }
    }

    /// Builds a 2-D tensor from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut Vec<f64>> {
        self.grad.as_mut()
    }

    pub fn zero_grad(&mut self) {
        if self.requires_grad {
            match &mut self.grad {
                Some(g) => g.iter_mut().for_each(|v| *v = 0.0),
                None => self.grad = Some(vec![0.0; self.data.len()]),
            }
        }
    }

    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data.clone())
    }

    /// Size of dimension `i`, or 1 when the tensor has fewer dimensions.
    pub fn dim(&self, i: usize) -> usize {
        self.shape.get(i).copied().unwrap_or(1)
    }

    /// Row `r` of a 2-D tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.shape[1];
        &self.data[r * cols..(r + 1) * cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named trainable parameters of one model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.tensors.iter())
    }

    /// Gradient buffers of all parameters, in id order.
    pub fn grads_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.tensors
            .iter_mut()
            .map(|t| {
                if t.grad.is_none() {
                    t.grad = Some(vec![0.0; t.data.len()]);
                }
                t.grad.as_mut().unwrap()
            })
            .collect()
    }

    /// Restores gradient buffers after deserialization.
    pub fn ensure_grad_buffers(&mut self) {
        for t in &mut self.tensors {
            t.requires_grad = true;
            if t.grad.is_none() {
                t.grad = Some(vec![0.0; t.data.len()]);
            }
        }
    }
}
