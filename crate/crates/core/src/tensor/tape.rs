use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule of a recorded operation.
///
/// Given the operation's inputs, its output and the gradient of the loss with
/// respect to that output, return one gradient per input (`None` for inputs
/// that need none).
pub trait Backward: Send {
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad_out: &[f64],
    ) -> Vec<Option<Vec<f64>>>;
}

struct Node {
    value: Tensor,
    inputs: Vec<Var>,
    rule: Option<Box<dyn Backward>>,
    param: Option<ParamId>,
    requires_grad: bool,
}

/// Ordered record of the operations of one forward pass.
///
/// Nodes are appended as operations execute, so every node's inputs precede
/// it and a reverse sweep is a valid topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Vec::new(), None, None, false)
    }

    /// Records a free variable that receives a gradient.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Vec::new(), None, None, true)
    }

    /// Records a copy of a stored parameter; its gradient can later be
    /// accumulated back with [`Gradients::accumulate_into`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let t = store.get(id);
        let value = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("param shape");
        self.push(value, Vec::new(), None, Some(id), true)
    }

    /// Records the result of an operation together with its backward rule.
    pub fn record(&mut self, value: Tensor, inputs: &[Var], rule: Box<dyn Backward>) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let rule = requires_grad.then_some(rule);
        self.push(value, inputs.to_vec(), rule, None, requires_grad)
    }

    fn push(
        &mut self,
        value: Tensor,
        inputs: Vec<Var>,
        rule: Option<Box<dyn Backward>>,
        param: Option<ParamId>,
        requires_grad: bool,
    ) -> Var {
        self.nodes.push(Node {
            value,
            inputs,
            rule,
            param,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Propagates d`loss`/d(node) back through the tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let out = &self.nodes[loss.0].value;
        if out.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                out.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            let (Some(rule), Some(g)) = (&node.rule, grads[idx].as_ref()) else {
                continue;
            };
            let inputs: Vec<&Tensor> = node.inputs.iter().map(|v| &self.nodes[v.0].value).collect();
            let input_grads = rule.backward(&inputs, &node.value, g);
            debug_assert_eq!(input_grads.len(), node.inputs.len());
            for (v, ig) in node.inputs.iter().zip(input_grads) {
                let Some(ig) = ig else { continue };
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(ig),
                }
            }
        }
        Ok(Gradients {
            grads,
            params: self.nodes.iter().map(|n| n.param).collect(),
        })
    }
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<Option<ParamId>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` is not on a
    /// path to the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Adds every parameter gradient into the store's gradient buffers.
    /// Parameters unreachable from the loss are left untouched.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (g, p) in self.grads.iter().zip(&self.params) {
            if let (Some(g), Some(id)) = (g, p) {
                let t = store.get_mut(*id);
                t.zero_grad_if_missing();
                if let Some(buf) = t.grad_mut() {
                    buf.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
        }
    }
}

impl Tensor {
    fn zero_grad_if_missing(&mut self) {
        if self.grad().is_none() {
            self.zero_grad();
        }
    }
}
