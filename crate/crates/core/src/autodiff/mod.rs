//! Reverse-mode differentiation over a linear tape.
//!
//! Every op appends a node holding its forward value plus whatever the
//! backward rule needs. Nodes only reference earlier nodes, so walking the
//! tape backwards visits a valid reverse topological order.

mod normal;
mod ops;
mod param;

pub(crate) use ops::smooth_l1_elem;
pub use ops::BatchNormStats;
pub use param::{ParamId, ParamStore, Parameter};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: ops::Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub(crate) fn push(&mut self, value: Tensor, op: ops::Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; receives a gradient but is not a parameter.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, ops::Op::Leaf)
    }

    /// Brings a parameter onto the tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), ops::Op::Param(id))
    }

    /// Propagates `d loss / d node` for every node reachable from `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_shape = self.shape(loss);
        if loss_shape.iter().product::<usize>() != 1 {
            return Err(Error::contract(format!("backward needs a scalar loss, got shape {loss_shape:?}")));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(loss_shape, 1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.nodes[idx].op.backward(self, idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds every parameter-leaf gradient into the owning store.
    pub fn accumulate_into(&self, tape: &Tape, store: &mut ParamStore) {
        for (idx, g) in self.grads.iter().enumerate() {
            if let (Some(g), ops::Op::Param(id)) = (g, &tape.nodes[idx].op) {
                store.get_mut(*id).grad.add_assign(g);
            }
        }
    }
}

pub(crate) fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
