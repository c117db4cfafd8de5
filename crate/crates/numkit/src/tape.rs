use crate::{NumError, Result, Tensor};

/// Handle to a node on a [`Tape`]. Plain index, cheap to copy; only valid for
/// the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    /// y = ca*a + cb*b, elementwise over identical shapes.
    Lincomb { a: usize, b: usize, ca: f64, cb: f64 },
    Mul { a: usize, b: usize },
    /// y = mul*x + add
    Affine { a: usize, mul: f64 },
    AddBias { a: usize, bias: usize },
    AddChannelBias { a: usize, bias: usize },
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    Conv1d { x: usize, w: usize, pad: usize },
    GroupNorm { x: usize, gamma: usize, beta: usize, groups: usize, eps: f64 },
    Relu { x: usize },
    Mish { x: usize },
    Gelu { x: usize },
    Concat { parts: Vec<usize>, axis: usize },
    Slice { x: usize, axis: usize, start: usize, len: usize },
    ReduceSum { x: usize },
    ReduceMean { x: usize },
    GatherRows { x: usize, idx: Vec<usize> },
}

pub(crate) struct Node {
    pub tensor: Tensor,
    pub op: Op,
}

/// Reverse-mode gradient tape.
///
/// Operations append nodes; [`Tape::backward`] walks them in reverse. The tape
/// is single-threaded by design — parallel evaluation builds one tape per
/// worker. Long-lived loops keep memory bounded with [`Tape::mark`] /
/// [`Tape::truncate`], or by setting a retain point so `backward` clears the
/// recorded graph itself.
#[derive(Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    retain_len: Option<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Registers an input tensor, keeping its `requires_grad` flag.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.push(tensor, Op::Leaf)
    }

    /// Registers a non-differentiable input.
    pub fn constant(&mut self, mut tensor: Tensor) -> Var {
        tensor.requires_grad = false;
        tensor.grad = None;
        self.push(tensor, Op::Leaf)
    }

    /// Registers a trainable parameter.
    pub fn param(&mut self, mut tensor: Tensor) -> Var {
        tensor.requires_grad = true;
        self.push(tensor, Op::Leaf)
    }

    pub(crate) fn push(&mut self, tensor: Tensor, op: Op) -> Var {
        self.nodes.push(Node { tensor, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].tensor
    }

    pub fn value_mut(&mut self, v: Var) -> &mut Tensor {
        &mut self.nodes[v.0].tensor
    }

    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.nodes[v.0].tensor.grad_tensor()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Current node count, for later [`Tape::truncate`].
    pub fn mark(&self) -> usize {
        self.nodes.len()
    }

    /// Drops all nodes recorded after `mark`. Vars handed out since then are
    /// invalidated.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    /// After every `backward`, truncate the tape back to its current length.
    /// Call once after registering parameters so training loops do not grow.
    pub fn retain_from_here(&mut self) {
        self.retain_len = Some(self.nodes.len());
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            if node.tensor.requires_grad {
                node.tensor.zero_grad();
            } else {
                node.tensor.grad = None;
            }
        }
    }

    /// Backpropagates from a scalar loss, accumulating gradients into every
    /// reachable node with `requires_grad`. Clears the recorded graph back to
    /// the retain point, when one was set.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(NumError::invalid("backward", "tape is empty"));
        }
        let loss_node = &self.nodes[loss.0];
        if loss_node.tensor.numel() != 1 {
            return Err(NumError::NonScalarLoss {
                shape: loss_node.tensor.shape().to_vec(),
            });
        }
        if loss_node.tensor.requires_grad {
            let seed = self.nodes[loss.0].tensor.grad.get_or_insert_with(|| vec![0.0; 1]);
            seed[0] += 1.0;
            for idx in (0..=loss.0).rev() {
                self.backprop_node(idx);
            }
        }
        if let Some(keep) = self.retain_len {
            self.nodes.truncate(keep);
        }
        Ok(())
    }

    /// Adds `contrib` into the gradient buffer of node `idx` if that node
    /// participates in differentiation.
    pub(crate) fn accumulate(&mut self, idx: usize, contrib: &[f64]) {
        let node = &mut self.nodes[idx];
        if !node.tensor.requires_grad {
            return;
        }
        let len = node.tensor.numel();
        debug_assert_eq!(len, contrib.len());
        let grad = node.tensor.grad.get_or_insert_with(|| vec![0.0; len]);
        for (g, c) in grad.iter_mut().zip(contrib) {
            *g += c;
        }
    }

    pub(crate) fn wants_grad(&self, idx: usize) -> bool {
        self.nodes[idx].tensor.requires_grad
    }
}
