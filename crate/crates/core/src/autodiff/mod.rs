//! Static computation graphs over [`Tensor`]s with reverse-mode differentiation.
//!
//! A [`Graph`] is built once (shapes are checked as nodes are added) and then
//! evaluated any number of times with different input bindings. Parameters
//! live inside the graph; [`Graph::backward`] returns their gradients.

mod check;
pub mod ops;

use std::collections::HashMap;

pub use check::{compare_gradients, grad_check, GradCheckReport, ParamCheck};
pub use ops::{Binary, Broadcast, Op, Reduce, Unary};

use crate::error::{Error, Result};
use crate::tensor::{ShapeDisplay, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub enum NodeKind {
    Input(String),
    Param(usize),
    Const(Tensor),
    Op { op: Op, args: Vec<NodeId> },
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    pub shape: Vec<usize>,
    requires_grad: bool,
}

/// A named trainable tensor with its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Frozen parameters are stored and serialized but skipped by optimizers.
    pub trainable: bool,
}

impl Parameter {
    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
    }
}

pub type Bindings = HashMap<String, Tensor>;

#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<Parameter>,
    inputs: Vec<(String, NodeId)>,
}

/// Values of every node after a forward pass.
pub struct Values<'g> {
    graph: &'g Graph,
    values: Vec<Option<Tensor>>,
}

impl<'g> Values<'g> {
    pub fn get(&self, id: NodeId) -> &Tensor {
        match (&self.values[id.0], &self.graph.nodes[id.0].kind) {
            (Some(t), _) => t,
            (None, NodeKind::Param(p)) => &self.graph.params[*p].value,
            (None, NodeKind::Const(t)) => t,
            (None, _) => unreachable!("node {} has no value", id.0),
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }
}

/// Gradients of one scalar with respect to every parameter and input.
#[derive(Clone, Debug)]
pub struct Gradients {
    names: Vec<String>,
    params: Vec<Tensor>,
    inputs: Vec<(String, Tensor)>,
}

impl Gradients {
    pub fn zeros_like(graph: &Graph) -> Self {
        Gradients {
            names: graph.params.iter().map(|p| p.name.clone()).collect(),
            params: graph.params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect(),
            inputs: Vec::new(),
        }
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn input(&self, name: &str) -> Option<&Tensor> {
        self.inputs.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    /// Adds the parameter gradients of `other` (input gradients are not merged).
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.params {
            t.scale_in_place(factor);
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn inputs(&self) -> &[(String, NodeId)] {
        &self.inputs
    }

    fn push(&mut self, kind: NodeKind, shape: Vec<usize>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { kind, shape, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn input(&mut self, name: &str, shape: &[usize]) -> Result<NodeId> {
        if self.inputs.iter().any(|(n, _)| n == name) {
            return Err(Error::Config(format!("graph input `{name}` declared twice")));
        }
        if shape.contains(&0) {
            return Err(Error::shape(format!("input `{name}`"), "positive dimensions", ShapeDisplay(shape)));
        }
        let id = self.push(NodeKind::Input(name.to_string()), shape.to_vec(), true);
        self.inputs.push((name.to_string(), id));
        Ok(id)
    }

    pub fn parameter(&mut self, name: &str, value: Tensor) -> Result<NodeId> {
        self.add_parameter(name, value, true)
    }

    /// A parameter that is stored with the model but never updated.
    pub fn frozen_parameter(&mut self, name: &str, value: Tensor) -> Result<NodeId> {
        self.add_parameter(name, value, false)
    }

    fn add_parameter(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<NodeId> {
        if self.param(name).is_some() {
            return Err(Error::Config(format!("parameter `{name}` registered twice")));
        }
        let shape = value.shape().to_vec();
        self.params.push(Parameter {
            name: name.to_string(),
            grad: Tensor::zeros(shape.clone()),
            value,
            trainable,
        });
        Ok(self.push(NodeKind::Param(self.params.len() - 1), shape, true))
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(NodeKind::Const(value), shape, false)
    }

    /// Appends an op node after checking its operand shapes.
    pub fn op(&mut self, op: Op, args: &[NodeId]) -> Result<NodeId> {
        let shapes: Vec<&[usize]> = args.iter().map(|a| self.nodes[a.0].shape.as_slice()).collect();
        let shape = ops::infer_shape(&op, &shapes).map_err(|(expected, actual)| {
            Error::shape(format!("node #{} ({op:?})", self.nodes.len()), expected, actual)
        })?;
        let requires_grad = op.is_differentiable() && args.iter().any(|a| self.nodes[a.0].requires_grad);
        Ok(self.push(NodeKind::Op { op, args: args.to_vec() }, shape, requires_grad))
    }

    fn binary(&mut self, kind: Binary, a: NodeId, b: NodeId) -> Result<NodeId> {
        let bc = ops::broadcast_for(self.shape(a), self.shape(b)).ok_or_else(|| {
            Error::shape(
                format!("node #{} ({kind:?})", self.nodes.len()),
                "equal shapes, a scalar, or a row vector matching a matrix",
                format!("{:?} and {:?}", self.shape(a), self.shape(b)),
            )
        })?;
        self.op(Op::Binary(kind, bc), &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.op(Op::Scale(factor), &[x])
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op(Op::MatMul, &[a, b])
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::Transpose, &[x])
    }

    pub fn concat(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        self.op(Op::Concat { axis }, parts)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        if self.shape(x) == shape {
            return Ok(x);
        }
        self.op(Op::Reshape { shape: shape.to_vec() }, &[x])
    }

    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        self.op(Op::Slice { axis, start, len }, &[x])
    }

    /// Embedding lookup: rows of `table` selected by the ids in `ids`. The `padding` id reads as a zero row.
    pub fn gather(&mut self, table: NodeId, ids: NodeId, padding: Option<usize>) -> Result<NodeId> {
        self.op(Op::Gather { padding }, &[table, ids])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::Unary(Unary::Sigmoid), &[x])
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::Unary(Unary::Tanh), &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::Unary(Unary::Relu), &[x])
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::Unary(Unary::Exp), &[x])
    }

    /// Natural log with the argument clamped to at least `1e-12`.
    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::Unary(Unary::Log), &[x])
    }

    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.op(Op::Softmax { axis }, &[x])
    }

    pub fn masked_softmax(&mut self, x: NodeId, mask: NodeId) -> Result<NodeId> {
        self.op(Op::MaskedSoftmax, &[x, mask])
    }

    pub fn sum(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.op(Op::Reduce { kind: Reduce::Sum, axis }, &[x])
    }

    pub fn max(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.op(Op::Reduce { kind: Reduce::Max, axis }, &[x])
    }

    pub fn mean(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.op(Op::Reduce { kind: Reduce::Mean, axis }, &[x])
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        self.op(Op::SumAll, &[x])
    }

    pub fn conv2d(&mut self, x: NodeId, kernel: NodeId, bias: NodeId) -> Result<NodeId> {
        self.op(Op::Conv2d, &[x, kernel, bias])
    }

    pub fn maxpool2d(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.op(Op::MaxPool2d { rows, cols }, &[x])
    }

    pub fn grid_pool(&mut self, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        self.op(Op::GridPool { rows, cols }, &[x])
    }

    pub fn cosine_matrix(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.op(Op::CosineMatrix, &[a, b])
    }

    /// Runs every node in order and returns all values.
    pub fn forward(&self, bindings: &Bindings) -> Result<Values<'_>> {
        let mut values: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let value = match &node.kind {
                NodeKind::Input(name) => {
                    let t = bindings.get(name).ok_or_else(|| Error::MissingInput(name.clone()))?;
                    if t.shape() != node.shape.as_slice() {
                        return Err(Error::shape(
                            format!("input `{name}` (node #{i})"),
                            ShapeDisplay(&node.shape),
                            ShapeDisplay(t.shape()),
                        ));
                    }
                    Some(t.clone())
                }
                NodeKind::Param(_) | NodeKind::Const(_) => None,
                NodeKind::Op { op, args } => {
                    let view = Values { graph: self, values };
                    let xs: Vec<&Tensor> = args.iter().map(|&a| view.get(a)).collect();
                    let out = ops::forward(op, &xs, &node.shape);
                    values = view.values;
                    Some(out.map_err(|e| match e {
                        Error::IndexOutOfRange { what, index, size } => Error::IndexOutOfRange {
                            what: format!("{what} at node #{i}"),
                            index,
                            size,
                        },
                        other => other,
                    })?)
                }
            };
            values.push(value);
        }
        Ok(Values { graph: self, values })
    }

    /// Gradient of the scalar node `loss` with respect to all parameters and inputs.
    pub fn backward(&self, values: &Values<'_>, loss: NodeId) -> Result<Gradients> {
        let shape = self.shape(loss);
        if crate::tensor::numel(shape) != 1 || shape.len() > 1 {
            return Err(Error::shape(format!("loss node #{}", loss.0), "scalar [1] or []", ShapeDisplay(shape)));
        }
        self.backward_from(values, loss, &Tensor::filled(shape.to_vec(), 1.0))
    }

    /// Vector-Jacobian product seeded with `seed` at node `from`.
    pub fn backward_from(&self, values: &Values<'_>, from: NodeId, seed: &Tensor) -> Result<Gradients> {
        if seed.shape() != self.shape(from) {
            return Err(Error::shape(
                format!("backward seed for node #{}", from.0),
                ShapeDisplay(self.shape(from)),
                ShapeDisplay(seed.shape()),
            ));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut adjoint: Vec<Option<Tensor>> = vec![None; from.0 + 1];
        adjoint[from.0] = Some(seed.clone());
        for i in (0..=from.0).rev() {
            let Some(g) = adjoint[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.kind {
                NodeKind::Param(p) => grads.params[*p].add_assign(&g),
                NodeKind::Input(name) => grads.inputs.push((name.clone(), g)),
                NodeKind::Const(_) => {}
                NodeKind::Op { op, args } => {
                    if !node.requires_grad {
                        continue;
                    }
                    let xs: Vec<&Tensor> = args.iter().map(|&a| values.get(a)).collect();
                    let out = values.get(NodeId(i));
                    for (arg, ga) in args.iter().zip(ops::backward(op, &xs, out, &g)) {
                        let Some(ga) = ga else { continue };
                        if !self.nodes[arg.0].requires_grad {
                            continue;
                        }
                        match &mut adjoint[arg.0] {
                            Some(acc) => acc.add_assign(&ga),
                            slot => *slot = Some(ga),
                        }
                    }
                }
            }
        }
        grads.inputs.reverse();
        Ok(grads)
    }

    /// Convenience: forward then read one node.
    pub fn eval(&self, bindings: &Bindings, node: NodeId) -> Result<Tensor> {
        Ok(self.forward(bindings)?.get(node).clone())
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    /// Adds `grads` into each parameter's gradient buffer.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (p, g) in self.params.iter_mut().zip(grads.params()) {
            p.grad.add_assign(g);
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }
}
