//! Reverse-mode accumulation over a tape of vector-valued nodes.
//!
//! Nodes are appended in evaluation order, so parents always precede their
//! children. [`Tape::forward`] fills in values; [`Tape::backward`] seeds the
//! last node (which must be scalar) with adjoint 1 and sweeps the tape in
//! reverse, applying each node's vector-Jacobian product. Quantum nodes wrap
//! circuit expectation values; their backward step multiplies the incoming
//! adjoint by the parameter-shift Jacobians with respect to both the circuit
//! parameters and the encoded data.

use std::collections::HashMap;
use std::sync::Arc;

use crate::circuits::Circuit;
use crate::error::{Error, Result};
use crate::gradients::{jacobians, Wanted};
use crate::simulator::{Mode, PauliString};

pub type NodeId = usize;

/// Values for the tape's input nodes.
pub type Bindings = HashMap<NodeId, Vec<f64>>;

#[derive(Debug, Clone)]
pub struct QuantumNodeSpec {
    pub circuit: Arc<Circuit>,
    pub paulis: Vec<PauliString>,
    /// Node carrying the classical data encoded by the circuit.
    pub input: NodeId,
    /// Node carrying the trainable circuit parameters.
    pub params: NodeId,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Input,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Row-major `rows × cols` matrix times vector.
    MatVec {
        w: NodeId,
        x: NodeId,
        rows: usize,
        cols: usize,
    },
    BiasAdd(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Log(NodeId),
    Negate(NodeId),
    Mean(NodeId),
    Quantum(Box<QuantumNodeSpec>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    len: usize,
    value: Vec<f64>,
    /// Whether any input node is reachable through the parents.
    requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    evaluated: bool,
}

/// Adjoints `∂root/∂node` for every node, indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    adjoints: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &[f64] {
        &self.adjoints[id]
    }

    pub fn len(&self) -> usize {
        self.adjoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise binary op with scalar broadcasting.
fn broadcast(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            f(
                a[if a.len() == 1 { 0 } else { i }],
                b[if b.len() == 1 { 0 } else { i }],
            )
        })
        .collect()
}

/// Accumulates `src` into `dst`, summing when `dst` is a broadcast scalar.
fn accumulate(dst: &mut [f64], src: &[f64]) {
    if dst.len() == src.len() {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    } else {
        dst[0] += src.iter().sum::<f64>();
    }
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

    fn push(&mut self, op: Op, len: usize, value: Vec<f64>, requires_grad: bool) -> NodeId {
        self.evaluated = false;
        self.nodes.push(Node {
            op,
            len,
            value,
            requires_grad,
        });
        self.nodes.len() - 1
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::Shape(format!("node {id} is not on this tape")))
    }

    fn grad_of(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        let len = value.len();
        self.push(Op::Constant, len, value, false)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.constant(vec![value])
    }

    /// Placeholder of length `len`, bound at [`Tape::forward`].
    pub fn input(&mut self, len: usize) -> NodeId {
        self.push(Op::Input, len, Vec::new(), true)
    }

    fn binary(&mut self, a: NodeId, b: NodeId, make: fn(NodeId, NodeId) -> Op) -> Result<NodeId> {
        let (la, lb) = (self.node(a)?.len, self.node(b)?.len);
        if la != lb && la != 1 && lb != 1 {
            return Err(Error::Shape(format!(
                "elementwise operands of length {la} and {lb}"
            )));
        }
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(make(a, b), la.max(lb), Vec::new(), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Add)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Mul)
    }

    pub fn bias_add(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (lx, lb) = (self.node(x)?.len, self.node(b)?.len);
        if lx != lb {
            return Err(Error::Shape(format!(
                "bias of length {lb} for vector of length {lx}"
            )));
        }
        let rg = self.grad_of(&[x, b]);
        Ok(self.push(Op::BiasAdd(x, b), lx, Vec::new(), rg))
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let (lw, lx) = (self.node(w)?.len, self.node(x)?.len);
        if lw != rows * cols || lx != cols {
            return Err(Error::Shape(format!(
                "{rows}×{cols} matvec with weight length {lw} and vector length {lx}"
            )));
        }
        let rg = self.grad_of(&[w, x]);
        Ok(self.push(Op::MatVec { w, x, rows, cols }, rows, Vec::new(), rg))
    }

    fn unary(&mut self, x: NodeId, make: fn(NodeId) -> Op) -> Result<NodeId> {
        let len = self.node(x)?.len;
        let rg = self.nodes[x].requires_grad;
        Ok(self.push(make(x), len, Vec::new(), rg))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Sigmoid)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Tanh)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Relu)
    }

    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Log)
    }

    pub fn negate(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, Op::Negate)
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let len = self.node(x)?.len;
        if len == 0 {
            return Err(Error::Shape("mean of an empty vector".into()));
        }
        let rg = self.nodes[x].requires_grad;
        Ok(self.push(Op::Mean(x), 1, Vec::new(), rg))
    }

    /// Node whose value is the vector of expectation values of `spec.paulis`.
    pub fn quantum(&mut self, spec: QuantumNodeSpec) -> Result<NodeId> {
        let (li, lp) = (self.node(spec.input)?.len, self.node(spec.params)?.len);
        if li != spec.circuit.input_dim() || lp != spec.circuit.n_trainable() {
            return Err(Error::Shape(format!(
                "circuit expects {} inputs and {} parameters, got nodes of length {li} and {lp}",
                spec.circuit.input_dim(),
                spec.circuit.n_trainable()
            )));
        }
        if let Some(q) = spec.paulis.iter().filter_map(|p| p.max_qubit()).max() {
            if q >= spec.circuit.n_qubits() {
                return Err(Error::Shape(format!(
                    "observable on qubit {q} for a {}-qubit circuit",
                    spec.circuit.n_qubits()
                )));
            }
        }
        let len = spec.paulis.len();
        let rg = self.grad_of(&[spec.input, spec.params]);
        Ok(self.push(Op::Quantum(Box::new(spec)), len, Vec::new(), rg))
    }

    // Composites built from the primitives above.

    /// `a − b`
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let nb = self.negate(b)?;
        self.add(a, nb)
    }

    /// `c·x` for a constant `c`.
    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let k = self.scalar(c);
        self.mul(k, x)
    }

    /// `c − x` for a constant `c`.
    pub fn rsub(&mut self, c: f64, x: NodeId) -> Result<NodeId> {
        let k = self.scalar(c);
        self.sub(k, x)
    }

    /// `lo + relu(x − lo) − relu(x − hi)`: identity on `[lo, hi]`, flat outside.
    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> Result<NodeId> {
        let lo_node = self.scalar(lo);
        let hi_node = self.scalar(hi);
        let above_lo = self.sub(x, lo_node)?;
        let above_lo = self.relu(above_lo)?;
        let above_hi = self.sub(x, hi_node)?;
        let above_hi = self.relu(above_hi)?;
        let inner = self.sub(above_lo, above_hi)?;
        self.add(lo_node, inner)
    }

    /// Sum of scalar or equal-length nodes, left to right.
    pub fn sum(&mut self, ids: &[NodeId]) -> Result<NodeId> {
        let (&first, rest) = ids
            .split_first()
            .ok_or_else(|| Error::Shape("sum of no nodes".into()))?;
        rest.iter().try_fold(first, |acc, &id| self.add(acc, id))
    }

    pub fn value(&self, id: NodeId) -> Option<&[f64]> {
        if self.evaluated {
            self.nodes.get(id).map(|n| n.value.as_slice())
        } else {
            None
        }
    }

    /// Evaluates every node in tape order and returns the last node's value.
    pub fn forward(&mut self, bindings: &Bindings) -> Result<Vec<f64>> {
        for (&id, v) in bindings {
            let node = self.node(id)?;
            if !matches!(node.op, Op::Input) {
                return Err(Error::Evaluation(format!("node {id} is not an input")));
            }
            if v.len() != node.len {
                return Err(Error::Shape(format!(
                    "input {id} expects length {}, bound to length {}",
                    node.len,
                    v.len()
                )));
            }
        }
        for id in 0..self.nodes.len() {
            let value = self.eval_node(id, bindings)?;
            self.nodes[id].value = value;
        }
        self.evaluated = true;
        self.nodes
            .last()
            .map(|n| n.value.clone())
            .ok_or_else(|| Error::Evaluation("empty tape".into()))
    }

    fn eval_node(&self, id: NodeId, bindings: &Bindings) -> Result<Vec<f64>> {
        let v = |i: NodeId| self.nodes[i].value.as_slice();
        let node = &self.nodes[id];
        Ok(match &node.op {
            Op::Constant => node.value.clone(),
            Op::Input => bindings
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::Evaluation(format!("input node {id} is unbound")))?,
            Op::Add(a, b) | Op::BiasAdd(a, b) => broadcast(v(*a), v(*b), |x, y| x + y),
            Op::Mul(a, b) => broadcast(v(*a), v(*b), |x, y| x * y),
            Op::MatVec { w, x, rows, cols } => {
                let (w, x) = (v(*w), v(*x));
                (0..*rows)
                    .map(|i| {
                        w[i * cols..(i + 1) * cols]
                            .iter()
                            .zip(x)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            }
            Op::Sigmoid(x) => v(*x).iter().map(|&a| sigmoid(a)).collect(),
            Op::Tanh(x) => v(*x).iter().map(|a| a.tanh()).collect(),
            Op::Relu(x) => v(*x).iter().map(|&a| a.max(0.0)).collect(),
            Op::Log(x) => v(*x).iter().map(|a| a.ln()).collect(),
            Op::Negate(x) => v(*x).iter().map(|a| -a).collect(),
            Op::Mean(x) => {
                let x = v(*x);
                vec![x.iter().sum::<f64>() / x.len() as f64]
            }
            Op::Quantum(spec) => {
                let state = crate::circuits::run(&spec.circuit, v(spec.input), v(spec.params))?;
                spec.paulis
                    .iter()
                    .enumerate()
                    .map(|(i, p)| spec.mode.measure(&state, p, i as u64))
                    .collect::<Result<Vec<f64>>>()?
            }
        })
    }

    /// Adjoints of the last node, which must be scalar, with respect to every node.
    pub fn backward(&self) -> Result<Gradients> {
        if !self.evaluated {
            return Err(Error::State("backward called before forward".into()));
        }
        let root = self.nodes.len() - 1;
        if self.nodes[root].len != 1 {
            return Err(Error::Shape(format!(
                "root node has length {}, expected a scalar",
                self.nodes[root].len
            )));
        }
        let mut adj: Vec<Vec<f64>> = self.nodes.iter().map(|n| vec![0.0; n.len]).collect();
        adj[root][0] = 1.0;
        for id in (0..=root).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad || adj[id].iter().all(|&a| a == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut adj[id]);
            let val = |i: NodeId| self.nodes[i].value.as_slice();
            match &node.op {
                Op::Constant | Op::Input => {}
                Op::Add(a, b) | Op::BiasAdd(a, b) => {
                    accumulate(&mut adj[*a], &g);
                    accumulate(&mut adj[*b], &g);
                }
                Op::Mul(a, b) => {
                    let ga = broadcast(&g, val(*b), |x, y| x * y);
                    let gb = broadcast(&g, val(*a), |x, y| x * y);
                    accumulate(&mut adj[*a], &ga);
                    accumulate(&mut adj[*b], &gb);
                }
                Op::MatVec { w, x, rows, cols } => {
                    let (wv, xv) = (val(*w), val(*x));
                    let mut gw = vec![0.0; rows * cols];
                    let mut gx = vec![0.0; *cols];
                    for i in 0..*rows {
                        for j in 0..*cols {
                            gw[i * cols + j] = g[i] * xv[j];
                            gx[j] += g[i] * wv[i * cols + j];
                        }
                    }
                    accumulate(&mut adj[*w], &gw);
                    accumulate(&mut adj[*x], &gx);
                }
                Op::Sigmoid(x) => {
                    let d: Vec<f64> = node
                        .value
                        .iter()
                        .zip(&g)
                        .map(|(s, gi)| gi * s * (1.0 - s))
                        .collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Tanh(x) => {
                    let d: Vec<f64> = node
                        .value
                        .iter()
                        .zip(&g)
                        .map(|(t, gi)| gi * (1.0 - t * t))
                        .collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Relu(x) => {
                    let d: Vec<f64> = val(*x)
                        .iter()
                        .zip(&g)
                        .map(|(a, gi)| if *a > 0.0 { *gi } else { 0.0 })
                        .collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Log(x) => {
                    let d: Vec<f64> = val(*x).iter().zip(&g).map(|(a, gi)| gi / a).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Negate(x) => {
                    let d: Vec<f64> = g.iter().map(|gi| -gi).collect();
                    accumulate(&mut adj[*x], &d);
                }
                Op::Mean(x) => {
                    let n = self.nodes[*x].len;
                    let d = vec![g[0] / n as f64; n];
                    accumulate(&mut adj[*x], &d);
                }
                Op::Quantum(spec) => {
                    let wanted = Wanted {
                        params: self.nodes[spec.params].requires_grad,
                        inputs: self.nodes[spec.input].requires_grad,
                    };
                    let (jp, jx) = jacobians(
                        &spec.circuit,
                        &spec.paulis,
                        val(spec.input),
                        val(spec.params),
                        spec.mode,
                        wanted,
                    )?;
                    if wanted.params {
                        accumulate(&mut adj[spec.params], &jp.vjp(&g));
                    }
                    if wanted.inputs {
                        accumulate(&mut adj[spec.input], &jx.vjp(&g));
                    }
                }
            }
            adj[id] = g;
        }
        Ok(Gradients { adjoints: adj })
    }
}
