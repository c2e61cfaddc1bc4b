//! Reverse-mode automatic differentiation on an append-only graph arena.
//!
//! The graph is define-by-run: every builder method appends one node, computes
//! its value eagerly, and returns a [`NodeId`] handle. Differentiation comes in
//! two flavors:
//!
//! * [`Graph::backward`] walks the arena in reverse and accumulates numeric
//!   adjoints — ordinary first-order gradients.
//! * [`Graph::grad_as_graph`] *emits the backward pass as new forward nodes*,
//!   so a gradient is itself a differentiable quantity. This is what lets an
//!   unrolled optimizer trajectory be differentiated end-to-end: the inner
//!   gradients become part of the graph, and a later `backward` call flows
//!   through them.
//!
//! Both differentiation paths share one formula per operation (the numeric
//! adjoint mirrors the exact arithmetic of the emitted nodes), so a gradient
//! computed either way agrees to rounding.

mod tensor;

pub use tensor::Tensor;

use std::sync::Arc;
use thiserror::Error;

/// Handle to a node inside one [`Graph`]. Ids are only meaningful for the
/// graph that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Error)]
pub enum AutogradError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("differentiation root must be scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("cannot emit a gradient graph through `{0}`")]
    UnsupportedOperation(&'static str),
}

/// Operation kinds. Each variant stores the ids of its inputs; constants other
/// than node ids (scalar factors, clamp bounds, target labels) are captured in
/// the variant itself. Some payloads exist only so `Debug` dumps show the
/// full recorded computation.
#[derive(Debug, Clone)]
#[allow(dead_code)]
enum Op {
    /// Input node: a constant or a parameter. Which of the two it is depends
    /// only on whether a differentiation call lists it as a parameter.
    Leaf,
    /// `[m,k] x [k,n] -> [m,n]`.
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    ScalarMul(NodeId, f64),
    ScalarAdd(NodeId, f64),
    ScalarDiv(NodeId, f64),
    /// Adds a length-`n` row vector to each row of an `[m,n]` matrix.
    AddRowVec(NodeId, NodeId),
    /// Column sums: `[m,n] -> [n]`.
    ColSum(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    /// Elementwise clamp into `[lo, hi]`.
    Clamp(NodeId, f64, f64),
    /// 0/1 mask marking entries strictly inside `(lo, hi)`; emitted as the
    /// clamp derivative. Carries no gradient itself.
    ClampGate(NodeId, f64, f64),
    Mean(NodeId),
    Sum(NodeId),
    /// Repeats a scalar into a fixed shape.
    Broadcast(NodeId, Vec<usize>),
    /// Dot product of two equal-length vectors.
    WeightedSum(NodeId, NodeId),
    /// Scales row `i` of a matrix by entry `i` of a vector.
    RowScale(NodeId, NodeId),
    Reshape(NodeId, Vec<usize>),
    /// Fused softmax + cross-entropy per example: `[b,c] -> [b]` losses
    /// against the stored integer targets.
    SoftmaxCrossEntropy(NodeId, Arc<Vec<usize>>),
    /// `softmax(logits) - onehot(targets)`: the cross-entropy derivative,
    /// emitted as a forward node so it stays differentiable.
    SceBackward(NodeId, Arc<Vec<usize>>),
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::Transpose(..) => "transpose",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Div(..) => "div",
        Op::ScalarMul(..) => "scalar_mul",
        Op::ScalarAdd(..) => "scalar_add",
        Op::ScalarDiv(..) => "scalar_div",
        Op::AddRowVec(..) => "add_row_vec",
        Op::ColSum(..) => "col_sum",
        Op::Tanh(..) => "tanh",
        Op::Sigmoid(..) => "sigmoid",
        Op::Square(..) => "square",
        Op::Sqrt(..) => "sqrt",
        Op::Clamp(..) => "clamp",
        Op::ClampGate(..) => "clamp_gate",
        Op::Mean(..) => "mean",
        Op::Sum(..) => "sum",
        Op::Broadcast(..) => "broadcast",
        Op::WeightedSum(..) => "weighted_sum",
        Op::RowScale(..) => "row_scale",
        Op::Reshape(..) => "reshape",
        Op::SoftmaxCrossEntropy(..) => "softmax_cross_entropy",
        Op::SceBackward(..) => "sce_backward",
    }
}

/// Input ids of an op, at most two.
fn op_inputs(op: &Op) -> (Option<NodeId>, Option<NodeId>) {
    match *op {
        Op::Leaf => (None, None),
        Op::MatMul(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::Div(a, b)
        | Op::AddRowVec(a, b)
        | Op::WeightedSum(a, b)
        | Op::RowScale(a, b) => (Some(a), Some(b)),
        Op::Transpose(a)
        | Op::ScalarMul(a, _)
        | Op::ScalarAdd(a, _)
        | Op::ScalarDiv(a, _)
        | Op::ColSum(a)
        | Op::Tanh(a)
        | Op::Sigmoid(a)
        | Op::Square(a)
        | Op::Sqrt(a)
        | Op::Clamp(a, _, _)
        | Op::ClampGate(a, _, _)
        | Op::Mean(a)
        | Op::Sum(a)
        | Op::Broadcast(a, _)
        | Op::Reshape(a, _)
        | Op::SoftmaxCrossEntropy(a, _)
        | Op::SceBackward(a, _) => (Some(a), None),
    }
}

/// One graph node: its operation and the eagerly computed value. The value's
/// shape doubles as the node's shape.
#[derive(Debug, Clone)]
pub struct ComputationNode {
    op: Op,
    value: Tensor,
}

impl ComputationNode {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn op_name(&self) -> &'static str {
        op_name(&self.op)
    }
}

/// Numeric adjoints produced by [`Graph::backward`], keyed by node id.
/// A node with no entry received no gradient (structurally zero).
#[derive(Debug)]
pub struct GradientMap {
    grads: Vec<Option<Tensor>>,
}

impl GradientMap {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// The gradient for `id`, or zeros of the node's shape when the loss does
    /// not depend on it.
    pub fn get_or_zeros(&self, graph: &Graph, id: NodeId) -> Tensor {
        match self.get(id) {
            Some(t) => t.clone(),
            None => Tensor::zeros(graph.value(id).shape().to_vec()),
        }
    }
}

/// Append-only computation graph. One graph belongs to one thread at a time;
/// distinct graphs are independent and may be used concurrently.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<ComputationNode>,
}

type Result<T> = std::result::Result<T, AutogradError>;

fn shape_err(op: &'static str, detail: String) -> AutogradError {
    AutogradError::ShapeMismatch { op, detail }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total number of stored scalars across all node values. Graph memory is
    /// roughly this many `f64`s (plus per-node bookkeeping), which makes it
    /// the honest unit for unroll budgets.
    pub fn scalar_count(&self) -> usize {
        self.nodes.iter().map(|n| n.value.numel()).sum()
    }

    pub fn node(&self, id: NodeId) -> &ComputationNode {
        &self.nodes[id.0]
    }

    /// Cached value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(ComputationNode { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Appends an input node holding `value`. Whether it acts as a parameter
    /// or a constant is decided by the differentiation call.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Scalar input node.
    pub fn scalar_leaf(&mut self, value: f64) -> NodeId {
        self.leaf(Tensor::scalar(value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", format!("{:?} x {:?}", sa, sb)));
        }
        let v = self.value(a).matmul(self.value(b));
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).shape().len() != 2 {
            return Err(shape_err(
                "transpose",
                format!("{:?} is not 2-D", self.value(a).shape()),
            ));
        }
        let v = self.value(a).transpose2();
        Ok(self.push(Op::Transpose(a), v))
    }

    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        make: impl Fn(NodeId, NodeId) -> Op,
        eval: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(
                name,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        let v = self.value(a).zip_map(self.value(b), eval);
        Ok(self.push(make(a, b), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("add", a, b, Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("sub", a, b, Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("mul", a, b, Op::Mul, |x, y| x * y)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("div", a, b, Op::Div, |x, y| x / y)
    }

    pub fn scalar_mul(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x * c);
        self.push(Op::ScalarMul(a, c), v)
    }

    pub fn scalar_add(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(Op::ScalarAdd(a, c), v)
    }

    /// Divides every entry by a nonzero constant.
    pub fn scalar_div(&mut self, a: NodeId, c: f64) -> NodeId {
        assert!(c != 0.0, "scalar_div by zero");
        let v = self.value(a).map(|x| x / c);
        self.push(Op::ScalarDiv(a, c), v)
    }

    pub fn add_row_vec(&mut self, m: NodeId, row: NodeId) -> Result<NodeId> {
        let (sm, sr) = (self.value(m).shape(), self.value(row).shape());
        if sm.len() != 2 || sr.len() != 1 || sm[1] != sr[0] {
            return Err(shape_err("add_row_vec", format!("{:?} + {:?}", sm, sr)));
        }
        let v = self.value(m).add_row_vec(self.value(row));
        Ok(self.push(Op::AddRowVec(m, row), v))
    }

    pub fn col_sum(&mut self, m: NodeId) -> Result<NodeId> {
        if self.value(m).shape().len() != 2 {
            return Err(shape_err(
                "col_sum",
                format!("{:?} is not 2-D", self.value(m).shape()),
            ));
        }
        let v = self.value(m).col_sum();
        Ok(self.push(Op::ColSum(m), v))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::sqrt);
        self.push(Op::Sqrt(a), v)
    }

    /// Elementwise clamp. The gradient passes only strictly inside `(lo, hi)`;
    /// at and beyond the bounds it is zero.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        assert!(lo <= hi, "clamp bounds inverted: [{}, {}]", lo, hi);
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), v)
    }

    fn clamp_gate(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self
            .value(a)
            .map(|x| if x > lo && x < hi { 1.0 } else { 0.0 });
        self.push(Op::ClampGate(a, lo, hi), v)
    }

    /// Mean over all entries, producing a scalar node.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        assert!(self.value(a).numel() > 0, "mean of empty tensor");
        let v = self.value(a).mean();
        self.push(Op::Mean(a), v)
    }

    /// Sum over all entries, producing a scalar node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).sum();
        self.push(Op::Sum(a), v)
    }

    /// Repeats a scalar node into `shape`.
    pub fn broadcast(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        if !self.value(a).is_scalar() {
            return Err(shape_err(
                "broadcast",
                format!("input shape {:?} is not scalar", self.value(a).shape()),
            ));
        }
        let v = self.value(a).broadcast_scalar(shape.clone());
        Ok(self.push(Op::Broadcast(a, shape), v))
    }

    /// Dot product of two equal-length 1-D nodes, producing a scalar node.
    pub fn weighted_sum(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 1 || sa != sb {
            return Err(shape_err("weighted_sum", format!("{:?} . {:?}", sa, sb)));
        }
        let v = self.value(a).dot(self.value(b));
        Ok(self.push(Op::WeightedSum(a, b), v))
    }

    /// Scales row `i` of `[m,n]` matrix `m` by entry `i` of vector `scale`.
    pub fn row_scale(&mut self, m: NodeId, scale: NodeId) -> Result<NodeId> {
        let (sm, ss) = (self.value(m).shape(), self.value(scale).shape());
        if sm.len() != 2 || ss.len() != 1 || sm[0] != ss[0] {
            return Err(shape_err("row_scale", format!("{:?} by {:?}", sm, ss)));
        }
        let v = self.value(m).row_scale(self.value(scale));
        Ok(self.push(Op::RowScale(m, scale), v))
    }

    /// Same elements under a new shape with equal element count.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != self.value(a).numel() {
            return Err(shape_err(
                "reshape",
                format!("{:?} -> {:?}", self.value(a).shape(), shape),
            ));
        }
        let v = self.value(a).reshape(shape.clone());
        Ok(self.push(Op::Reshape(a, shape), v))
    }

    /// Fused softmax + cross-entropy. `logits` is `[b,c]`, `targets` holds `b`
    /// class indices `< c`; the node's value is the `[b]` vector of
    /// per-example losses `logsumexp(row) - row[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let shape = self.value(logits).shape();
        if shape.len() != 2 || shape[0] != targets.len() {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("logits {:?} vs {} targets", shape, targets.len()),
            ));
        }
        let classes = shape[1];
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("target {} out of range for {} classes", bad, classes),
            ));
        }
        let v = sce_losses(self.value(logits), targets);
        Ok(self.push(
            Op::SoftmaxCrossEntropy(logits, Arc::new(targets.to_vec())),
            v,
        ))
    }

    fn sce_backward_node(&mut self, logits: NodeId, targets: Arc<Vec<usize>>) -> NodeId {
        let v = sce_backward_value(self.value(logits), &targets);
        self.push(Op::SceBackward(logits, targets), v)
    }

    /// Numeric reverse pass from a scalar `root`. Returns the adjoint of every
    /// node the root depends on; nodes outside the root's ancestry have no
    /// entry (their gradient is structurally zero).
    pub fn backward(&self, root: NodeId) -> Result<GradientMap> {
        if !self.value(root).is_scalar() {
            return Err(AutogradError::NonScalarRoot(
                self.value(root).shape().to_vec(),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let Some(upstream) = grads[idx].clone() else {
                continue;
            };
            self.accumulate_numeric(idx, &upstream, &mut grads);
        }
        Ok(GradientMap { grads })
    }

    /// Adds the numeric vector-Jacobian contributions of node `idx` into the
    /// adjoints of its inputs.
    ///
    /// Convention: wherever a formula divides by a forward value that can be
    /// zero (`div`, `sqrt`), an upstream entry of exactly `0.0` contributes
    /// `0.0` instead of `0 * inf`. A zero adjoint means "no sensitivity", and
    /// that holds regardless of the local slope.
    fn accumulate_numeric(&self, idx: usize, u: &Tensor, grads: &mut Vec<Option<Tensor>>) {
        let add_into = |grads: &mut Vec<Option<Tensor>>, id: NodeId, contrib: Tensor| {
            match &mut grads[id.0] {
                Some(existing) => *existing = existing.zip_map(&contrib, |a, b| a + b),
                slot @ None => *slot = Some(contrib),
            }
        };
        match &self.nodes[idx].op {
            Op::Leaf | Op::ClampGate(..) => {}
            Op::MatMul(a, b) => {
                let da = u.matmul(&self.value(*b).transpose2());
                let db = self.value(*a).transpose2().matmul(u);
                add_into(grads, *a, da);
                add_into(grads, *b, db);
            }
            Op::Transpose(a) => add_into(grads, *a, u.transpose2()),
            Op::Add(a, b) => {
                add_into(grads, *a, u.clone());
                add_into(grads, *b, u.clone());
            }
            Op::Sub(a, b) => {
                add_into(grads, *a, u.clone());
                add_into(grads, *b, u.map(|x| x * -1.0));
            }
            Op::Mul(a, b) => {
                add_into(grads, *a, u.zip_map(self.value(*b), |x, y| x * y));
                add_into(grads, *b, u.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::Div(a, b) => {
                let da = u.zip_map(self.value(*b), |x, y| if x == 0.0 { 0.0 } else { x / y });
                add_into(grads, *a, da);
                let ua = u.zip_map(self.value(*a), |x, y| x * y);
                let db = ua.zip_map(self.value(*b), |x, y| {
                    if x == 0.0 {
                        0.0
                    } else {
                        (x / (y * y)) * -1.0
                    }
                });
                add_into(grads, *b, db);
            }
            Op::ScalarMul(a, c) => add_into(grads, *a, u.map(|x| x * c)),
            Op::ScalarAdd(a, _) => add_into(grads, *a, u.clone()),
            Op::ScalarDiv(a, c) => add_into(grads, *a, u.map(|x| x / c)),
            Op::AddRowVec(m, row) => {
                add_into(grads, *m, u.clone());
                add_into(grads, *row, u.col_sum());
            }
            Op::ColSum(m) => {
                let (rows, cols) = self.value(*m).dims2();
                let mut out = Tensor::zeros(vec![rows, cols]);
                for i in 0..rows {
                    for j in 0..cols {
                        out.data_mut()[i * cols + j] = u.data()[j];
                    }
                }
                add_into(grads, *m, out);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[idx].value;
                add_into(
                    grads,
                    *a,
                    u.zip_map(y, |x, y| x * ((y * y) * -1.0 + 1.0)),
                );
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[idx].value;
                add_into(grads, *a, u.zip_map(y, |x, y| x * (y * (y * -1.0 + 1.0))));
            }
            Op::Square(a) => {
                add_into(grads, *a, u.zip_map(self.value(*a), |x, y| x * (y * 2.0)));
            }
            Op::Sqrt(a) => {
                let y = &self.nodes[idx].value;
                let da = u.zip_map(y, |x, y| if x == 0.0 { 0.0 } else { x / (y * 2.0) });
                add_into(grads, *a, da);
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let gate = self
                    .value(*a)
                    .map(|x| if x > lo && x < hi { 1.0 } else { 0.0 });
                add_into(grads, *a, u.zip_map(&gate, |x, g| x * g));
            }
            Op::Mean(a) => {
                let shape = self.value(*a).shape().to_vec();
                let n = self.value(*a).numel() as f64;
                add_into(grads, *a, Tensor::filled(shape, u.scalar_value() / n));
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                add_into(grads, *a, Tensor::filled(shape, u.scalar_value()));
            }
            Op::Broadcast(a, _) => add_into(grads, *a, u.sum()),
            Op::WeightedSum(a, b) => {
                let s = u.scalar_value();
                add_into(grads, *a, self.value(*b).map(|y| s * y));
                add_into(grads, *b, self.value(*a).map(|y| s * y));
            }
            Op::RowScale(m, scale) => {
                add_into(grads, *m, u.row_scale(self.value(*scale)));
                let (rows, cols) = self.value(*m).dims2();
                let mut ds = Tensor::zeros(vec![rows]);
                for i in 0..rows {
                    let mut acc = 0.0;
                    for j in 0..cols {
                        acc += u.data()[i * cols + j] * self.value(*m).data()[i * cols + j];
                    }
                    ds.data_mut()[i] = acc;
                }
                add_into(grads, *scale, ds);
            }
            Op::Reshape(a, _) => {
                let shape = self.value(*a).shape().to_vec();
                add_into(grads, *a, u.reshape(shape));
            }
            Op::SoftmaxCrossEntropy(logits, targets) => {
                let sb = sce_backward_value(self.value(*logits), targets);
                add_into(grads, *logits, sb.row_scale(u));
            }
            Op::SceBackward(logits, _) => {
                // d/dlogits of (softmax - onehot): the softmax Jacobian,
                // s[e] * (u[e] - sum_c u[c] * s[c]) per row.
                let s = softmax_rows(self.value(*logits));
                let (rows, cols) = s.dims2();
                let mut out = Tensor::zeros(vec![rows, cols]);
                for i in 0..rows {
                    let mut inner = 0.0;
                    for c in 0..cols {
                        inner += u.data()[i * cols + c] * s.data()[i * cols + c];
                    }
                    for e in 0..cols {
                        out.data_mut()[i * cols + e] =
                            s.data()[i * cols + e] * (u.data()[i * cols + e] - inner);
                    }
                }
                add_into(grads, *logits, out);
            }
        }
    }

    /// Emits the reverse pass for `root` with respect to `params` as new
    /// forward nodes and returns one gradient node per parameter, in order.
    ///
    /// Listed parameters are treated as independent inputs: traversal stops at
    /// them even when they are themselves derived nodes (this is what lets an
    /// optimizer step be differentiated with respect to the *current* iterate).
    /// A parameter the root does not depend on gets a zero-leaf gradient.
    ///
    /// Only operations that can appear in a loss cone have an emission rule;
    /// hitting one of the backward-only kinds (`col_sum`, `row_scale`,
    /// `sce_backward`) on the path from root to a parameter is an
    /// [`AutogradError::UnsupportedOperation`].
    pub fn grad_as_graph(&mut self, root: NodeId, params: &[NodeId]) -> Result<Vec<NodeId>> {
        if !self.value(root).is_scalar() {
            return Err(AutogradError::NonScalarRoot(
                self.value(root).shape().to_vec(),
            ));
        }

        let len = root.0 + 1;
        let mut is_param = vec![false; len];
        for p in params {
            if p.0 < len {
                is_param[p.0] = true;
            }
        }

        // Ancestors of the root, not expanding through parameters (they are
        // terminals) or through gates (zero derivative).
        let mut ancestor = vec![false; len];
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            if ancestor[n.0] {
                continue;
            }
            ancestor[n.0] = true;
            if is_param[n.0] || matches!(self.nodes[n.0].op, Op::ClampGate(..)) {
                continue;
            }
            let (a, b) = op_inputs(&self.nodes[n.0].op);
            for input in [a, b].into_iter().flatten() {
                if !ancestor[input.0] {
                    stack.push(input);
                }
            }
        }

        // Nodes on some path from the root to a parameter.
        let mut on_path = vec![false; len];
        for idx in 0..len {
            if !ancestor[idx] {
                continue;
            }
            if is_param[idx] {
                on_path[idx] = true;
                continue;
            }
            if matches!(self.nodes[idx].op, Op::ClampGate(..)) {
                continue;
            }
            let (a, b) = op_inputs(&self.nodes[idx].op);
            on_path[idx] = [a, b]
                .into_iter()
                .flatten()
                .any(|input| on_path[input.0]);
        }

        if !on_path[root.0] {
            // The root is constant in every parameter.
            return Ok(params
                .iter()
                .map(|p| {
                    let shape = self.value(*p).shape().to_vec();
                    self.leaf(Tensor::zeros(shape))
                })
                .collect());
        }

        let mut adj: Vec<Option<NodeId>> = vec![None; len];
        adj[root.0] = Some(self.scalar_leaf(1.0));

        for idx in (0..len).rev() {
            if !on_path[idx] || is_param[idx] {
                continue;
            }
            let Some(u) = adj[idx] else { continue };
            self.emit_backward(idx, u, &on_path, &mut adj)?;
        }

        Ok(params
            .iter()
            .map(|p| match adj.get(p.0).copied().flatten() {
                Some(g) => g,
                None => {
                    let shape = self.value(*p).shape().to_vec();
                    self.leaf(Tensor::zeros(shape))
                }
            })
            .collect())
    }

    /// Emits the gradient contributions of node `idx` into the adjoint nodes
    /// of its on-path inputs. Mirrors `accumulate_numeric` formula for
    /// formula.
    fn emit_backward(
        &mut self,
        idx: usize,
        u: NodeId,
        on_path: &[bool],
        adj: &mut [Option<NodeId>],
    ) -> Result<()> {
        // Contributions accumulate in input-slot order, matching the numeric
        // pass exactly.
        fn stage(
            graph: &mut Graph,
            adj: &mut [Option<NodeId>],
            on_path: &[bool],
            input: NodeId,
            contrib: NodeId,
        ) -> Result<()> {
            if !on_path[input.0] {
                return Ok(());
            }
            adj[input.0] = Some(match adj[input.0] {
                Some(existing) => graph.add(existing, contrib)?,
                None => contrib,
            });
            Ok(())
        }

        let op = self.nodes[idx].op.clone();
        let this = NodeId(idx);
        match op {
            Op::Leaf | Op::ClampGate(..) => {}
            Op::MatMul(a, b) => {
                if on_path[a.0] {
                    let bt = self.transpose(b)?;
                    let da = self.matmul(u, bt)?;
                    stage(self, adj, on_path, a, da)?;
                }
                if on_path[b.0] {
                    let at = self.transpose(a)?;
                    let db = self.matmul(at, u)?;
                    stage(self, adj, on_path, b, db)?;
                }
            }
            Op::Transpose(a) => {
                if on_path[a.0] {
                    let da = self.transpose(u)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Add(a, b) => {
                stage(self, adj, on_path, a, u)?;
                stage(self, adj, on_path, b, u)?;
            }
            Op::Sub(a, b) => {
                stage(self, adj, on_path, a, u)?;
                if on_path[b.0] {
                    let db = self.scalar_mul(u, -1.0);
                    stage(self, adj, on_path, b, db)?;
                }
            }
            Op::Mul(a, b) => {
                if on_path[a.0] {
                    let da = self.mul(u, b)?;
                    stage(self, adj, on_path, a, da)?;
                }
                if on_path[b.0] {
                    let db = self.mul(u, a)?;
                    stage(self, adj, on_path, b, db)?;
                }
            }
            Op::Div(a, b) => {
                if on_path[a.0] {
                    let da = self.div(u, b)?;
                    stage(self, adj, on_path, a, da)?;
                }
                if on_path[b.0] {
                    let ua = self.mul(u, a)?;
                    let b2 = self.square(b);
                    let q = self.div(ua, b2)?;
                    let db = self.scalar_mul(q, -1.0);
                    stage(self, adj, on_path, b, db)?;
                }
            }
            Op::ScalarMul(a, c) => {
                if on_path[a.0] {
                    let da = self.scalar_mul(u, c);
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::ScalarAdd(a, _) => stage(self, adj, on_path, a, u)?,
            Op::ScalarDiv(a, c) => {
                if on_path[a.0] {
                    let da = self.scalar_div(u, c);
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::AddRowVec(m, row) => {
                stage(self, adj, on_path, m, u)?;
                if on_path[row.0] {
                    let dr = self.col_sum(u)?;
                    stage(self, adj, on_path, row, dr)?;
                }
            }
            Op::Tanh(a) => {
                if on_path[a.0] {
                    let y2 = self.square(this);
                    let neg = self.scalar_mul(y2, -1.0);
                    let one_minus = self.scalar_add(neg, 1.0);
                    let da = self.mul(u, one_minus)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Sigmoid(a) => {
                if on_path[a.0] {
                    let neg = self.scalar_mul(this, -1.0);
                    let one_minus = self.scalar_add(neg, 1.0);
                    let y_one_minus = self.mul(this, one_minus)?;
                    let da = self.mul(u, y_one_minus)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Square(a) => {
                if on_path[a.0] {
                    let two_a = self.scalar_mul(a, 2.0);
                    let da = self.mul(u, two_a)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Sqrt(a) => {
                if on_path[a.0] {
                    let two_y = self.scalar_mul(this, 2.0);
                    let da = self.div(u, two_y)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Clamp(a, lo, hi) => {
                if on_path[a.0] {
                    let gate = self.clamp_gate(a, lo, hi);
                    let da = self.mul(u, gate)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Mean(a) => {
                if on_path[a.0] {
                    let n = self.value(a).numel() as f64;
                    let shape = self.value(a).shape().to_vec();
                    let scaled = self.scalar_div(u, n);
                    let da = self.broadcast(scaled, shape)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Sum(a) => {
                if on_path[a.0] {
                    let shape = self.value(a).shape().to_vec();
                    let da = self.broadcast(u, shape)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::Broadcast(a, _) => {
                if on_path[a.0] {
                    let da = self.sum(u);
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::WeightedSum(a, b) => {
                let shape = self.value(a).shape().to_vec();
                if on_path[a.0] {
                    let ub = self.broadcast(u, shape.clone())?;
                    let da = self.mul(ub, b)?;
                    stage(self, adj, on_path, a, da)?;
                }
                if on_path[b.0] {
                    let ub = self.broadcast(u, shape)?;
                    let db = self.mul(ub, a)?;
                    stage(self, adj, on_path, b, db)?;
                }
            }
            Op::Reshape(a, _) => {
                if on_path[a.0] {
                    let shape = self.value(a).shape().to_vec();
                    let da = self.reshape(u, shape)?;
                    stage(self, adj, on_path, a, da)?;
                }
            }
            Op::SoftmaxCrossEntropy(logits, targets) => {
                if on_path[logits.0] {
                    let sb = self.sce_backward_node(logits, targets);
                    let da = self.row_scale(sb, u)?;
                    stage(self, adj, on_path, logits, da)?;
                }
            }
            Op::ColSum(..) | Op::RowScale(..) | Op::SceBackward(..) => {
                return Err(AutogradError::UnsupportedOperation(op_name(&op)));
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-wise softmax with the usual max-shift for stability.
fn softmax_rows(logits: &Tensor) -> Tensor {
    let (rows, cols) = logits.dims2();
    let mut out = logits.data().to_vec();
    for i in 0..rows {
        let row = &mut out[i * cols..(i + 1) * cols];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for x in row.iter_mut() {
            *x = (*x - m).exp();
            total += *x;
        }
        for x in row.iter_mut() {
            *x /= total;
        }
    }
    Tensor::from_vec(vec![rows, cols], out)
}

/// Per-example cross-entropy losses `logsumexp(row) - row[target]`.
fn sce_losses(logits: &Tensor, targets: &[usize]) -> Tensor {
    let (rows, cols) = logits.dims2();
    let mut out = vec![0.0; rows];
    for i in 0..rows {
        let row = &logits.data()[i * cols..(i + 1) * cols];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        out[i] = lse - row[targets[i]];
    }
    Tensor::from_vec(vec![rows], out)
}

/// `softmax(logits) - onehot(targets)`.
fn sce_backward_value(logits: &Tensor, targets: &[usize]) -> Tensor {
    let mut s = softmax_rows(logits);
    let (_, cols) = logits.dims2();
    for (i, &t) in targets.iter().enumerate() {
        s.data_mut()[i * cols + t] -= 1.0;
    }
    s
}

/// Central finite-difference gradient of a scalar function of several
/// tensors: `(f(x + h) - f(x - h)) / 2h` per coordinate. A slow but
/// implementation-independent oracle for checking analytic gradients.
pub fn finite_difference_gradient<F>(mut f: F, at: &[Tensor], step: f64) -> Vec<Tensor>
where
    F: FnMut(&[Tensor]) -> f64,
{
    let mut grads = Vec::with_capacity(at.len());
    for pi in 0..at.len() {
        let mut grad = Tensor::zeros(at[pi].shape().to_vec());
        for ei in 0..at[pi].numel() {
            let mut plus: Vec<Tensor> = at.to_vec();
            plus[pi].data_mut()[ei] += step;
            let mut minus: Vec<Tensor> = at.to_vec();
            minus[pi].data_mut()[ei] -= step;
            grad.data_mut()[ei] = (f(&plus) - f(&minus)) / (2.0 * step);
        }
        grads.push(grad);
    }
    grads
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        let scale = a.abs().max(b.abs()).max(1.0);
        assert!(
            (a - b).abs() <= tol * scale,
            "{} vs {} (tol {})",
            a,
            b,
            tol
        );
    }

    #[test]
    fn graph_is_send() {
        fn needs_send<T: Send>() {}
        needs_send::<Graph>();
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut g = Graph::new();
        let x = g.scalar_leaf(0.0);
        let y = g.sigmoid(x);
        assert_eq!(g.value(y).scalar_value(), 0.5);
    }

    #[test]
    fn weighted_sum_matches_dot() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::from_vec(vec![3], vec![1.0, 2.0, 3.0]));
        let b = g.leaf(Tensor::from_vec(vec![3], vec![0.5, 0.5, 1.0]));
        let d = g.weighted_sum(a, b).unwrap();
        assert_eq!(g.value(d).scalar_value(), 4.5);
    }

    #[test]
    fn cross_entropy_of_uniform_logits_is_ln_classes() {
        let mut g = Graph::new();
        let logits = g.leaf(Tensor::zeros(vec![2, 4]));
        let loss = g.softmax_cross_entropy(logits, &[0, 3]).unwrap();
        for &l in g.value(loss).data() {
            assert_close(l, (4.0_f64).ln(), 1e-15);
        }
    }

    #[test]
    fn cross_entropy_target_out_of_range_is_error() {
        let mut g = Graph::new();
        let logits = g.leaf(Tensor::zeros(vec![2, 3]));
        assert!(matches!(
            g.softmax_cross_entropy(logits, &[0, 3]),
            Err(AutogradError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn simple_derivatives() {
        // d(x*x)/dx = 2x = 6 at x = 3; d(x+y)/dx = 1.
        let mut g = Graph::new();
        let x = g.scalar_leaf(3.0);
        let y = g.scalar_leaf(10.0);
        let xx = g.square(x);
        let grads = g.backward(xx).unwrap();
        assert_eq!(grads.get(x).unwrap().scalar_value(), 6.0);

        let s = g.add(x, y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().scalar_value(), 1.0);
        assert_eq!(grads.get(y).unwrap().scalar_value(), 1.0);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![2, 2]));
        let y = g.tanh(x);
        assert!(matches!(
            g.backward(y),
            Err(AutogradError::NonScalarRoot(_))
        ));
        assert!(matches!(
            g.grad_as_graph(y, &[x]),
            Err(AutogradError::NonScalarRoot(_))
        ));
    }

    #[test]
    fn shape_mismatch_reports_op_and_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::zeros(vec![2, 3]));
        let b = g.leaf(Tensor::zeros(vec![2, 3]));
        let err = g.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("[2, 3]"), "{}", msg);
    }

    /// Builds a two-layer tanh perceptron loss from raw leaf values, used to
    /// compare analytic gradients against finite differences.
    fn mlp_loss_graph(inputs: &[Tensor]) -> (Graph, Vec<NodeId>, NodeId) {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let (x, w1, b1, w2, b2, w) = (ids[0], ids[1], ids[2], ids[3], ids[4], ids[5]);
        let h = g.matmul(x, w1).unwrap();
        let h = g.add_row_vec(h, b1).unwrap();
        let h = g.tanh(h);
        let logits = g.matmul(h, w2).unwrap();
        let logits = g.add_row_vec(logits, b2).unwrap();
        let losses = g.softmax_cross_entropy(logits, &[0, 1, 2, 0]).unwrap();
        let weighted = g.mul(w, losses).unwrap();
        let loss = g.mean(weighted);
        (g, ids, loss)
    }

    fn mlp_inputs(seed: u64) -> Vec<Tensor> {
        // Deterministic pseudo-random fill, no RNG dependency needed here.
        let mut state = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let fill = |shape: Vec<usize>, next: &mut dyn FnMut() -> f64| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| next()).collect())
        };
        vec![
            fill(vec![4, 5], &mut next),      // x
            fill(vec![5, 6], &mut next),      // w1
            fill(vec![6], &mut next),         // b1
            fill(vec![6, 3], &mut next),      // w2
            fill(vec![3], &mut next),         // b2
            Tensor::from_vec(vec![4], vec![0.9, 0.4, 1.0, 0.2]), // example weights
        ]
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let inputs = mlp_inputs(7);
        let (g, ids, loss) = mlp_loss_graph(&inputs);
        let grads = g.backward(loss).unwrap();
        let fd = finite_difference_gradient(
            |vals| {
                let (g, _, loss) = mlp_loss_graph(vals);
                g.value(loss).scalar_value()
            },
            &inputs,
            1e-5,
        );
        for (id, fd_grad) in ids.iter().zip(&fd) {
            let analytic = grads.get_or_zeros(&g, *id);
            for (a, b) in analytic.data().iter().zip(fd_grad.data()) {
                assert_close(*a, *b, 1e-6);
            }
        }
    }

    #[test]
    fn emitted_gradient_matches_backward_on_mlp_loss() {
        let inputs = mlp_inputs(13);
        let (mut g, ids, loss) = mlp_loss_graph(&inputs);
        let params = [ids[1], ids[2], ids[3], ids[4]];
        let numeric = g.backward(loss).unwrap();
        let emitted = g.grad_as_graph(loss, &params).unwrap();
        for (p, e) in params.iter().zip(&emitted) {
            let n = numeric.get(*p).unwrap();
            for (a, b) in n.data().iter().zip(g.value(*e).data()) {
                assert_close(*a, *b, 1e-12);
            }
        }
    }

    #[test]
    fn gradient_node_is_itself_differentiable() {
        // loss = w * x^2 at x = 3, w = 2: d loss/dx = 2wx = 12, and
        // differentiating that gradient with respect to w gives 2x = 6.
        let mut g = Graph::new();
        let x = g.scalar_leaf(3.0);
        let w = g.scalar_leaf(2.0);
        let x2 = g.square(x);
        let loss = g.mul(w, x2).unwrap();
        let grads = g.grad_as_graph(loss, &[x]).unwrap();
        assert_eq!(g.value(grads[0]).scalar_value(), 12.0);

        let second = g.backward(grads[0]).unwrap();
        assert_eq!(second.get(w).unwrap().scalar_value(), 6.0);
    }

    #[test]
    fn gradient_of_constant_root_is_zero_leaf() {
        let mut g = Graph::new();
        let x = g.scalar_leaf(3.0);
        let c = g.scalar_leaf(5.0);
        let loss = g.square(c);
        let grads = g.grad_as_graph(loss, &[x]).unwrap();
        assert_eq!(g.value(grads[0]).scalar_value(), 0.0);
        // Numeric backward simply has no entry for x.
        let map = g.backward(loss).unwrap();
        assert!(map.get(x).is_none());
    }

    #[test]
    fn clamp_gradient_is_zero_outside_open_interval() {
        for (x, expected) in [(0.5, 1.0), (0.0, 0.0), (1.0, 0.0), (1.5, 0.0), (-2.0, 0.0)] {
            let mut g = Graph::new();
            let v = g.scalar_leaf(x);
            let c = g.clamp(v, 0.0, 1.0);
            let loss = g.sum(c);
            let grads = g.backward(loss).unwrap();
            assert_eq!(
                grads.get(v).unwrap().scalar_value(),
                expected,
                "clamp'({})",
                x
            );
            let mut g2 = Graph::new();
            let v2 = g2.scalar_leaf(x);
            let c2 = g2.clamp(v2, 0.0, 1.0);
            let loss2 = g2.sum(c2);
            let emitted = g2.grad_as_graph(loss2, &[v2]).unwrap();
            assert_eq!(g2.value(emitted[0]).scalar_value(), expected);
        }
    }

    #[test]
    fn nested_emission_through_backward_only_op_is_rejected() {
        // The first emission introduces sce_backward nodes; asking for a
        // gradient graph *of the gradient* must hit the unsupported kind.
        let mut g = Graph::new();
        let logits = g.leaf(Tensor::from_vec(vec![2, 3], vec![0.3, -0.2, 0.5, 1.0, 0.0, -1.0]));
        let losses = g.softmax_cross_entropy(logits, &[2, 0]).unwrap();
        let loss = g.mean(losses);
        let grads = g.grad_as_graph(loss, &[logits]).unwrap();
        let probe = g.mean(grads[0]);
        let err = g.grad_as_graph(probe, &[logits]).unwrap_err();
        assert!(matches!(err, AutogradError::UnsupportedOperation(_)));
    }

    #[test]
    fn emitted_second_order_matches_finite_differences_of_backward() {
        // d(grad wrt params)/d(weights): compare structural second order
        // against finite differences of first-order backward gradients.
        let inputs = mlp_inputs(21);
        let (mut g, ids, loss) = mlp_loss_graph(&inputs);
        let w = ids[5];
        let params = [ids[1], ids[3]];
        let emitted = g.grad_as_graph(loss, &params).unwrap();
        // Scalar probe: sum of all emitted gradient entries.
        let s1 = g.sum(emitted[0]);
        let s2 = g.sum(emitted[1]);
        let probe = g.add(s1, s2).unwrap();
        let second = g.backward(probe).unwrap();
        let analytic = second.get(w).unwrap().clone();

        let fd = finite_difference_gradient(
            |vals| {
                let (g, ids, loss) = mlp_loss_graph(vals);
                let grads = g.backward(loss).unwrap();
                grads.get(ids[1]).unwrap().data().iter().sum::<f64>()
                    + grads.get(ids[3]).unwrap().data().iter().sum::<f64>()
            },
            &inputs,
            1e-5,
        );
        for (a, b) in analytic.data().iter().zip(fd[5].data()) {
            assert_close(*a, *b, 1e-3);
        }
    }

    #[test]
    fn every_op_gradient_matches_finite_differences() {
        // One scalar-loss builder per differentiable op kind.
        type Builder = fn(&mut Graph, &[NodeId]) -> NodeId;
        let mm: Builder = |g, ids| {
            let p = g.matmul(ids[0], ids[1]).unwrap();
            g.mean(p)
        };
        let tr: Builder = |g, ids| {
            let t = g.transpose(ids[0]).unwrap();
            let p = g.matmul(t, ids[0]).unwrap();
            g.sum(p)
        };
        let add: Builder = |g, ids| {
            let s = g.add(ids[0], ids[1]).unwrap();
            g.mean(s)
        };
        let sub: Builder = |g, ids| {
            let s = g.sub(ids[0], ids[1]).unwrap();
            let sq = g.square(s);
            g.mean(sq)
        };
        let mul: Builder = |g, ids| {
            let s = g.mul(ids[0], ids[1]).unwrap();
            g.sum(s)
        };
        let div: Builder = |g, ids| {
            let sq = g.square(ids[1]);
            let denom = g.scalar_add(sq, 1.5);
            let s = g.div(ids[0], denom).unwrap();
            g.mean(s)
        };
        let scalars: Builder = |g, ids| {
            let a = g.scalar_mul(ids[0], 3.0);
            let b = g.scalar_add(a, -0.7);
            let c = g.scalar_div(b, 1.9);
            g.mean(c)
        };
        let rowv: Builder = |g, ids| {
            let a = g.add_row_vec(ids[0], ids[2]).unwrap();
            g.mean(a)
        };
        let acts: Builder = |g, ids| {
            let t = g.tanh(ids[0]);
            let s = g.sigmoid(t);
            g.mean(s)
        };
        let sqrt: Builder = |g, ids| {
            let sq = g.square(ids[0]);
            let pos = g.scalar_add(sq, 0.3);
            let r = g.sqrt(pos);
            g.sum(r)
        };
        let clamp: Builder = |g, ids| {
            let c = g.clamp(ids[0], -0.25, 0.25);
            g.mean(c)
        };
        let bcast: Builder = |g, ids| {
            let m = g.mean(ids[0]);
            let b = g.broadcast(m, vec![2, 3]).unwrap();
            let p = g.mul(b, ids[1]).unwrap();
            g.sum(p)
        };
        let wsum: Builder = |g, ids| {
            let r = g.reshape(ids[0], vec![6]).unwrap();
            let q = g.reshape(ids[1], vec![6]).unwrap();
            g.weighted_sum(r, q).unwrap()
        };
        let sce: Builder = |g, ids| {
            let l = g.softmax_cross_entropy(ids[0], &[0, 2]).unwrap();
            g.mean(l)
        };
        let cases: &[(&str, Builder)] = &[
            ("matmul", mm),
            ("transpose", tr),
            ("add", add),
            ("sub", sub),
            ("mul", mul),
            ("div", div),
            ("scalar chain", scalars),
            ("add_row_vec", rowv),
            ("tanh+sigmoid", acts),
            ("sqrt", sqrt),
            ("clamp", clamp),
            ("broadcast", bcast),
            ("weighted_sum", wsum),
            ("softmax_cross_entropy", sce),
        ];

        for (name, build) in cases {
            let base: Vec<Tensor> = vec![
                Tensor::from_vec(vec![2, 3], vec![0.31, -0.46, 0.17, 0.65, -0.11, 0.08]),
                Tensor::from_vec(vec![3, 2], vec![-0.21, 0.39, 0.77, -0.58, 0.12, 0.41]),
                Tensor::from_vec(vec![3], vec![0.05, -0.33, 0.6]),
            ];
            // Shapes differ per case; adapt the second operand where needed.
            let inputs: Vec<Tensor> = match *name {
                "add" | "sub" | "mul" | "div" | "broadcast" | "weighted_sum" => vec![
                    base[0].clone(),
                    base[1].clone().reshape(vec![2, 3]),
                    base[2].clone(),
                ],
                _ => base,
            };
            let run = |vals: &[Tensor]| {
                let mut g = Graph::new();
                let ids: Vec<NodeId> = vals.iter().map(|t| g.leaf(t.clone())).collect();
                let loss = build(&mut g, &ids);
                (g, ids, loss)
            };
            let (g, ids, loss) = run(&inputs);
            let grads = g.backward(loss).unwrap();
            let fd = finite_difference_gradient(
                |vals| {
                    let (g, _, loss) = run(vals);
                    g.value(loss).scalar_value()
                },
                &inputs,
                1e-6,
            );
            for (id, fd_grad) in ids.iter().zip(&fd) {
                let analytic = grads.get_or_zeros(&g, *id);
                for (a, b) in analytic.data().iter().zip(fd_grad.data()) {
                    assert_close(*a, *b, 5e-5);
                }
            }

            // The emitted gradient graph must agree with the numeric pass.
            let (mut g, ids, loss) = run(&inputs);
            let emitted = g.grad_as_graph(loss, &ids).unwrap();
            let numeric = g.backward(loss).unwrap();
            for (id, e) in ids.iter().zip(&emitted) {
                let n = numeric.get_or_zeros(&g, *id);
                for (a, b) in n.data().iter().zip(g.value(*e).data()) {
                    assert_close(*a, *b, 1e-12);
                }
            }
        }
    }
}
