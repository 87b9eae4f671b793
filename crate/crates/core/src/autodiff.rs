//! Tape-style reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Graph`] is an append-only list of nodes. Each op evaluates eagerly,
//! stores its value and remembers its inputs, so node ids are already in
//! topological order and [`Graph::backward`] is a single reverse sweep.
//!
//! Graphs are cheap and meant to be thrown away after every optimizer step:
//! parameters are copied in as leaves with [`Graph::param`], the loss is
//! built, gradients are read back by leaf id.

use crate::error::{Error, Result, Shape};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param,
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    /// `a (r×c) + b (r×1)` broadcast across columns.
    AddColumn(NodeId, NodeId),
    /// `a (r×c) ∘ b (1×c)` broadcast down rows.
    MulRow(NodeId, NodeId),
    /// `a / s` with `s` a `1×1` node.
    DivScalar(NodeId, NodeId),
    Scale(NodeId, f64),
    AddConst(NodeId),
    DivConst(NodeId, f64),
    DivRows(NodeId, Vec<f64>),
    Neg(NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    LogSigmoid(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    ColSum(NodeId),
    SliceRow(NodeId, usize),
    ConcatRows(Vec<NodeId>),
    Gather(NodeId, Vec<usize>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Reverse-mode differentiation record. Not `Sync`-shared; build one per thread.
#[derive(Default, Debug)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node it depends on.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Shape>,
}

impl Gradients {
    /// `None` when the node does not influence the loss.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `id`, or zeros of the right shape when the loss does not depend on it.
    pub fn get_or_zero(&self, id: NodeId) -> Tensor {
        match self.get(id) {
            Some(g) => g.clone(),
            None => {
                let Shape(r, c) = self.shapes[id.0];
                Tensor::zeros(r, c)
            }
        }
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

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> Shape {
        self.nodes[id.0].value.shape()
    }

    /// True for leaves created with [`Graph::param`].
    pub fn is_param(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0].op, Op::Param)
    }

    pub fn params(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .map(NodeId)
            .filter(|&id| self.is_param(id))
            .collect()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant leaf. Rejects non-finite data at the graph boundary.
    pub fn input(&mut self, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("graph input".into()));
        }
        Ok(self.push(value, Op::Input))
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite("parameter".into()));
        }
        Ok(self.push(value, Op::Param))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).transpose();
        Ok(self.push(value, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).zip_map(self.value(b), "div", |x, y| x / y)?;
        Ok(self.push(value, Op::Div(a, b)))
    }

    /// Adds a column vector to every column of `a`.
    pub fn add_column(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.cols() != 1 || bv.rows() != av.rows() {
            return Err(Error::dim("add_column", av.shape(), bv.shape()));
        }
        let mut value = av.clone();
        let cols = av.cols();
        for (r, &bias) in bv.data().iter().enumerate() {
            for x in &mut value.data_mut()[r * cols..(r + 1) * cols] {
                *x += bias;
            }
        }
        Ok(self.push(value, Op::AddColumn(a, b)))
    }

    /// Multiplies every row of `a` elementwise by the row vector `b`.
    pub fn mul_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(Error::dim("mul_row", av.shape(), bv.shape()));
        }
        let mut value = av.clone();
        for r in 0..av.rows() {
            for (x, &f) in value.row_slice_mut(r).iter_mut().zip(bv.data()) {
                *x *= f;
            }
        }
        Ok(self.push(value, Op::MulRow(a, b)))
    }

    /// Divides `a` by the scalar node `s`.
    pub fn div_scalar(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let sv = self.value(s);
        if sv.shape() != Shape(1, 1) {
            return Err(Error::dim("div_scalar", self.shape(a), sv.shape()));
        }
        let d = sv.data()[0];
        let value = self.value(a).map(|x| x / d);
        Ok(self.push(value, Op::DivScalar(a, s)))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let value = self.value(a).map(|x| x * factor);
        Ok(self.push(value, Op::Scale(a, factor)))
    }

    pub fn add_const(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value = self.value(a).map(|x| x + c);
        Ok(self.push(value, Op::AddConst(a)))
    }

    /// `a / c` for a constant `c` that receives no gradient.
    pub fn div_const(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value = self.value(a).map(|x| x / c);
        Ok(self.push(value, Op::DivConst(a, c)))
    }

    /// Divides row `i` of `a` by the constant `divisors[i]`.
    pub fn div_rows(&mut self, a: NodeId, divisors: Vec<f64>) -> Result<NodeId> {
        let av = self.value(a);
        if divisors.len() != av.rows() {
            return Err(Error::dim("div_rows", av.shape(), Shape(divisors.len(), 1)));
        }
        let mut value = av.clone();
        for (r, &d) in divisors.iter().enumerate() {
            for x in value.row_slice_mut(r) {
                *x /= d;
            }
        }
        Ok(self.push(value, Op::DivRows(a, divisors)))
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(|x| -x);
        Ok(self.push(value, Op::Neg(a)))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        Ok(self.push(value, Op::Relu(a)))
    }

    /// `max(0, x)`; same node as [`Graph::relu`], subgradient 0 at the kink.
    pub fn max0(&mut self, a: NodeId) -> Result<NodeId> {
        self.relu(a)
    }

    pub fn leaky_relu(&mut self, a: NodeId, alpha: f64) -> Result<NodeId> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { alpha * x });
        Ok(self.push(value, Op::LeakyRelu(a, alpha)))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(f64::tanh);
        Ok(self.push(value, Op::Tanh(a)))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(sigmoid);
        Ok(self.push(value, Op::Sigmoid(a)))
    }

    /// Numerically stable `log σ(x)`.
    pub fn log_sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.value(a).map(log_sigmoid);
        Ok(self.push(value, Op::LogSigmoid(a)))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::Domain("sum of an empty tensor".into()));
        }
        let value = Tensor::scalar(av.sum());
        Ok(self.push(value, Op::Sum(a)))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::Domain("mean of an empty tensor".into()));
        }
        let value = Tensor::scalar(av.sum() / av.len() as f64);
        Ok(self.push(value, Op::Mean(a)))
    }

    /// Sums each column, giving a `1×c` row. Accumulates rows in order.
    pub fn col_sum(&mut self, a: NodeId) -> Result<NodeId> {
        let av = self.value(a);
        let mut value = Tensor::zeros(1, av.cols());
        for r in 0..av.rows() {
            for (o, &x) in value.data_mut().iter_mut().zip(av.row_slice(r)) {
                *o += x;
            }
        }
        Ok(self.push(value, Op::ColSum(a)))
    }

    pub fn slice_row(&mut self, a: NodeId, row: usize) -> Result<NodeId> {
        let av = self.value(a);
        if row >= av.rows() {
            return Err(Error::Domain(format!("row {row} out of range for {}", av.shape())));
        }
        let value = Tensor::row(av.row_slice(row));
        Ok(self.push(value, Op::SliceRow(a, row)))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Domain("concat of zero tensors".into()));
        }
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor::concat_rows(&values)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    /// Embedding lookup: column `j` of the result is row `labels[j]` of `table`.
    pub fn gather(&mut self, table: NodeId, labels: &[usize]) -> Result<NodeId> {
        let tv = self.value(table);
        let (classes, dim) = (tv.rows(), tv.cols());
        let mut value = Tensor::zeros(dim, labels.len());
        for (j, &label) in labels.iter().enumerate() {
            if label >= classes {
                return Err(Error::Domain(format!("label {label} outside [0, {classes})")));
            }
            for k in 0..dim {
                value.set(k, j, tv.get(label, k));
            }
        }
        Ok(self.push(value, Op::Gather(table, labels.to_vec())))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != Shape(1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}",
                lv.shape()
            )));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..n).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Input | Op::Param => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, g.matmul_nt(bv)?);
                accumulate(grads, *b, av.matmul_tn(g)?);
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, g.zip_map(bv, "mul", |d, y| d * y)?);
                accumulate(grads, *b, g.zip_map(av, "mul", |d, x| d * x)?);
            }
            Op::Div(a, b) => {
                let bv = self.value(*b);
                accumulate(grads, *a, g.zip_map(bv, "div", |d, y| d / y)?);
                // d(x/y)/dy = -(x/y)/y
                let q = out.zip_map(bv, "div", |q, y| q / y)?;
                accumulate(grads, *b, g.zip_map(&q, "div", |d, r| -d * r)?);
            }
            Op::AddColumn(a, b) => {
                accumulate(grads, *a, g.clone());
                let sums: Vec<f64> = (0..g.rows()).map(|r| g.row_slice(r).iter().sum()).collect();
                accumulate(grads, *b, Tensor::column(&sums));
            }
            Op::MulRow(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let mut ga = g.clone();
                let mut gb = Tensor::zeros(1, bv.cols());
                for r in 0..g.rows() {
                    let grow = g.row_slice(r);
                    let arow = av.row_slice(r);
                    for c in 0..g.cols() {
                        gb.data_mut()[c] += grow[c] * arow[c];
                    }
                    for (x, &f) in ga.row_slice_mut(r).iter_mut().zip(bv.data()) {
                        *x *= f;
                    }
                }
                accumulate(grads, *a, ga);
                accumulate(grads, *b, gb);
            }
            Op::DivScalar(a, s) => {
                let d = self.value(*s).data()[0];
                accumulate(grads, *a, g.map(|x| x / d));
                let dot: f64 = g.data().iter().zip(out.data()).map(|(gi, qi)| gi * qi).sum();
                accumulate(grads, *s, Tensor::scalar(-dot / d));
            }
            Op::Scale(a, f) => accumulate(grads, *a, g.map(|x| x * f)),
            Op::AddConst(a) => accumulate(grads, *a, g.clone()),
            Op::DivConst(a, c) => accumulate(grads, *a, g.map(|x| x / c)),
            Op::DivRows(a, divisors) => {
                let mut ga = g.clone();
                for (r, &d) in divisors.iter().enumerate() {
                    for x in ga.row_slice_mut(r) {
                        *x /= d;
                    }
                }
                accumulate(grads, *a, ga);
            }
            Op::Neg(a) => accumulate(grads, *a, g.map(|x| -x)),
            Op::Relu(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, g.zip_map(av, "relu", |d, x| if x > 0.0 { d } else { 0.0 })?);
            }
            Op::LeakyRelu(a, alpha) => {
                let av = self.value(*a);
                let alpha = *alpha;
                accumulate(
                    grads,
                    *a,
                    g.zip_map(av, "leaky_relu", |d, x| if x > 0.0 { d } else { alpha * d })?,
                );
            }
            Op::Tanh(a) => accumulate(grads, *a, g.zip_map(out, "tanh", |d, y| d * (1.0 - y * y))?),
            Op::Sigmoid(a) => accumulate(grads, *a, g.zip_map(out, "sigmoid", |d, y| d * y * (1.0 - y))?),
            Op::LogSigmoid(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, g.zip_map(av, "log_sigmoid", |d, x| d * sigmoid(-x))?);
            }
            Op::Sum(a) => {
                let Shape(r, c) = self.shape(*a);
                accumulate(grads, *a, Tensor::full(r, c, g.data()[0]));
            }
            Op::Mean(a) => {
                let Shape(r, c) = self.shape(*a);
                accumulate(grads, *a, Tensor::full(r, c, g.data()[0] / (r * c) as f64));
            }
            Op::ColSum(a) => {
                let Shape(r, _) = self.shape(*a);
                let parts: Vec<&Tensor> = std::iter::repeat_n(g, r).collect();
                accumulate(grads, *a, Tensor::concat_rows(&parts)?);
            }
            Op::SliceRow(a, row) => {
                let Shape(r, c) = self.shape(*a);
                let mut ga = Tensor::zeros(r, c);
                ga.row_slice_mut(*row).copy_from_slice(g.data());
                accumulate(grads, *a, ga);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let Shape(r, c) = self.shape(p);
                    let slice = g.data()[offset * c..(offset + r) * c].to_vec();
                    accumulate(grads, p, Tensor::from_vec(r, c, slice)?);
                    offset += r;
                }
            }
            Op::Gather(table, labels) => {
                let Shape(classes, dim) = self.shape(*table);
                let mut gt = Tensor::zeros(classes, dim);
                for (j, &label) in labels.iter().enumerate() {
                    for k in 0..dim {
                        let v = gt.get(label, k) + g.get(k, j);
                        gt.set(label, k, v);
                    }
                }
                accumulate(grads, *table, gt);
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, contribution: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&contribution),
        slot @ None => *slot = Some(contribution),
    }
}
