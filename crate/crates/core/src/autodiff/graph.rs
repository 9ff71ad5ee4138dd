use std::collections::HashMap;

use super::tensor::{matmul_nt_into, matmul_tn_into};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
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
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    ScalarMul(NodeId, f64),
    Scale(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Concat { parts: Vec<NodeId>, axis: usize },
    Slice { x: NodeId, axis: usize, start: usize },
    Reshape(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    LeakyRelu(NodeId, f64),
    Softmax { x: NodeId, axis: usize },
    CrossEntropy { logits: NodeId, gold: Vec<usize>, probs: Tensor, scale: f64 },
    Sum(NodeId),
    SumAxis { x: NodeId, axis: usize },
    Gather { table: NodeId, ids: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// Reduction applied by [`Graph::cross_entropy_with`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

/// Tape of recorded operations.
///
/// Nodes are appended in evaluation order, so every input of a node has a
/// smaller id than the node itself and insertion order is a topological
/// order. [`Graph::backward`] replays the tape in reverse.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

/// Splits `shape` around `axis` into (outer, axis length, inner) extents.
fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
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

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        id
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Leaf whose gradient is tracked.
    pub fn var(&mut self, value: Tensor) -> NodeId {
        self.push(value, true, Op::Input)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, false, Op::Input)
    }

    /// Leaf bound to a stored parameter. Repeated calls for the same
    /// parameter return the same node, so all uses share one gradient.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let p = store.get(id);
        let node = self.push(p.value.clone(), p.trainable, Op::Param);
        self.param_nodes.insert(id, node);
        node
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{}: shapes {:?} and {:?} differ",
                what,
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: NodeId, b: NodeId, op: Op, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data).unwrap();
        let rg = self.rg(&[a, b]);
        self.push(value, rg, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "sub")?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "mul")?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// Adds a row vector (`[n]` or `[1×n]`) to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let sa = self.shape(a);
        let sr = self.shape(row);
        if sa.len() != 2 || sr.iter().product::<usize>() != sa[1] {
            return Err(Error::Shape(format!(
                "add_row: cannot broadcast {:?} over rows of {:?}",
                sr, sa
            )));
        }
        let cols = sa[1];
        let bias = self.nodes[row.0].value.data().to_vec();
        let mut value = self.nodes[a.0].value.clone();
        for chunk in value.data_mut().chunks_mut(cols) {
            for (v, b) in chunk.iter_mut().zip(&bias) {
                *v += b;
            }
        }
        let rg = self.rg(&[a, row]);
        Ok(self.push(value, rg, Op::AddRow(a, row)))
    }

    pub fn scalar_mul(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a.0].value.map(|x| c * x);
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::ScalarMul(a, c))
    }

    /// Multiplies every element of `x` by the single value held in `s`.
    pub fn scale(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        if !self.value(s).is_scalar() {
            return Err(Error::Shape(format!(
                "scale: factor must hold one value, got {:?}",
                self.shape(s)
            )));
        }
        let c = self.value(s).data()[0];
        let value = self.nodes[x.0].value.map(|v| c * v);
        let rg = self.rg(&[x, s]);
        Ok(self.push(value, rg, Op::Scale(x, s)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape(format!(
                "matmul: cannot multiply {:?} by {:?}",
                sa, sb
            )));
        }
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, rg, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        if self.shape(a).len() != 2 {
            return Err(Error::Shape(format!(
                "transpose needs a matrix, got {:?}",
                self.shape(a)
            )));
        }
        let value = self.nodes[a.0].value.transpose();
        let rg = self.rg(&[a]);
        Ok(self.push(value, rg, Op::Transpose(a)))
    }

    /// Concatenates along the last dimension.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let axis = match parts.first() {
            Some(&p) => self.shape(p).len() - 1,
            None => return Err(Error::Shape("concat of zero tensors".into())),
        };
        self.concat_axis(parts, axis)
    }

    /// Concatenates along the first dimension.
    pub fn stack_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.concat_axis(parts, 0)
    }

    pub fn concat_axis(&mut self, parts: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = match parts.first() {
            Some(&p) => self.shape(p).to_vec(),
            None => return Err(Error::Shape("concat of zero tensors".into())),
        };
        if axis >= first.len() {
            return Err(Error::Shape(format!(
                "concat axis {} out of range for {:?}",
                axis, first
            )));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::Shape(format!(
                    "concat: {:?} incompatible with {:?} along axis {}",
                    s, first, axis
                )));
            }
            total += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_extents(&shape, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let v = &self.nodes[p.0].value;
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let value = Tensor::new(shape, data)?;
        let rg = self.rg(parts);
        Ok(self.push(
            value,
            rg,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    /// Takes `len` entries starting at `start` along `axis`.
    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::Index(format!(
                "slice [{}, {}) on axis {} of {:?}",
                start,
                start + len,
                axis,
                shape
            )));
        }
        let (outer, n, inner) = axis_extents(&shape, axis);
        let src = self.nodes[x.0].value.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner + start * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let value = Tensor::new(out_shape, data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, rg, Op::Slice { x, axis, start }))
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        self.slice(x, 0, start, len)
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let last = self.shape(x).len() - 1;
        self.slice(x, last, start, len)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.nodes[x.0].value.clone().reshaped(shape.to_vec())?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, rg, Op::Reshape(x)))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.map(|v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        });
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.map(f64::tanh);
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::Tanh(x))
    }

    /// `x` where positive, `slope · x` elsewhere. The subgradient at zero is
    /// `slope`.
    pub fn leaky_relu(&mut self, x: NodeId, slope: f64) -> NodeId {
        let value = self.nodes[x.0]
            .value
            .map(|v| if v > 0.0 { v } else { slope * v });
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::LeakyRelu(x, slope))
    }

    /// Softmax along `axis`, computed after subtracting the maximum.
    /// Entries equal to `-inf` receive probability zero.
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let v = &self.nodes[x.0].value;
        if axis >= v.rank() {
            return Err(Error::Shape(format!(
                "softmax axis {} out of range for {:?}",
                axis,
                v.shape()
            )));
        }
        if v.data().iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("softmax input contains NaN".into()));
        }
        let value = softmax_values(v, axis)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, rg, Op::Softmax { x, axis }))
    }

    /// Mean negative log-likelihood of `gold` under row-wise softmax of
    /// `logits[n×C]`.
    pub fn cross_entropy(&mut self, logits: NodeId, gold: &[usize]) -> Result<NodeId> {
        self.cross_entropy_with(logits, gold, Reduction::Mean)
    }

    pub fn cross_entropy_with(
        &mut self,
        logits: NodeId,
        gold: &[usize],
        reduction: Reduction,
    ) -> Result<NodeId> {
        let v = &self.nodes[logits.0].value;
        if v.rank() != 2 || v.rows() != gold.len() {
            return Err(Error::Shape(format!(
                "cross_entropy: logits {:?} with {} gold indices",
                v.shape(),
                gold.len()
            )));
        }
        let classes = v.cols();
        if let Some(&bad) = gold.iter().find(|&&g| g >= classes) {
            return Err(Error::Index(format!(
                "gold class {} outside [0, {})",
                bad, classes
            )));
        }
        if v.data().iter().any(|x| x.is_nan()) {
            return Err(Error::Numeric("cross_entropy logits contain NaN".into()));
        }
        let probs = softmax_values(v, 1)?;
        let mut total = 0.0;
        for (r, &g) in gold.iter().enumerate() {
            // log-sum-exp form keeps saturated rows exact
            let row = v.row_slice(r);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
            total += lse - row[g];
        }
        let scale = match reduction {
            Reduction::Mean => 1.0 / gold.len() as f64,
            Reduction::Sum => 1.0,
        };
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(total * scale),
            rg,
            Op::CrossEntropy {
                logits,
                gold: gold.to_vec(),
                probs,
                scale,
            },
        ))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.nodes[x.0].value.sum());
        let rg = self.rg(&[x]);
        self.push(value, rg, Op::Sum(x))
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x.0].value.numel() as f64;
        let s = self.sum(x);
        self.scalar_mul(s, 1.0 / n)
    }

    /// Sums along `axis`, keeping it with length 1.
    pub fn sum_axis(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Shape(format!(
                "sum axis {} out of range for {:?}",
                axis, shape
            )));
        }
        let (outer, n, inner) = axis_extents(&shape, axis);
        let src = self.nodes[x.0].value.data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                for i in 0..inner {
                    data[o * inner + i] += src[(o * n + k) * inner + i];
                }
            }
        }
        let mut out_shape = shape;
        out_shape[axis] = 1;
        let value = Tensor::new(out_shape, data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, rg, Op::SumAxis { x, axis }))
    }

    /// Row gather from a `V×d` table; the backward pass scatter-adds.
    pub fn gather(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let t = &self.nodes[table.0].value;
        if t.rank() != 2 {
            return Err(Error::Shape(format!(
                "gather needs a matrix table, got {:?}",
                t.shape()
            )));
        }
        if ids.is_empty() {
            return Err(Error::Index("gather with no ids".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::Index(format!(
                "row {} outside table of {} rows",
                bad,
                t.rows()
            )));
        }
        let d = t.cols();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(t.row_slice(i));
        }
        let value = Tensor::new(vec![ids.len(), d], data)?;
        let rg = self.rg(&[table]);
        Ok(self.push(
            value,
            rg,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Reverse sweep from a scalar `loss`. Gradients accumulate across calls
    /// until [`Graph::zero_grads`].
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::ones(self.shape(loss)));

        for i in (0..=loss.0).rev() {
            let g = match grads[i].take() {
                Some(g) if self.nodes[i].requires_grad => g,
                _ => continue,
            };
            self.propagate(i, &g, &mut grads);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&g),
                None => node.grad = Some(g),
            }
        }
        // every tracked node reachable from the loss gets a grad, even if zero
        let mut reachable = vec![false; loss.0 + 1];
        reachable[loss.0] = true;
        for i in (0..=loss.0).rev() {
            if !reachable[i] {
                continue;
            }
            for input in self.inputs(i) {
                reachable[input.0] = true;
            }
            let node = &mut self.nodes[i];
            if node.requires_grad && node.grad.is_none() {
                node.grad = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(())
    }

    fn inputs(&self, i: usize) -> Vec<NodeId> {
        match &self.nodes[i].op {
            Op::Input | Op::Param => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => vec![*a, *b],
            Op::Scale(a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::ScalarMul(a, _)
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::LeakyRelu(a, _)
            | Op::Sum(a) => vec![*a],
            Op::Concat { parts, .. } => parts.clone(),
            Op::Slice { x, .. } | Op::Softmax { x, .. } | Op::SumAxis { x, .. } => vec![*x],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::Gather { table, .. } => vec![*table],
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let nodes = &self.nodes;
        let y = &nodes[i].value;
        let mut acc = |id: NodeId, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[id.0].requires_grad {
                return;
            }
            let slot = grads[id.0].get_or_insert_with(|| Tensor::zeros(nodes[id.0].value.shape()));
            f(slot.data_mut());
        };
        let gd = g.data();
        match &nodes[i].op {
            Op::Input | Op::Param => {}
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, gd));
                acc(*b, &mut |gb| add_into(gb, gd));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| add_into(ga, gd));
                acc(*b, &mut |gb| gb.iter_mut().zip(gd).for_each(|(x, g)| *x -= g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                acc(*a, &mut |ga| {
                    for k in 0..ga.len() {
                        ga[k] += gd[k] * vb[k];
                    }
                });
                acc(*b, &mut |gb| {
                    for k in 0..gb.len() {
                        gb[k] += gd[k] * va[k];
                    }
                });
            }
            Op::AddRow(a, row) => {
                acc(*a, &mut |ga| add_into(ga, gd));
                acc(*row, &mut |gr| {
                    let cols = gr.len();
                    for chunk in gd.chunks(cols) {
                        add_into(gr, chunk);
                    }
                });
            }
            Op::ScalarMul(a, c) => {
                acc(*a, &mut |ga| ga.iter_mut().zip(gd).for_each(|(x, g)| *x += c * g));
            }
            Op::Scale(x, s) => {
                let c = nodes[s.0].value.data()[0];
                let vx = nodes[x.0].value.data();
                acc(*x, &mut |gx| gx.iter_mut().zip(gd).for_each(|(v, g)| *v += c * g));
                acc(*s, &mut |gs| gs[0] += gd.iter().zip(vx).map(|(g, v)| g * v).sum::<f64>());
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                acc(*a, &mut |ga| matmul_nt_into(gd, vb.data(), ga, m, n, k));
                acc(*b, &mut |gb| matmul_tn_into(va.data(), gd, gb, m, k, n));
            }
            Op::Transpose(a) => {
                let gt = g.transpose();
                acc(*a, &mut |ga| add_into(ga, gt.data()));
            }
            Op::Concat { parts, axis } => {
                let (outer, _, inner) = axis_extents(y.shape(), *axis);
                let total = y.shape()[*axis] * inner;
                let mut offset = 0;
                for &p in parts {
                    let chunk = nodes[p.0].value.shape()[*axis] * inner;
                    acc(p, &mut |gp| {
                        for o in 0..outer {
                            let src = &gd[o * total + offset..o * total + offset + chunk];
                            add_into(&mut gp[o * chunk..(o + 1) * chunk], src);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Slice { x, axis, start } => {
                let shape = nodes[x.0].value.shape();
                let (outer, n, inner) = axis_extents(shape, *axis);
                let len = y.shape()[*axis];
                acc(*x, &mut |gx| {
                    for o in 0..outer {
                        let base = o * n * inner + start * inner;
                        let src = &gd[o * len * inner..(o + 1) * len * inner];
                        add_into(&mut gx[base..base + len * inner], src);
                    }
                });
            }
            Op::Reshape(x) => acc(*x, &mut |gx| add_into(gx, gd)),
            Op::Sigmoid(x) => {
                let yd = y.data();
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        gx[k] += gd[k] * yd[k] * (1.0 - yd[k]);
                    }
                });
            }
            Op::Tanh(x) => {
                let yd = y.data();
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        gx[k] += gd[k] * (1.0 - yd[k] * yd[k]);
                    }
                });
            }
            Op::LeakyRelu(x, slope) => {
                let xd = nodes[x.0].value.data();
                acc(*x, &mut |gx| {
                    for k in 0..gx.len() {
                        gx[k] += gd[k] * if xd[k] > 0.0 { 1.0 } else { *slope };
                    }
                });
            }
            Op::Softmax { x, axis } => {
                let (outer, n, inner) = axis_extents(y.shape(), *axis);
                let yd = y.data();
                acc(*x, &mut |gx| {
                    for o in 0..outer {
                        for i in 0..inner {
                            let at = |k: usize| (o * n + k) * inner + i;
                            let dot: f64 = (0..n).map(|k| gd[at(k)] * yd[at(k)]).sum();
                            for k in 0..n {
                                gx[at(k)] += yd[at(k)] * (gd[at(k)] - dot);
                            }
                        }
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                gold,
                probs,
                scale,
            } => {
                let c = probs.cols();
                let pd = probs.data();
                let up = gd[0] * scale;
                acc(*logits, &mut |gl| {
                    for (r, &t) in gold.iter().enumerate() {
                        for k in 0..c {
                            let onehot = if k == t { 1.0 } else { 0.0 };
                            gl[r * c + k] += up * (pd[r * c + k] - onehot);
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let up = gd[0];
                acc(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += up));
            }
            Op::SumAxis { x, axis } => {
                let (outer, n, inner) = axis_extents(nodes[x.0].value.shape(), *axis);
                acc(*x, &mut |gx| {
                    for o in 0..outer {
                        for k in 0..n {
                            for i in 0..inner {
                                gx[(o * n + k) * inner + i] += gd[o * inner + i];
                            }
                        }
                    }
                });
            }
            Op::Gather { table, ids } => {
                let d = y.shape()[1];
                acc(*table, &mut |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * d..(id + 1) * d], &gd[r * d..(r + 1) * d]);
                    }
                });
            }
        }
    }

    /// Clears every accumulated gradient on the tape.
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Adds the gradients of parameter leaves into the store.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (&pid, &node) in &self.param_nodes {
            if let Some(g) = &self.nodes[node.0].grad {
                store.get_mut(pid).grad.add_assign(g);
            }
        }
    }

    /// Parameters bound on this tape, with their node ids.
    pub fn bound_params(&self) -> impl Iterator<Item = (ParamId, NodeId)> + '_ {
        self.param_nodes.iter().map(|(&p, &n)| (p, n))
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn softmax_values(v: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, n, inner) = axis_extents(v.shape(), axis);
    let src = v.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * n + k) * inner + i;
            let m = (0..n).map(|k| src[at(k)]).fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return Err(Error::Numeric(
                    "softmax over a slice with every entry at -inf".into(),
                ));
            }
            let mut z = 0.0;
            for k in 0..n {
                let e = (src[at(k)] - m).exp();
                out[at(k)] = e;
                z += e;
            }
            for k in 0..n {
                out[at(k)] /= z;
            }
        }
    }
    Tensor::new(v.shape().to_vec(), out)
}
