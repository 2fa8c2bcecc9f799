//! Eager tape-based reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records every operation as it is executed, so building a
//! forward pass and running it are the same thing. [`Graph::backward`]
//! then sweeps the tape in reverse and accumulates gradients; leaves
//! registered through [`Graph::param`] remember which [`ParameterSet`]
//! entry they came from so the result can be pushed back with
//! [`Graph::apply_param_grads`].
//!
//! All values are rank-2 row-major f64 matrices; vectors are `[1, n]`
//! rows. The op set is deliberately small: exactly what the models and
//! loss need.

use crate::error::{CoreError, Result};
use crate::params::ParameterSet;
use crate::tensor::Tensor;

/// Inputs to `log` are clamped to this floor so saturated softmax
/// outputs cannot produce -inf.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<String> },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MaxElem(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Relu(NodeId),
    Concat(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    Softmax(NodeId),
    SumAll(NodeId),
    Reshape(NodeId),
}

struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Vec<f64>,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    ran_backward: bool,
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::with_capacity(256),
            ran_backward: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            grad: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = self.node(id);
        (n.rows, n.cols)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.node(id).value
    }

    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        let n = self.node(id);
        if n.value.len() != 1 {
            return Err(CoreError::shape(
                "scalar",
                format!("node has shape [{}, {}], expected [1, 1]", n.rows, n.cols),
            ));
        }
        Ok(n.value[0])
    }

    /// Gradient of the last `backward` output w.r.t. this node.
    pub fn grad(&self, id: NodeId) -> Result<&[f64]> {
        if !self.ran_backward {
            return Err(CoreError::usage("gradient requested before backward was run"));
        }
        Ok(&self.node(id).grad)
    }

    // ── Leaves ──────────────────────────────────────────────────────

    pub fn input(&mut self, t: &Tensor) -> Result<NodeId> {
        let (rows, cols) = t.dims2()?;
        Ok(self.push(Op::Leaf { param: None }, rows, cols, t.values().to_vec()))
    }

    pub fn constant(&mut self, rows: usize, cols: usize, v: f64) -> NodeId {
        self.push(Op::Leaf { param: None }, rows, cols, vec![v; rows * cols])
    }

    /// Leaf tied to a named parameter; its gradient can later be pushed
    /// back into the owning [`ParameterSet`].
    pub fn param(&mut self, params: &ParameterSet, name: &str) -> Result<NodeId> {
        let p = params.get(name)?;
        let (rows, cols) = p.value.dims2()?;
        Ok(self.push(
            Op::Leaf {
                param: Some(name.to_string()),
            },
            rows,
            cols,
            p.value.values().to_vec(),
        ))
    }

    // ── Operations ──────────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, ka) = self.shape(a);
        let (kb, n) = self.shape(b);
        if ka != kb {
            return Err(CoreError::shape(
                "matmul",
                format!("[{m}, {ka}] x [{kb}, {n}]: inner extents differ"),
            ));
        }
        let mut out = vec![0.0; m * n];
        {
            let av = &self.node(a).value;
            let bv = &self.node(b).value;
            for i in 0..m {
                for p in 0..ka {
                    let x = av[i * ka + p];
                    if x == 0.0 {
                        continue;
                    }
                    let brow = &bv[p * n..(p + 1) * n];
                    let crow = &mut out[i * n..(i + 1) * n];
                    for j in 0..n {
                        crow[j] += x * brow[j];
                    }
                }
            }
        }
        Ok(self.push(Op::MatMul(a, b), m, n, out))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(CoreError::shape(
                op,
                format!("[{}, {}] vs [{}, {}]", sa.0, sa.1, sb.0, sb.1),
            ));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("add", a, b)?;
        let v: Vec<f64> = self
            .node(a)
            .value
            .iter()
            .zip(&self.node(b).value)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Op::Add(a, b), r, c, v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("sub", a, b)?;
        let v: Vec<f64> = self
            .node(a)
            .value
            .iter()
            .zip(&self.node(b).value)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(Op::Sub(a, b), r, c, v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let v: Vec<f64> = self
            .node(a)
            .value
            .iter()
            .zip(&self.node(b).value)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Op::Mul(a, b), r, c, v))
    }

    /// Elementwise maximum. Ties go to the right operand, so
    /// `max_elem(x, zeros)` has zero gradient at `x == 0`.
    pub fn max_elem(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.same_shape("max", a, b)?;
        let v: Vec<f64> = self
            .node(a)
            .value
            .iter()
            .zip(&self.node(b).value)
            .map(|(x, y)| if x > y { *x } else { *y })
            .collect();
        Ok(self.push(Op::MaxElem(a, b), r, c, v))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.node(a).value.iter().map(|x| k * x).collect();
        self.push(Op::Scale(a, k), r, c, v)
    }

    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.node(a).value.iter().map(|x| x + k).collect();
        self.push(Op::AddScalar(a), r, c, v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.node(a).value.iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh(a), r, c, v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self
            .node(a)
            .value
            .iter()
            .map(|x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        self.push(Op::Sigmoid(a), r, c, v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.node(a).value.iter().map(|x| x.exp()).collect();
        self.push(Op::Exp(a), r, c, v)
    }

    /// `ln(max(x, LOG_CLAMP))`; the clamp keeps saturated probabilities
    /// from producing -inf.
    pub fn log(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self
            .node(a)
            .value
            .iter()
            .map(|x| x.max(LOG_CLAMP).ln())
            .collect();
        self.push(Op::Log(a), r, c, v)
    }

    /// `max(x, 0)` with zero gradient at `x <= 0`.
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let (r, c) = self.shape(a);
        let v: Vec<f64> = self.node(a).value.iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu(a), r, c, v)
    }

    /// Concatenates along columns; all inputs must share a row count.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(CoreError::usage("concat of zero nodes"));
        }
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(CoreError::shape(
                    "concat",
                    format!("row counts differ: {rows} vs {r}"),
                ));
            }
            cols += c;
        }
        let mut v = vec![0.0; rows * cols];
        let mut at = 0;
        for &p in parts {
            let (_, c) = self.shape(p);
            let pv = &self.node(p).value;
            for i in 0..rows {
                v[i * cols + at..i * cols + at + c].copy_from_slice(&pv[i * c..(i + 1) * c]);
            }
            at += c;
        }
        Ok(self.push(Op::Concat(parts.to_vec()), rows, cols, v))
    }

    /// Columns `start..end`, all rows.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let (rows, cols) = self.shape(a);
        if start >= end || end > cols {
            return Err(CoreError::shape(
                "slice",
                format!("range {start}..{end} out of 0..{cols}"),
            ));
        }
        let w = end - start;
        let av = &self.node(a).value;
        let mut v = vec![0.0; rows * w];
        for i in 0..rows {
            v[i * w..(i + 1) * w].copy_from_slice(&av[i * cols + start..i * cols + end]);
        }
        Ok(self.push(Op::SliceCols(a, start, end), rows, w, v))
    }

    /// Row-wise softmax over the last axis, max-shifted for stability.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let (rows, cols) = self.shape(a);
        let av = &self.node(a).value;
        let mut v = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = &av[i * cols..(i + 1) * cols];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..cols {
                let e = (row[j] - m).exp();
                v[i * cols + j] = e;
                sum += e;
            }
            for j in 0..cols {
                v[i * cols + j] /= sum;
            }
        }
        self.push(Op::Softmax(a), rows, cols, v)
    }

    /// Sum of every entry, as a `[1, 1]` scalar.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.node(a).value.iter().sum();
        self.push(Op::SumAll(a), 1, 1, vec![s])
    }

    pub fn reshape(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let (r, c) = self.shape(a);
        if r * c != rows * cols {
            return Err(CoreError::shape(
                "reshape",
                format!("[{r}, {c}] cannot become [{rows}, {cols}]"),
            ));
        }
        let v = self.node(a).value.clone();
        Ok(self.push(Op::Reshape(a), rows, cols, v))
    }

    // ── Composites used all over the model/loss code ────────────────

    /// Maximum entry of a single-row node, as a scalar. The reduction
    /// is a fold of elementwise max over column slices, so the gradient
    /// routes to the selected entry.
    pub fn max_over_cols(&mut self, a: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.shape(a);
        if rows != 1 || cols == 0 {
            return Err(CoreError::shape(
                "max_over_cols",
                format!("expected [1, n>0], got [{rows}, {cols}]"),
            ));
        }
        let mut acc = self.slice_cols(a, 0, 1)?;
        for j in 1..cols {
            let s = self.slice_cols(a, j, j + 1)?;
            acc = self.max_elem(acc, s)?;
        }
        Ok(acc)
    }

    /// |x| as `max(x, -x)`.
    pub fn abs(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.scale(a, -1.0);
        self.max_elem(a, n)
    }

    /// Errors if the node holds any non-finite value.
    pub fn ensure_finite(&self, id: NodeId, context: &str) -> Result<()> {
        let n = self.node(id);
        if let Some(i) = n.value.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite {
                context: context.to_string(),
                coordinate: Some(format!("entry {i}")),
            });
        }
        Ok(())
    }

    // ── Backward ────────────────────────────────────────────────────

    /// Backpropagates from a scalar output with seed 1.
    pub fn backward_scalar(&mut self, out: NodeId) -> Result<()> {
        self.backward(out, &[1.0])
    }

    /// Backpropagates an explicit seed gradient from `out` to every
    /// reachable node. Unreachable nodes keep a zero gradient.
    pub fn backward(&mut self, out: NodeId, seed: &[f64]) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(CoreError::usage("backward on an empty graph: run a forward pass first"));
        }
        if out.0 >= self.nodes.len() {
            return Err(CoreError::usage(format!("backward from unknown node {}", out.0)));
        }
        let out_len = self.nodes[out.0].value.len();
        if seed.len() != out_len {
            return Err(CoreError::shape(
                "backward",
                format!("seed has {} values, output has {out_len}", seed.len()),
            ));
        }

        for n in &mut self.nodes {
            n.grad.clear();
            n.grad.resize(n.value.len(), 0.0);
        }
        self.nodes[out.0].grad.copy_from_slice(seed);

        for i in (0..=out.0).rev() {
            // Split borrows: read this node, write its inputs (ids < i).
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            if node.grad.iter().all(|g| *g == 0.0) {
                continue;
            }
            let go = &node.grad;
            match &node.op {
                Op::Leaf { .. } => {}
                Op::MatMul(a, b) => {
                    let m = node.rows;
                    let n = node.cols;
                    let k = before[a.0].cols;
                    // da[i,p] += sum_j go[i,j] * b[p,j]
                    // db[p,j] += sum_i a[i,p] * go[i,j]
                    if a.0 == b.0 {
                        // square self-product; handled for completeness
                        let av = before[a.0].value.clone();
                        let ga = &mut before[a.0].grad;
                        for ii in 0..m {
                            for p in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += go[ii * n + j] * av[p * n + j];
                                }
                                ga[ii * k + p] += s;
                            }
                        }
                        for p in 0..k {
                            for j in 0..n {
                                let mut s = 0.0;
                                for ii in 0..m {
                                    s += av[ii * k + p] * go[ii * n + j];
                                }
                                ga[p * n + j] += s;
                            }
                        }
                    } else {
                        let (lo, hi) = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
                        let (left, right) = before.split_at_mut(hi);
                        let (na, nb) = if a.0 < b.0 {
                            (&mut left[lo], &mut right[0])
                        } else {
                            (&mut right[0], &mut left[lo])
                        };
                        for ii in 0..m {
                            for p in 0..k {
                                let mut s = 0.0;
                                let brow = &nb.value[p * n..(p + 1) * n];
                                let grow = &go[ii * n..(ii + 1) * n];
                                for j in 0..n {
                                    s += grow[j] * brow[j];
                                }
                                na.grad[ii * k + p] += s;
                            }
                        }
                        for ii in 0..m {
                            for p in 0..k {
                                let x = na.value[ii * k + p];
                                if x == 0.0 {
                                    continue;
                                }
                                let grow = &go[ii * n..(ii + 1) * n];
                                let brow = &mut nb.grad[p * n..(p + 1) * n];
                                for j in 0..n {
                                    brow[j] += x * grow[j];
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    for (j, g) in go.iter().enumerate() {
                        before[a.0].grad[j] += g;
                    }
                    for (j, g) in go.iter().enumerate() {
                        before[b.0].grad[j] += g;
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    for (j, g) in go.iter().enumerate() {
                        before[a.0].grad[j] += g;
                    }
                    for (j, g) in go.iter().enumerate() {
                        before[b.0].grad[j] -= g;
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    for j in 0..go.len() {
                        let g = go[j];
                        let bv = before[b.0].value[j];
                        before[a.0].grad[j] += g * bv;
                    }
                    for j in 0..go.len() {
                        let g = go[j];
                        let av = before[a.0].value[j];
                        before[b.0].grad[j] += g * av;
                    }
                }
                Op::MaxElem(a, b) => {
                    let (a, b) = (*a, *b);
                    for j in 0..go.len() {
                        let av = before[a.0].value[j];
                        let bv = before[b.0].value[j];
                        if av > bv {
                            before[a.0].grad[j] += go[j];
                        } else {
                            before[b.0].grad[j] += go[j];
                        }
                    }
                }
                Op::Scale(a, kf) => {
                    let (a, kf) = (*a, *kf);
                    for (j, g) in go.iter().enumerate() {
                        before[a.0].grad[j] += kf * g;
                    }
                }
                Op::AddScalar(a) => {
                    let a = *a;
                    for (j, g) in go.iter().enumerate() {
                        before[a.0].grad[j] += g;
                    }
                }
                Op::Tanh(a) => {
                    let a = *a;
                    for j in 0..go.len() {
                        let t = node.value[j];
                        before[a.0].grad[j] += go[j] * (1.0 - t * t);
                    }
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    for j in 0..go.len() {
                        let s = node.value[j];
                        before[a.0].grad[j] += go[j] * s * (1.0 - s);
                    }
                }
                Op::Exp(a) => {
                    let a = *a;
                    for j in 0..go.len() {
                        before[a.0].grad[j] += go[j] * node.value[j];
                    }
                }
                Op::Log(a) => {
                    let a = *a;
                    for j in 0..go.len() {
                        let x = before[a.0].value[j];
                        if x >= LOG_CLAMP {
                            before[a.0].grad[j] += go[j] / x;
                        }
                    }
                }
                Op::Relu(a) => {
                    let a = *a;
                    for j in 0..go.len() {
                        if before[a.0].value[j] > 0.0 {
                            before[a.0].grad[j] += go[j];
                        }
                    }
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let rows = node.rows;
                    let cols = node.cols;
                    let mut at = 0;
                    for p in parts {
                        let c = before[p.0].cols;
                        for r in 0..rows {
                            for j in 0..c {
                                before[p.0].grad[r * c + j] += go[r * cols + at + j];
                            }
                        }
                        at += c;
                    }
                }
                Op::SliceCols(a, start, _end) => {
                    let (a, start) = (*a, *start);
                    let rows = node.rows;
                    let w = node.cols;
                    let ac = before[a.0].cols;
                    for r in 0..rows {
                        for j in 0..w {
                            before[a.0].grad[r * ac + start + j] += go[r * w + j];
                        }
                    }
                }
                Op::Softmax(a) => {
                    let a = *a;
                    let rows = node.rows;
                    let cols = node.cols;
                    for r in 0..rows {
                        let p = &node.value[r * cols..(r + 1) * cols];
                        let gp = &go[r * cols..(r + 1) * cols];
                        let dot: f64 = p.iter().zip(gp).map(|(pi, gi)| pi * gi).sum();
                        for j in 0..cols {
                            before[a.0].grad[r * cols + j] += p[j] * (gp[j] - dot);
                        }
                    }
                }
                Op::SumAll(a) => {
                    let a = *a;
                    let g = go[0];
                    for slot in before[a.0].grad.iter_mut() {
                        *slot += g;
                    }
                }
                Op::Reshape(a) => {
                    let a = *a;
                    for (j, g) in go.iter().enumerate() {
                        before[a.0].grad[j] += g;
                    }
                }
            }
        }
        self.ran_backward = true;
        Ok(())
    }

    /// Adds `scale` times each parameter leaf's gradient into the set's
    /// accumulators. Parameters never touched by this graph are left alone.
    pub fn apply_param_grads(&self, params: &mut ParameterSet, scale: f64) -> Result<()> {
        if !self.ran_backward {
            return Err(CoreError::usage("apply_param_grads before backward"));
        }
        for n in &self.nodes {
            if let Op::Leaf { param: Some(name) } = &n.op {
                params.accumulate_grad(name, &n.grad, scale)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(g: &mut Graph, v: &[f64]) -> NodeId {
        g.input(&Tensor::row(v)).unwrap()
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new();
        let z = row(&mut g, &[0.0; 5]);
        let p = g.softmax(z);
        for v in g.value(p) {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let s: f64 = g.value(p).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut g = Graph::new();
        let z = row(&mut g, &[0.0]);
        let s = g.sigmoid(z);
        assert_eq!(g.value(s), &[0.5]);
    }

    #[test]
    fn matmul_zero_times_ones_is_zero() {
        let mut g = Graph::new();
        let a = g.input(&Tensor::zeros(vec![2, 3])).unwrap();
        let b = g.input(&Tensor::new(vec![3, 1], vec![1.0; 3]).unwrap()).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.shape(c), (2, 1));
        assert_eq!(g.value(c), &[0.0, 0.0]);
    }

    #[test]
    fn matmul_rejects_bad_inner_extent() {
        let mut g = Graph::new();
        let a = g.input(&Tensor::zeros(vec![2, 3])).unwrap();
        let b = g.input(&Tensor::zeros(vec![2, 4])).unwrap();
        let err = g.matmul(a, b).unwrap_err();
        assert!(err.to_string().contains("matmul"));
    }

    #[test]
    fn square_gradient() {
        // loss = x^2 at x = 3 -> d/dx = 6
        let mut g = Graph::new();
        let x = row(&mut g, &[3.0]);
        let y = g.mul(x, x).unwrap();
        g.backward_scalar(y).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn softmax_cross_entropy_gradient() {
        // loss = -log(softmax(z)[j]) at z = 0 -> grad = p - onehot(j)
        let mut g = Graph::new();
        let z = row(&mut g, &[0.0; 5]);
        let p = g.softmax(z);
        let pj = g.slice_cols(p, 3, 4).unwrap();
        let lg = g.log(pj);
        let loss = g.scale(lg, -1.0);
        g.backward_scalar(loss).unwrap();
        let grad = g.grad(z).unwrap();
        for (j, gv) in grad.iter().enumerate() {
            let want = if j == 3 { 0.2 - 1.0 } else { 0.2 };
            assert!((gv - want).abs() < 1e-12, "entry {j}: {gv} vs {want}");
        }
    }

    #[test]
    fn grad_before_backward_is_usage_error() {
        let mut g = Graph::new();
        let x = row(&mut g, &[1.0]);
        assert!(g.grad(x).is_err());
    }

    #[test]
    fn backward_seed_shape_checked() {
        let mut g = Graph::new();
        let x = row(&mut g, &[1.0, 2.0]);
        assert!(g.backward(x, &[1.0]).is_err());
    }

    #[test]
    fn max_over_cols_routes_gradient_to_argmax() {
        let mut g = Graph::new();
        let x = row(&mut g, &[0.1, 0.7, 0.2]);
        let m = g.max_over_cols(x).unwrap();
        assert_eq!(g.value(m), &[0.7]);
        g.backward_scalar(m).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn relu_gradient_dead_at_and_below_zero() {
        let mut g = Graph::new();
        let x = row(&mut g, &[-1.0, 0.0, 2.0]);
        let r = g.relu(x);
        let s = g.sum_all(r);
        g.backward_scalar(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn concat_slice_round_trip_gradient() {
        let mut g = Graph::new();
        let a = row(&mut g, &[1.0, 2.0]);
        let b = row(&mut g, &[3.0]);
        let cat = g.concat(&[a, b]).unwrap();
        let sl = g.slice_cols(cat, 1, 3).unwrap();
        let s = g.sum_all(sl);
        g.backward_scalar(s).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[0.0, 1.0]);
        assert_eq!(g.grad(b).unwrap(), &[1.0]);
    }

    #[test]
    fn unreachable_params_get_zero_gradient() {
        let mut params = ParameterSet::new();
        params.insert("used", Tensor::row(&[2.0])).unwrap();
        params.insert("unused", Tensor::row(&[5.0])).unwrap();
        let mut g = Graph::new();
        let u = g.param(&params, "used").unwrap();
        let _lonely = g.param(&params, "unused").unwrap();
        let y = g.mul(u, u).unwrap();
        g.backward_scalar(y).unwrap();
        g.apply_param_grads(&mut params, 1.0).unwrap();
        assert_eq!(params.get("used").unwrap().grad.values(), &[4.0]);
        assert_eq!(params.get("unused").unwrap().grad.values(), &[0.0]);
    }
}
