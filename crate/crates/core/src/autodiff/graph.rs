//! Tape-style gradient graph.
//!
//! Nodes are appended in evaluation order, so a node's inputs always have
//! smaller indices and the node vector is already topologically sorted.
//! [`Graph::backward`] walks it once in reverse.

use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Exp,
    Log,
    LeakyRelu(f64),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { src: Var, axis: usize, start: usize },
    Unary(Var, Activation),
    Affine { src: Var, scale: f64 },
    Sum(Var),
    Mean(Var),
    LogSumExpRows(Var),
    Diag(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn two_d(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::Shape {
            op,
            lhs: other.to_vec(),
            rhs: vec![0, 0],
        }),
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

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient accumulated by the last [`Graph::backward`], if any.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0].as_ref().map(|g| {
            Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone())
                .expect("gradient matches value shape")
        })
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::Shape {
                op,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    fn zip_with(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        make: Op,
    ) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, make, tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `a + bias`, with `bias` broadcast over every leading index of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let n = self.value(a).cols();
        let sb = self.shape(bias);
        let ok = matches!(sb, [m] if *m == n) || matches!(sb, [1, m] if *m == n);
        if !ok {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: self.shape(a).to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let vb = self.value(bias).data();
        let va = self.value(a);
        let mut data = va.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &b) in row.iter_mut().zip(vb) {
                *x += b;
            }
        }
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let tracked = self.tracked(a) || self.tracked(bias);
        Ok(self.push(value, Op::AddBias(a, bias), tracked))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = two_d("matmul", self.value(a))?;
        let (k2, n) = two_d("matmul", self.value(b))?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), tracked))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = two_d("transpose", self.value(a))?;
        let src = self.value(a).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::new(vec![c, r], out)?, Op::Transpose(a), tracked))
    }

    /// Concatenates 2-D tensors along `axis` (0 = stack rows, 1 = join columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::invalid("concat of nothing"))?;
        let (r0, c0) = two_d("concat", self.value(first))?;
        let mut rows = 0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = two_d("concat", self.value(p))?;
            let conform = if axis == 0 { c == c0 } else { r == r0 };
            if !conform || axis > 1 {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: self.shape(first).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            rows += r;
            cols += c;
        }
        let out = if axis == 0 {
            let mut out = Vec::with_capacity(rows * c0);
            for &p in parts {
                out.extend_from_slice(self.value(p).data());
            }
            Tensor::new(vec![rows, c0], out)?
        } else {
            let mut out = Vec::with_capacity(r0 * cols);
            for i in 0..r0 {
                for &p in parts {
                    out.extend_from_slice(self.value(p).row_slice(i));
                }
            }
            Tensor::new(vec![r0, cols], out)?
        };
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            tracked,
        ))
    }

    /// `len` rows (axis 0) or columns (axis 1) of a 2-D tensor starting at `start`.
    pub fn slice(&mut self, src: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let (r, c) = two_d("slice", self.value(src))?;
        let extent = if axis == 0 { r } else { c };
        if axis > 1 || len == 0 || start + len > extent {
            return Err(Error::Shape {
                op: "slice",
                lhs: self.shape(src).to_vec(),
                rhs: vec![start, len],
            });
        }
        let v = self.value(src);
        let out = if axis == 0 {
            Tensor::new(
                vec![len, c],
                v.data()[start * c..(start + len) * c].to_vec(),
            )?
        } else {
            let mut out = Vec::with_capacity(r * len);
            for i in 0..r {
                out.extend_from_slice(&v.row_slice(i)[start..start + len]);
            }
            Tensor::new(vec![r, len], out)?
        };
        let tracked = self.tracked(src);
        Ok(self.push(out, Op::Slice { src, axis, start }, tracked))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Result<Var> {
        let v = self.value(a);
        if kind == Activation::Log {
            if let Some(index) = v.data().iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Domain {
                    op: "log",
                    index,
                    value: v.data()[index],
                });
            }
        }
        let f: fn(f64, f64) -> f64 = match kind {
            Activation::Sigmoid => |x, _| 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => |x, _| x.tanh(),
            Activation::Exp => |x, _| x.exp(),
            Activation::Log => |x, _| x.ln(),
            Activation::LeakyRelu(_) => |x, s| if x > 0.0 { x } else { s * x },
        };
        let slope = match kind {
            Activation::LeakyRelu(s) => s,
            _ => 0.0,
        };
        let data = v.data().iter().map(|&x| f(x, slope)).collect();
        let value = Tensor::new(v.shape().to_vec(), data)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Unary(a, kind), tracked))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activation(a, Activation::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.activation(a, Activation::Exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.activation(a, Activation::Log)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.activation(a, Activation::LeakyRelu(slope))
    }

    /// `scale * a + shift`, elementwise.
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(a);
        let data = v.data().iter().map(|&x| scale * x + shift).collect();
        let value = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let tracked = self.tracked(a);
        self.push(value, Op::Affine { src: a, scale }, tracked)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.affine(a, c, 0.0)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a).expect("same shape")
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.numel() as f64;
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Mean(a), tracked)
    }

    /// Row-wise `log(sum(exp(row)))` as an `m x 1` column, max-shifted.
    pub fn logsumexp_rows(&mut self, a: Var) -> Result<Var> {
        let (m, _) = two_d("logsumexp_rows", self.value(a))?;
        let v = self.value(a);
        let out = (0..m)
            .map(|i| {
                let row = v.row_slice(i);
                let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                mx + row.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
            })
            .collect();
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::new(vec![m, 1], out)?, Op::LogSumExpRows(a), tracked))
    }

    /// Diagonal of a square matrix as an `n x 1` column.
    pub fn diag(&mut self, a: Var) -> Result<Var> {
        let (r, c) = two_d("diag", self.value(a))?;
        if r != c {
            return Err(Error::Shape {
                op: "diag",
                lhs: vec![r, c],
                rhs: vec![c, r],
            });
        }
        let v = self.value(a);
        let out = (0..r).map(|i| v.at(i, i)).collect();
        let tracked = self.tracked(a);
        Ok(self.push(Tensor::new(vec![r, 1], out)?, Op::Diag(a), tracked))
    }

    /// Reverse pass from a scalar `loss`. Gradients accumulate into any
    /// existing buffers; call [`Graph::zero_grad`] first to start fresh.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        if self.tracked(loss) {
            let seed = self.grads[loss.0].get_or_insert_with(|| vec![0.0]);
            seed[0] += 1.0;
        }

        let nodes = &self.nodes;
        let grads = &mut self.grads;
        for i in (0..=loss.0).rev() {
            if !nodes[i].tracked {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            backprop_node(nodes, grads, i, &g);
            grads[i] = Some(g);
        }

        for (node, grad) in self.nodes.iter().zip(self.grads.iter_mut()) {
            if node.tracked && matches!(node.op, Op::Leaf) && grad.is_none() {
                *grad = Some(vec![0.0; node.value.numel()]);
            }
        }
        Ok(())
    }
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.tracked {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.numel()]))
}

fn backprop_node(nodes: &[Node], grads: &mut [Option<Vec<f64>>], i: usize, g: &[f64]) {
    let out = &nodes[i].value;
    match &nodes[i].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            for v in [*a, *b] {
                if let Some(s) = slot(nodes, grads, v) {
                    s.iter_mut().zip(g).for_each(|(x, gv)| *x += gv);
                }
            }
        }
        Op::Sub(a, b) => {
            if let Some(s) = slot(nodes, grads, *a) {
                s.iter_mut().zip(g).for_each(|(x, gv)| *x += gv);
            }
            if let Some(s) = slot(nodes, grads, *b) {
                s.iter_mut().zip(g).for_each(|(x, gv)| *x -= gv);
            }
        }
        Op::Mul(a, b) => {
            let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
            if let Some(s) = slot(nodes, grads, *a) {
                for ((x, gv), y) in s.iter_mut().zip(g).zip(vb) {
                    *x += gv * y;
                }
            }
            if let Some(s) = slot(nodes, grads, *b) {
                for ((x, gv), y) in s.iter_mut().zip(g).zip(va) {
                    *x += gv * y;
                }
            }
        }
        Op::AddBias(a, bias) => {
            if let Some(s) = slot(nodes, grads, *a) {
                s.iter_mut().zip(g).for_each(|(x, gv)| *x += gv);
            }
            let n = out.cols();
            if let Some(s) = slot(nodes, grads, *bias) {
                for row in g.chunks(n) {
                    s.iter_mut().zip(row).for_each(|(x, gv)| *x += gv);
                }
            }
        }
        Op::MatMul(a, b) => {
            let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (m, k) = (va.rows(), va.cols());
            let n = vb.cols();
            if let Some(s) = slot(nodes, grads, *a) {
                matmul_nt_acc(g, vb.data(), s, m, k, n);
            }
            if let Some(s) = slot(nodes, grads, *b) {
                matmul_tn_acc(va.data(), g, s, m, k, n);
            }
        }
        Op::Transpose(a) => {
            if let Some(s) = slot(nodes, grads, *a) {
                // out is c x r, input r x c
                let (c, r) = (out.rows(), out.cols());
                for j in 0..c {
                    for i2 in 0..r {
                        s[i2 * c + j] += g[j * r + i2];
                    }
                }
            }
        }
        Op::Concat { parts, axis } => {
            if *axis == 0 {
                let mut offset = 0;
                for &p in parts {
                    let n = nodes[p.0].value.numel();
                    if let Some(s) = slot(nodes, grads, p) {
                        s.iter_mut()
                            .zip(&g[offset..offset + n])
                            .for_each(|(x, gv)| *x += gv);
                    }
                    offset += n;
                }
            } else {
                let total = out.cols();
                let mut col = 0;
                for &p in parts {
                    let c = nodes[p.0].value.cols();
                    if let Some(s) = slot(nodes, grads, p) {
                        for (r, srow) in s.chunks_mut(c).enumerate() {
                            let grow = &g[r * total + col..r * total + col + c];
                            srow.iter_mut().zip(grow).for_each(|(x, gv)| *x += gv);
                        }
                    }
                    col += c;
                }
            }
        }
        Op::Slice { src, axis, start } => {
            let src_cols = nodes[src.0].value.cols();
            if let Some(s) = slot(nodes, grads, *src) {
                if *axis == 0 {
                    let off = start * src_cols;
                    s[off..off + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(x, gv)| *x += gv);
                } else {
                    let len = out.cols();
                    for (r, grow) in g.chunks(len).enumerate() {
                        let off = r * src_cols + start;
                        s[off..off + len]
                            .iter_mut()
                            .zip(grow)
                            .for_each(|(x, gv)| *x += gv);
                    }
                }
            }
        }
        Op::Unary(a, kind) => {
            let x = nodes[a.0].value.data();
            let y = out.data();
            if let Some(s) = slot(nodes, grads, *a) {
                for idx in 0..s.len() {
                    let d = match kind {
                        Activation::Sigmoid => y[idx] * (1.0 - y[idx]),
                        Activation::Tanh => 1.0 - y[idx] * y[idx],
                        Activation::Exp => y[idx],
                        Activation::Log => 1.0 / x[idx],
                        Activation::LeakyRelu(slope) => {
                            if x[idx] > 0.0 {
                                1.0
                            } else {
                                *slope
                            }
                        }
                    };
                    s[idx] += g[idx] * d;
                }
            }
        }
        Op::Affine { src, scale } => {
            if let Some(s) = slot(nodes, grads, *src) {
                s.iter_mut().zip(g).for_each(|(x, gv)| *x += scale * gv);
            }
        }
        Op::Sum(a) => {
            if let Some(s) = slot(nodes, grads, *a) {
                s.iter_mut().for_each(|x| *x += g[0]);
            }
        }
        Op::Mean(a) => {
            if let Some(s) = slot(nodes, grads, *a) {
                let w = g[0] / s.len() as f64;
                s.iter_mut().for_each(|x| *x += w);
            }
        }
        Op::LogSumExpRows(a) => {
            let v = &nodes[a.0].value;
            let n = v.cols();
            if let Some(s) = slot(nodes, grads, *a) {
                for (r, srow) in s.chunks_mut(n).enumerate() {
                    let lse = out.data()[r];
                    for (x, &val) in srow.iter_mut().zip(v.row_slice(r)) {
                        *x += g[r] * (val - lse).exp();
                    }
                }
            }
        }
        Op::Diag(a) => {
            let n = out.rows();
            if let Some(s) = slot(nodes, grads, *a) {
                for r in 0..n {
                    s[r * n + r] += g[r];
                }
            }
        }
    }
}
