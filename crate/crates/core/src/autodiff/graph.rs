//! Tape of recorded tensor operations and its reverse sweep.

use std::sync::Arc;

use super::tensor::{matmul_into, Real, Tensor, Trans};
use crate::error::{Error, Result};
use crate::sampling::SparseMatrix;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow { x: Var, bias: Var },
    Scale(Var, T),
    Gather { x: Var, idx: Arc<Vec<i64>> },
    SpiralConv { x: Var, idx: Arc<Vec<i64>>, length: usize, w: Var, b: Var },
    ConcatRows(Vec<Var>),
    SliceRows { x: Var, start: usize },
    SliceCols { x: Var, start: usize },
    Reshape(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Mean(Var),
    L1 { a: Var, b: Var },
    Sparse { x: Var, q: Arc<SparseMatrix>, batch: usize },
    SoftmaxXent { logits: Var, targets: Arc<Vec<usize>> },
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records operations eagerly: every call computes its output immediately
/// and remembers how to propagate gradients back to its inputs.
#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every leaf that required them.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros shaped like `like` when `v` did not
    /// influence the output.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor<T>) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

fn shape_err(msg: String) -> Error {
    Error::Shape(msg)
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; no gradient is tracked.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    /// `a * b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a * b^T`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (br, bc) = self.dims(b);
        let (k2, n) = if trans_b { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(shape_err(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut out = vec![T::zero(); m * n];
        let tb = if trans_b { Trans::Yes } else { Trans::No };
        matmul_into(self.value(a).data(), m, k, Trans::No, self.value(b).data(), br, bc, tb, &mut out, false);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul { a, b, trans_b }, &[a, b]))
    }

    fn zip(&mut self, a: Var, b: Var, name: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(format!("{name} of {:?} and {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "add", |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    /// Adds a `1 x c` bias to every row of an `r x c` matrix.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.dims(x);
        if self.value(bias).len() != c {
            return Err(shape_err(format!("bias of {} for {r}x{c}", self.value(bias).len())));
        }
        let b = self.value(bias).data().to_vec();
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_mut(c) {
            for (o, &bv) in row.iter_mut().zip(&b) {
                *o = *o + bv;
            }
        }
        let shape = self.value(x).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::AddRow { x, bias }, &[x, bias]))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v * s).collect();
        let t = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(t, Op::Scale(x, s), &[x])
    }

    /// Rows `x[idx[j]]`; index `-1` yields a zero row.
    pub fn gather_rows(&mut self, x: Var, idx: Arc<Vec<i64>>) -> Result<Var> {
        let (r, c) = self.dims(x);
        let src = self.value(x).data();
        let mut data = vec![T::zero(); idx.len() * c];
        for (j, &i) in idx.iter().enumerate() {
            if i == -1 {
                continue;
            }
            if i < 0 || i as usize >= r {
                return Err(Error::IndexOutOfRange { index: i, len: r });
            }
            let i = i as usize;
            data[j * c..(j + 1) * c].copy_from_slice(&src[i * c..(i + 1) * c]);
        }
        let n = idx.len();
        Ok(self.push(Tensor::matrix(n, c, data)?, Op::Gather { x, idx }, &[x]))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(shape_err("concat of nothing".into()));
        };
        let c = self.dims(first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &x in xs {
            let (r, cx) = self.dims(x);
            if cx != c {
                return Err(shape_err(format!("concat rows of width {cx} and {c}")));
            }
            data.extend_from_slice(self.value(x).data());
            rows += r;
        }
        Ok(self.push(Tensor::matrix(rows, c, data)?, Op::ConcatRows(xs.to_vec()), xs))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start + len > r {
            return Err(shape_err(format!("rows {start}..{} of {r}", start + len)));
        }
        let data = self.value(x).data()[start * c..(start + len) * c].to_vec();
        Ok(self.push(Tensor::matrix(len, c, data)?, Op::SliceRows { x, start }, &[x]))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start + len > c {
            return Err(shape_err(format!("cols {start}..{} of {c}", start + len)));
        }
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(r * len);
        for row in src.chunks(c) {
            data.extend_from_slice(&row[start..start + len]);
        }
        Ok(self.push(Tensor::matrix(r, len, data)?, Op::SliceCols { x, start }, &[x]))
    }

    /// Fused `gather -> reshape -> matmul -> add_row`: output row `r` is
    /// `b + sum_j x[idx[r * L + j]] W_j`, where `W` is `(L * d_in) x d_out`
    /// and index `-1` contributes nothing.
    ///
    /// Computes `P = x [W_0 | .. | W_{L-1}]` once and sums gathered blocks of
    /// `P`, so the `(rows x L * d_in)` gathered matrix is never built.
    pub fn spiral_conv(&mut self, x: Var, idx: Arc<Vec<i64>>, length: usize, w: Var, b: Var) -> Result<Var> {
        let (r, d_in) = self.dims(x);
        let (wr, d_out) = self.dims(w);
        if length == 0 || idx.len() % length != 0 || wr != length * d_in || self.value(b).len() != d_out {
            return Err(shape_err(format!(
                "spiral conv: {} indices, L = {length}, x {r}x{d_in}, w {wr}x{d_out}, b {}",
                idx.len(),
                self.value(b).len()
            )));
        }
        if let Some(&i) = idx.iter().find(|&&i| i < -1 || i >= r as i64) {
            return Err(Error::IndexOutOfRange { index: i, len: r });
        }
        let wide = d_out * length;
        let p = self.spiral_project(x, w, length);
        let bias = self.value(b).data();
        let rows = idx.len() / length;
        let mut out = Vec::with_capacity(rows * d_out);
        for nb in idx.chunks(length) {
            let start = out.len();
            out.extend_from_slice(bias);
            let o = &mut out[start..];
            for (j, &i) in nb.iter().enumerate() {
                if i >= 0 {
                    let src = &p[i as usize * wide + j * d_out..][..d_out];
                    for (a, &v) in o.iter_mut().zip(src) {
                        *a = *a + v;
                    }
                }
            }
        }
        Ok(self.push(Tensor::matrix(rows, d_out, out)?, Op::SpiralConv { x, idx, length, w, b }, &[x, w, b]))
    }

    /// `x [W_0 | .. | W_{L-1}]`, `rows x (L * d_out)`.
    fn spiral_project(&self, x: Var, w: Var, length: usize) -> Vec<T> {
        let (r, d_in) = self.dims(x);
        let d_out = self.dims(w).1;
        let wide = spiral_wide_weights(self.value(w).data(), length, d_in, d_out);
        let mut p = vec![T::zero(); r * length * d_out];
        matmul_into(self.value(x).data(), r, d_in, Trans::No, &wide, d_in, length * d_out, Trans::No, &mut p, false);
        p
    }

    /// Side of every non-differentiable point the tape passed: one flag per
    /// ReLU input (`> 0`) and two per L1 pair (`a > b`, `a < b`). Two
    /// evaluations with equal patterns lie on the same smooth piece.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for n in &self.nodes {
            match &n.op {
                Op::Relu(x) => out.extend(self.value(*x).data().iter().map(|&v| v > T::zero())),
                Op::L1 { a, b } => {
                    for (&x, &y) in self.value(*a).data().iter().zip(self.value(*b).data()) {
                        out.push(x > y);
                        out.push(x < y);
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(x), &[x]))
    }

    fn map(&mut self, x: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let t = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(t, op, &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, Op::Relu(x), |v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid(x), |v| T::one() / (T::one() + (-v).exp()))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x), |v| v.tanh())
    }

    /// Mean of all elements, as a `1 x 1` tensor.
    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let n = T::from_usize(t.len()).unwrap();
        let s = t.data().iter().copied().sum::<T>() / n;
        self.push(Tensor::scalar(s), Op::Mean(x), &[x])
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.zip(a, b, "l1_loss", |x, y| (x - y).abs())?;
        let n = T::from_usize(d.len()).unwrap();
        let s = d.data().iter().copied().sum::<T>() / n;
        Ok(self.push(Tensor::scalar(s), Op::L1 { a, b }, &[a, b]))
    }

    /// Applies a sparse `rows x cols` matrix to each of `batch` stacked
    /// blocks of `cols` rows.
    pub fn sparse_matmul(&mut self, x: Var, q: Arc<SparseMatrix>, batch: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if r != q.cols() * batch {
            return Err(shape_err(format!(
                "sparse {}x{} on {batch} blocks of {r} rows",
                q.rows(),
                q.cols()
            )));
        }
        let mut out = vec![T::zero(); q.rows() * batch * c];
        q.apply(self.value(x).data(), c, batch, &mut out);
        let rows = q.rows() * batch;
        Ok(self.push(Tensor::matrix(rows, c, out)?, Op::Sparse { x, q, batch }, &[x]))
    }

    /// Mean softmax cross-entropy of each logits row against its class.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: Arc<Vec<usize>>) -> Result<Var> {
        let (r, c) = self.dims(logits);
        if targets.len() != r || targets.iter().any(|&t| t >= c) {
            return Err(shape_err(format!("{} targets for {r}x{c} logits", targets.len())));
        }
        let probs = softmax_rows(self.value(logits).data(), c);
        let mut loss = T::zero();
        for (row, &t) in targets.iter().enumerate() {
            loss = loss - probs[row * c + t].max(T::min_positive_value()).ln();
        }
        loss = loss / T::from_usize(r).unwrap();
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxXent { logits, targets }, &[logits]))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, out: Var) -> Result<Gradients<T>> {
        if self.value(out).len() != 1 {
            return Err(shape_err(format!(
                "backward from non-scalar {:?}",
                self.value(out).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Tensor::full(self.value(out).shape(), T::one()));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Op::Reshape(x) = node.op {
                // hand the buffer straight to the input
                if self.nodes[x.0].requires_grad && grads[x.0].is_none() {
                    grads[x.0] = Some(g.reshaped(self.value(x).shape())?);
                    continue;
                }
            }
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            // only leaves keep their gradient
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.nodes[v.0].value.shape()));
        }
        f(slot.as_mut().unwrap().data_mut());
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b, trans_b } => {
                let (m, k) = self.dims(*a);
                let (br, bc) = self.dims(*b);
                let n = node.value.cols();
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                // dA = dC op(B)^T
                let tb = if *trans_b { Trans::No } else { Trans::Yes };
                self.accumulate(grads, *a, |ga| matmul_into(gd, m, n, Trans::No, bv, br, bc, tb, ga, true));
                if *trans_b {
                    // B is n x k: dB = dC^T A
                    self.accumulate(grads, *b, |gb| matmul_into(gd, m, n, Trans::Yes, av, m, k, Trans::No, gb, true));
                } else {
                    // B is k x n: dB = A^T dC
                    self.accumulate(grads, *b, |gb| matmul_into(av, m, k, Trans::Yes, gd, m, n, Trans::No, gb, true));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| add_into(ga, gd, T::one()));
                self.accumulate(grads, *b, |gb| add_into(gb, gd, T::one()));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| add_into(ga, gd, T::one()));
                self.accumulate(grads, *b, |gb| add_into(gb, gd, -T::one()));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |ga| {
                    for ((o, &gv), &y) in ga.iter_mut().zip(gd).zip(bv) {
                        *o = *o + gv * y;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((o, &gv), &x) in gb.iter_mut().zip(gd).zip(av) {
                        *o = *o + gv * x;
                    }
                });
            }
            Op::AddRow { x, bias } => {
                self.accumulate(grads, *x, |gx| add_into(gx, gd, T::one()));
                let c = node.value.cols();
                self.accumulate(grads, *bias, |gbias| {
                    for row in gd.chunks(c) {
                        add_into(gbias, row, T::one());
                    }
                });
            }
            Op::Scale(x, s) => self.accumulate(grads, *x, |gx| add_into(gx, gd, *s)),
            Op::Gather { x, idx } => {
                let c = node.value.cols();
                self.accumulate(grads, *x, |gx| {
                    for (j, &i) in idx.iter().enumerate() {
                        if i >= 0 {
                            let i = i as usize;
                            add_into(&mut gx[i * c..(i + 1) * c], &gd[j * c..(j + 1) * c], T::one());
                        }
                    }
                });
            }
            Op::SpiralConv { x, idx, length, w, b } => {
                let (r, d_in) = self.dims(*x);
                let d_out = node.value.cols();
                let wide = d_out * length;
                self.accumulate(grads, *b, |gb| {
                    for row in gd.chunks(d_out) {
                        add_into(gb, row, T::one());
                    }
                });
                let needs_x = self.nodes[x.0].requires_grad;
                let needs_w = self.nodes[w.0].requires_grad;
                if !needs_x && !needs_w {
                    return;
                }
                // dP: scatter each output row's gradient into its gathered blocks
                let mut dp = vec![T::zero(); r * wide];
                for (nb, grow) in idx.chunks(*length).zip(gd.chunks(d_out)) {
                    for (j, &i) in nb.iter().enumerate() {
                        if i >= 0 {
                            add_into(&mut dp[i as usize * wide + j * d_out..][..d_out], grow, T::one());
                        }
                    }
                }
                if needs_x {
                    let wv = spiral_wide_weights(self.value(*w).data(), *length, d_in, d_out);
                    self.accumulate(grads, *x, |gx| matmul_into(&dp, r, wide, Trans::No, &wv, d_in, wide, Trans::Yes, gx, true));
                }
                if needs_w {
                    let mut dwide = vec![T::zero(); d_in * wide];
                    matmul_into(self.value(*x).data(), r, d_in, Trans::Yes, &dp, r, wide, Trans::No, &mut dwide, false);
                    self.accumulate(grads, *w, |gw| {
                        for c in 0..d_in {
                            for j in 0..*length {
                                let src = &dwide[c * wide + j * d_out..][..d_out];
                                add_into(&mut gw[(j * d_in + c) * d_out..][..d_out], src, T::one());
                            }
                        }
                    });
                }
            }
            Op::ConcatRows(xs) => {
                let mut off = 0;
                for &x in xs {
                    let n = self.value(x).len();
                    self.accumulate(grads, x, |gx| add_into(gx, &gd[off..off + n], T::one()));
                    off += n;
                }
            }
            Op::SliceRows { x, start } => {
                let c = node.value.cols();
                let n = node.value.len();
                self.accumulate(grads, *x, |gx| add_into(&mut gx[start * c..start * c + n], gd, T::one()));
            }
            Op::SliceCols { x, start } => {
                let c = self.dims(*x).1;
                let w = node.value.cols();
                self.accumulate(grads, *x, |gx| {
                    for (grow, orow) in gx.chunks_mut(c).zip(gd.chunks(w)) {
                        add_into(&mut grow[*start..start + w], orow, T::one());
                    }
                });
            }
            Op::Reshape(x) => self.accumulate(grads, *x, |gx| add_into(gx, gd, T::one())),
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |gx| {
                    for ((o, &gv), &v) in gx.iter_mut().zip(gd).zip(xv) {
                        if v > T::zero() {
                            *o = *o + gv;
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                self.accumulate(grads, *x, |gx| {
                    for ((o, &gv), &s) in gx.iter_mut().zip(gd).zip(y) {
                        *o = *o + gv * s * (T::one() - s);
                    }
                });
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                self.accumulate(grads, *x, |gx| {
                    for ((o, &gv), &t) in gx.iter_mut().zip(gd).zip(y) {
                        *o = *o + gv * (T::one() - t * t);
                    }
                });
            }
            Op::Mean(x) => {
                let n = T::from_usize(self.value(*x).len()).unwrap();
                let s = gd[0] / n;
                self.accumulate(grads, *x, |gx| gx.iter_mut().for_each(|o| *o = *o + s));
            }
            Op::L1 { a, b } => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let s = gd[0] / T::from_usize(av.len()).unwrap();
                // subgradient of |0| is 0
                let sign = |x: T, y: T| {
                    if x > y {
                        s
                    } else if x < y {
                        -s
                    } else {
                        T::zero()
                    }
                };
                self.accumulate(grads, *a, |ga| {
                    for ((o, &x), &y) in ga.iter_mut().zip(av).zip(bv) {
                        *o = *o + sign(x, y);
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((o, &x), &y) in gb.iter_mut().zip(av).zip(bv) {
                        *o = *o - sign(x, y);
                    }
                });
            }
            Op::Sparse { x, q, batch } => {
                let c = node.value.cols();
                self.accumulate(grads, *x, |gx| q.apply_transpose_add(gd, c, *batch, gx));
            }
            Op::SoftmaxXent { logits, targets } => {
                let c = self.dims(*logits).1;
                let mut p = softmax_rows(self.value(*logits).data(), c);
                let s = gd[0] / T::from_usize(targets.len()).unwrap();
                for (row, &t) in targets.iter().enumerate() {
                    p[row * c + t] = p[row * c + t] - T::one();
                }
                self.accumulate(grads, *logits, |gl| add_into(gl, &p, s));
            }
        }
    }
}

/// `(L * d_in) x d_out` spiral weights laid out as `d_in x (L * d_out)`.
fn spiral_wide_weights<T: Real>(w: &[T], length: usize, d_in: usize, d_out: usize) -> Vec<T> {
    let mut out = vec![T::zero(); w.len()];
    for j in 0..length {
        for c in 0..d_in {
            out[c * length * d_out + j * d_out..][..d_out].copy_from_slice(&w[(j * d_in + c) * d_out..][..d_out]);
        }
    }
    out
}

fn add_into<T: Real>(out: &mut [T], src: &[T], s: T) {
    for (o, &v) in out.iter_mut().zip(src) {
        *o = *o + s * v;
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(x: &[T], c: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(c) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
        let s: T = e.iter().copied().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(&[rows, cols], v).unwrap()
    }

    #[test]
    fn relu_values() {
        let mut g = Graph::new();
        let x = g.input(t(1, 3, &[-1.0, 0.0, 2.0]));
        let y = g.relu(x);
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn l1_of_equal_is_zero() {
        let mut g = Graph::new();
        let x = g.input(t(2, 2, &[1.0, -2.0, 3.0, 4.0]));
        let l = g.l1_loss(x, x).unwrap();
        assert_eq!(g.value(l).data(), &[0.0]);
    }

    #[test]
    fn gather_pad_row_is_zero() {
        let mut g = Graph::new();
        let x = g.input(t(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let y = g.gather_rows(x, Arc::new(vec![-1])).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 3]);
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 0.0]);
        assert!(matches!(
            g.gather_rows(x, Arc::new(vec![2])),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        assert!(g.gather_rows(x, Arc::new(vec![-2])).is_err());
    }

    #[test]
    fn chain_rule_by_hand() {
        // f = l1(w * x, y) with w = 2, x = 1, y = 1 -> df/dw = 1
        let mut g = Graph::new();
        let w = g.param(Tensor::scalar(2.0));
        let x = g.input(Tensor::scalar(1.0));
        let y = g.input(Tensor::scalar(1.0));
        let wx = g.matmul(w, x).unwrap();
        let f = g.l1_loss(wx, y).unwrap();
        let grads = g.backward(f).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[1.0]);
        assert!(grads.get(x).is_none());
    }

    #[test]
    fn dead_relu_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(t(2, 2, &[-1.0, -0.5, -3.0, -2.0]));
        let r = g.relu(x);
        let m = g.mean(r);
        let grads = g.backward(m).unwrap();
        assert!(grads.get(x).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_scalar_backward_rejected() {
        let mut g = Graph::new();
        let x = g.param(t(1, 2, &[1.0, 2.0]));
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn shape_mismatches() {
        let mut g = Graph::new();
        let a = g.input(t(2, 3, &[0.0; 6]));
        let b = g.input(t(2, 3, &[0.0; 6]));
        assert!(g.matmul(a, b).is_err());
        assert!(g.matmul_bt(a, b).is_ok());
        let c = g.input(t(3, 2, &[0.0; 6]));
        assert!(g.add(a, c).is_err());
        assert!(g.l1_loss(a, c).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax_rows(&[1.0f64, 2.0, 3.0, -1000.0, 0.0, 1000.0], 3);
        for row in p.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fused_spiral_conv_matches_unfused_chain() {
        let (r, d_in, d_out, length) = (5, 3, 2, 3);
        let idx = Arc::new(vec![0, 1, 2, 1, -1, 4, 2, 3, 0, 3, 4, -1, 4, 0, 1]);
        let xv: Vec<f64> = (0..r * d_in).map(|i| ((i * 7) % 11) as f64 * 0.3 - 1.2).collect();
        let wv: Vec<f64> = (0..length * d_in * d_out).map(|i| ((i * 5) % 13) as f64 * 0.1 - 0.6).collect();
        let run = |fused: bool| {
            let mut g = Graph::new();
            let x = g.param(t(r, d_in, &xv));
            let w = g.param(t(length * d_in, d_out, &wv));
            let b = g.param(t(1, d_out, &[0.5, -0.25]));
            let y = if fused {
                g.spiral_conv(x, idx.clone(), length, w, b).unwrap()
            } else {
                let gat = g.gather_rows(x, idx.clone()).unwrap();
                let flat = g.reshape(gat, &[r, length * d_in]).unwrap();
                let m = g.matmul(flat, w).unwrap();
                g.add_row(m, b).unwrap()
            };
            // a non-uniform downstream gradient
            let sq = g.mul(y, y).unwrap();
            let m = g.mean(sq);
            let grads = g.backward(m).unwrap();
            let mut out = g.value(y).to_f64();
            for v in [x, w, b] {
                out.extend(grads.get(v).unwrap().to_f64());
            }
            out
        };
        let (a, b) = (run(true), run(false));
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
        let mut g = Graph::<f64>::new();
        let x = g.input(t(r, d_in, &xv));
        let w = g.input(t(length * d_in, d_out, &wv));
        let b = g.input(t(1, d_out, &[0.0, 0.0]));
        assert!(g.spiral_conv(x, Arc::new(vec![0, 1, 5]), length, w, b).is_err());
        assert!(g.spiral_conv(x, Arc::new(vec![0, 1]), length, w, b).is_err());
    }
}
