//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value and enough saved
//! state to run its vector-Jacobian product. [`Tape::backward`] walks the tape
//! once in reverse, accumulating gradients into per-node buffers. Parameters
//! enter the tape by reference so a forward pass never copies weights.

use std::borrow::Cow;
use std::sync::Arc;

use super::tensor::{log_softmax_rows, Scalar, Tensor};
use super::TensorError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// In-neighbour lists for mean aggregation, indexed by destination node.
pub type NeighborLists = Arc<Vec<Vec<usize>>>;

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    NeighborMean(Var, NeighborLists),
    Mask(Var, Tensor<T>),
    SumAll(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        mask: Vec<bool>,
        probs: Tensor<T>,
        count: usize,
    },
}

struct Node<'a, T: Scalar> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

/// A recording of one forward computation.
pub struct Tape<'a, T: Scalar> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor<T>>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_owned(&mut self, value: Tensor<T>, op: Op<T>, parents: &[Var]) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.push(Cow::Owned(value), op, needs_grad)
    }

    /// Trainable leaf, borrowed for the lifetime of the tape.
    pub fn param(&mut self, t: &'a Tensor<T>) -> Var {
        self.push(Cow::Borrowed(t), Op::Leaf, true)
    }

    /// Leaf that receives a gradient but is owned by the tape.
    pub fn input(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(Cow::Owned(t), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::Shape {
            op,
            lhs: self.value(a).shape().to_vec(),
            rhs: self.value(b).shape().to_vec(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self
            .value(a)
            .matmul(self.value(b))
            .map_err(|_| self.shape_err("matmul", a, b))?;
        Ok(self.push_owned(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dims2() != y.dims2() {
            return Err(self.shape_err("add", a, b));
        }
        let mut out = x.clone().reshape(vec![x.rows(), x.cols()])?;
        out.add_assign(y);
        Ok(self.push_owned(out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a length-`cols` bias to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.len() != xv.cols() {
            return Err(self.shape_err("add_bias", x, bias));
        }
        let mut out = xv.clone().reshape(vec![xv.rows(), xv.cols()])?;
        let b = bv.data();
        for r in 0..out.rows() {
            for (o, &bb) in out.row_mut(r).iter_mut().zip(b) {
                *o = *o + bb;
            }
        }
        Ok(self.push_owned(out, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dims2() != y.dims2() {
            return Err(self.shape_err("mul", a, b));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| p * q).collect();
        let out = Tensor::matrix(x.rows(), x.cols(), data)?;
        Ok(self.push_owned(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let out = self.value(x).map(|v| v * s);
        self.push_owned(out, Op::Scale(x, s), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(T::zero()));
        self.push_owned(out, Op::Relu(x), &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(T::tanh);
        self.push_owned(out, Op::Tanh(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push_owned(out, Op::Sigmoid(x), &[x])
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        let out = log_softmax_rows(self.value(x)).map(T::exp);
        self.push_owned(out, Op::Softmax(x), &[x])
    }

    /// Feature-axis concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let rows = self.value(parts[0]).rows();
        if let Some(&bad) = parts.iter().find(|p| self.value(**p).rows() != rows) {
            return Err(self.shape_err("concat_cols", parts[0], bad));
        }
        let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let out = Tensor::matrix(rows, total, data)?;
        Ok(self.push_owned(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Columns `start..end` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if start > end || end > xv.cols() {
            return Err(TensorError::Index {
                op: "slice_cols",
                index: end,
                bound: xv.cols(),
            });
        }
        let mut data = Vec::with_capacity(xv.rows() * (end - start));
        for r in 0..xv.rows() {
            data.extend_from_slice(&xv.row(r)[start..end]);
        }
        let out = Tensor::matrix(xv.rows(), end - start, data)?;
        Ok(self.push_owned(out, Op::SliceCols(x, start), &[x]))
    }

    /// Rows of `x` selected (with repetition allowed) by `indices`.
    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let mut data = Vec::with_capacity(indices.len() * xv.cols());
        for &i in indices {
            if i >= xv.rows() {
                return Err(TensorError::Index {
                    op: "gather_rows",
                    index: i,
                    bound: xv.rows(),
                });
            }
            data.extend_from_slice(xv.row(i));
        }
        let out = Tensor::matrix(indices.len(), xv.cols(), data)?;
        Ok(self.push_owned(out, Op::GatherRows(x, indices.to_vec()), &[x]))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let cols = self.value(parts[0]).cols();
        if let Some(&bad) = parts.iter().find(|p| self.value(**p).cols() != cols) {
            return Err(self.shape_err("concat_rows", parts[0], bad));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let v = self.value(*p);
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let out = Tensor::matrix(rows, cols, data)?;
        Ok(self.push_owned(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Row `v` of the output is the mean of rows `neighbors[v]` of `x`, or
    /// zero when the list is empty.
    pub fn neighbor_mean(&mut self, x: Var, neighbors: NeighborLists) -> Result<Var, TensorError> {
        let xv = self.value(x);
        let (n, d) = xv.dims2();
        if neighbors.len() != n {
            return Err(TensorError::Index {
                op: "neighbor_mean",
                index: neighbors.len(),
                bound: n,
            });
        }
        let mut out = Tensor::zeros(&[n, d]);
        for (v, list) in neighbors.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let inv = T::one() / T::from_f64(list.len() as f64);
            let row = out.row_mut(v);
            for &u in list {
                if u >= n {
                    return Err(TensorError::Index {
                        op: "neighbor_mean",
                        index: u,
                        bound: n,
                    });
                }
                for (o, &s) in row.iter_mut().zip(xv.row(u)) {
                    *o = *o + s * inv;
                }
            }
        }
        Ok(self.push_owned(out, Op::NeighborMean(x, neighbors), &[x]))
    }

    /// Element-wise product with a constant mask (used for dropout).
    pub fn mask(&mut self, x: Var, mask: Tensor<T>) -> Result<Var, TensorError> {
        let xv = self.value(x);
        if mask.len() != xv.len() {
            return Err(TensorError::Shape {
                op: "mask",
                lhs: xv.shape().to_vec(),
                rhs: mask.shape().to_vec(),
            });
        }
        let data = xv.data().iter().zip(mask.data()).map(|(&a, &m)| a * m).collect();
        let out = Tensor::matrix(xv.rows(), xv.cols(), data)?;
        Ok(self.push_owned(out, Op::Mask(x, mask), &[x]))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push_owned(Tensor::scalar(s), Op::SumAll(x), &[x])
    }

    /// Mean negative log-likelihood over rows with `mask[r] == true`.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var, TensorError> {
        let lv = self.value(logits);
        let (n, c) = lv.dims2();
        if targets.len() != n || mask.len() != n {
            return Err(TensorError::Index {
                op: "cross_entropy",
                index: targets.len().max(mask.len()),
                bound: n,
            });
        }
        if let Some(&t) = targets.iter().zip(mask).find(|(&t, &m)| m && t >= c).map(|(t, _)| t) {
            return Err(TensorError::Index {
                op: "cross_entropy",
                index: t,
                bound: c,
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(TensorError::AllMasked);
        }
        let logp = log_softmax_rows(lv);
        let mut total = T::zero();
        for r in 0..n {
            if mask[r] {
                total = total - logp.get(r, targets[r]);
            }
        }
        let loss = total / T::from_f64(count as f64);
        let probs = logp.map(T::exp);
        let op = Op::CrossEntropy {
            logits,
            targets: targets.to_vec(),
            mask: mask.to_vec(),
            probs,
            count,
        };
        Ok(self.push_owned(Tensor::scalar(loss), op, &[logits]))
    }

    /// Back-propagates `seed * d(root)` through the tape. `root` must be a
    /// single element.
    pub fn backward_scaled(&self, root: Var, seed: T) -> Result<Gradients<T>, TensorError> {
        if self.value(root).len() != 1 {
            return Err(TensorError::NonScalarRoot(self.value(root).shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(&[1, 1], seed));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    pub fn backward(&self, root: Var) -> Result<Gradients<T>, TensorError> {
        self.backward_scaled(root, T::one())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn propagate(&self, node: &Node<'a, T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let out = &*node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = av.dims2();
                let n = bv.cols();
                if self.wants(*a) {
                    let acc = slot(grads, *a, av);
                    // dA += dY · Bᵀ
                    T::gemm(
                        m,
                        n,
                        k,
                        T::one(),
                        g.data(),
                        n as isize,
                        1,
                        bv.data(),
                        1,
                        n as isize,
                        T::one(),
                        acc.data_mut(),
                        k as isize,
                        1,
                    );
                }
                if self.wants(*b) {
                    let acc = slot(grads, *b, bv);
                    // dB += Aᵀ · dY
                    T::gemm(
                        k,
                        m,
                        n,
                        T::one(),
                        av.data(),
                        1,
                        k as isize,
                        g.data(),
                        n as isize,
                        1,
                        T::one(),
                        acc.data_mut(),
                        n as isize,
                        1,
                    );
                }
            }
            Op::Add(a, b) => {
                for p in [a, b] {
                    if self.wants(*p) {
                        slot(grads, *p, self.value(*p)).add_assign(g);
                    }
                }
            }
            Op::AddBias(x, bias) => {
                if self.wants(*x) {
                    slot(grads, *x, self.value(*x)).add_assign(g);
                }
                if self.wants(*bias) {
                    let acc = slot(grads, *bias, self.value(*bias));
                    for r in 0..g.rows() {
                        for (a, &v) in acc.data_mut().iter_mut().zip(g.row(r)) {
                            *a = *a + v;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.wants(*a) {
                    let acc = slot(grads, *a, av);
                    for ((d, &gv), &y) in acc.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *d = *d + gv * y;
                    }
                }
                if self.wants(*b) {
                    let acc = slot(grads, *b, bv);
                    for ((d, &gv), &x) in acc.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *d = *d + gv * x;
                    }
                }
            }
            Op::Scale(x, s) => {
                if self.wants(*x) {
                    let acc = slot(grads, *x, self.value(*x));
                    for (d, &gv) in acc.data_mut().iter_mut().zip(g.data()) {
                        *d = *d + gv * *s;
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let acc = slot(grads, *x, xv);
                for ((d, &gv), &v) in acc.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                    if v > T::zero() {
                        *d = *d + gv;
                    }
                }
            }
            Op::Tanh(x) => {
                let acc = slot(grads, *x, self.value(*x));
                for ((d, &gv), &y) in acc.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                    *d = *d + gv * (T::one() - y * y);
                }
            }
            Op::Sigmoid(x) => {
                let acc = slot(grads, *x, self.value(*x));
                for ((d, &gv), &y) in acc.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                    *d = *d + gv * y * (T::one() - y);
                }
            }
            Op::Softmax(x) => {
                let acc = slot(grads, *x, self.value(*x));
                let cols = out.cols();
                for r in 0..out.rows() {
                    let (y, gr) = (out.row(r), g.row(r));
                    let dot: T = y.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    let dst = &mut acc.data_mut()[r * cols..(r + 1) * cols];
                    for ((d, &yv), &gv) in dst.iter_mut().zip(y).zip(gr) {
                        *d = *d + yv * (gv - dot);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let w = pv.cols();
                    if self.wants(*p) {
                        let acc = slot(grads, *p, pv);
                        for r in 0..g.rows() {
                            let src = &g.row(r)[offset..offset + w];
                            for (d, &s) in acc.row_mut(r).iter_mut().zip(src) {
                                *d = *d + s;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::SliceCols(x, start) => {
                let acc = slot(grads, *x, self.value(*x));
                let w = g.cols();
                for r in 0..g.rows() {
                    let dst = &mut acc.row_mut(r)[*start..*start + w];
                    for (d, &s) in dst.iter_mut().zip(g.row(r)) {
                        *d = *d + s;
                    }
                }
            }
            Op::GatherRows(x, indices) => {
                let acc = slot(grads, *x, self.value(*x));
                for (r, &i) in indices.iter().enumerate() {
                    for (d, &s) in acc.row_mut(i).iter_mut().zip(g.row(r)) {
                        *d = *d + s;
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut row = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let h = pv.rows();
                    if self.wants(*p) {
                        let acc = slot(grads, *p, pv);
                        for r in 0..h {
                            for (d, &s) in acc.row_mut(r).iter_mut().zip(g.row(row + r)) {
                                *d = *d + s;
                            }
                        }
                    }
                    row += h;
                }
            }
            Op::NeighborMean(x, neighbors) => {
                let acc = slot(grads, *x, self.value(*x));
                for (v, list) in neighbors.iter().enumerate() {
                    if list.is_empty() {
                        continue;
                    }
                    let inv = T::one() / T::from_f64(list.len() as f64);
                    for &u in list {
                        let src = g.row(v);
                        for (d, &s) in acc.row_mut(u).iter_mut().zip(src) {
                            *d = *d + s * inv;
                        }
                    }
                }
            }
            Op::Mask(x, mask) => {
                let acc = slot(grads, *x, self.value(*x));
                for ((d, &gv), &m) in acc.data_mut().iter_mut().zip(g.data()).zip(mask.data()) {
                    *d = *d + gv * m;
                }
            }
            Op::SumAll(x) => {
                let gv = g.data()[0];
                for d in slot(grads, *x, self.value(*x)).data_mut() {
                    *d = *d + gv;
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                mask,
                probs,
                count,
            } => {
                let scale = g.data()[0] / T::from_f64(*count as f64);
                let acc = slot(grads, *logits, self.value(*logits));
                for r in 0..probs.rows() {
                    if !mask[r] {
                        continue;
                    }
                    let dst = acc.row_mut(r);
                    for (c, (d, &p)) in dst.iter_mut().zip(probs.row(r)).enumerate() {
                        let onehot = if c == targets[r] { T::one() } else { T::zero() };
                        *d = *d + scale * (p - onehot);
                    }
                }
            }
        }
    }
}

fn slot<'g, T: Scalar>(
    grads: &'g mut [Option<Tensor<T>>],
    v: Var,
    like: &Tensor<T>,
) -> &'g mut Tensor<T> {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(like.shape()))
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
