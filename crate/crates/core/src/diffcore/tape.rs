use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Floor applied to every `log` argument. The derivative uses the same
/// clamped argument, `1 / max(x, LOG_FLOOR)`, so it keeps its sign below
/// the floor.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    RSubScalar(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Concat(Var, Var),
    Slice { x: Var, start: usize, end: usize },
    Reshape(Var),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of primitive operations for reverse-mode
/// differentiation. Inputs of a node always precede it.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`]. Every leaf has an entry, zero if
/// it does not influence the loss.
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.adjoints.get(v.0).and_then(Option::as_ref)
    }

    /// Adjoints for `vars`, in order. Panics if one was not reached and is
    /// not a leaf.
    pub fn collect(&self, vars: &[Var]) -> Vec<Tensor> {
        vars.iter()
            .map(|v| {
                self.wrt(*v)
                    .cloned()
                    .unwrap_or_else(|| panic!("no adjoint recorded for node {}", v.0))
            })
            .collect()
    }
}

fn mat_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::shape(op, format!("expected a matrix, got {s:?}"))),
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `out[m,n] = a[m,k] · b[k,n]`
fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

/// `out[m,k] = g[m,n] · b[k,n]ᵀ`
fn matmul_nt(g: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for kk in 0..k {
            let brow = &b[kk * n..(kk + 1) * n];
            out[i * k + kk] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `out[k,n] = a[m,k]ᵀ · g[m,n]`
fn matmul_tn(a: &[f64], g: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let orow = &mut out[kk * n..(kk + 1) * n];
            for (o, &gv) in orow.iter_mut().zip(grow) {
                *o += aik * gv;
            }
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_parts(a.shape().to_vec(), data)
}

/// Softmax along the last axis, max-subtracted.
fn softmax_rows(x: &Tensor) -> Tensor {
    let (m, n) = x.dims2().expect("softmax on non-matrix");
    let mut out = x.data().to_vec();
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

fn log_softmax_rows(x: &Tensor) -> Tensor {
    let (m, n) = x.dims2().expect("log_softmax on non-matrix");
    let mut out = x.data().to_vec();
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

/// Public softmax for callers that do not need a tape.
pub fn softmax(logits: &Tensor) -> Tensor {
    softmax_rows(logits)
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = mat_dims("matmul", self.value(a))?;
        let (k2, n) = mat_dims("matmul", self.value(b))?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{m}, {k}] x [{k2}, {n}]")));
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Op::MatMul(a, b), Tensor::from_parts(vec![m, n], out)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), out))
    }

    /// Adds a bias vector (`[n]` or `[1, n]`) to every row of `a[m, n]`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = mat_dims("add_bias", self.value(a))?;
        let b = self.value(bias);
        if b.len() != n || b.shape().len() > 2 || (b.shape().len() == 2 && b.shape()[0] != 1) {
            return Err(Error::shape(
                "add_bias",
                format!("[{m}, {n}] + {:?}", b.shape()),
            ));
        }
        let mut out = self.value(a).data().to_vec();
        let bd = b.data();
        for row in out.chunks_mut(n.max(1)) {
            for (o, &bv) in row.iter_mut().zip(bd) {
                *o += bv;
            }
        }
        Ok(self.push(Op::AddBias(a, bias), Tensor::from_parts(vec![m, n], out)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), out))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("mul", self.value(a), self.value(b))?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), out))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = map(self.value(a), |x| c * x);
        self.push(Op::Scale(a, c), out)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = map(self.value(a), |x| x + c);
        self.push(Op::AddScalar(a), out)
    }

    /// `c - a`, elementwise.
    pub fn rsub_scalar(&mut self, c: f64, a: Var) -> Var {
        let out = map(self.value(a), |x| c - x);
        self.push(Op::RSubScalar(a), out)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| x.max(0.0));
        self.push(Op::Relu(a), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = map(self.value(a), sigmoid);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = map(self.value(a), f64::exp);
        self.push(Op::Exp(a), out)
    }

    /// Natural log of `max(a, LOG_FLOOR)`.
    pub fn log(&mut self, a: Var) -> Var {
        let out = map(self.value(a), |x| x.max(LOG_FLOOR).ln());
        self.push(Op::Log(a), out)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        mat_dims("softmax", self.value(a))?;
        let out = softmax_rows(self.value(a));
        Ok(self.push(Op::Softmax(a), out))
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        mat_dims("log_softmax", self.value(a))?;
        let out = log_softmax_rows(self.value(a));
        Ok(self.push(Op::LogSoftmax(a), out))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        Ok(self.push(Op::Mean(a), Tensor::scalar(s)))
    }

    /// Sums each row of `a[m, n]`, giving `[m]`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let (m, n) = mat_dims("row_sum", self.value(a))?;
        let d = self.value(a).data();
        let out = (0..m).map(|i| d[i * n..(i + 1) * n].iter().sum()).collect();
        Ok(self.push(Op::RowSum(a), Tensor::from_parts(vec![m], out)))
    }

    /// Concatenates `[m, p]` and `[m, q]` along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, p) = mat_dims("concat", self.value(a))?;
        let (m2, q) = mat_dims("concat", self.value(b))?;
        if m != m2 {
            return Err(Error::shape("concat", format!("[{m}, {p}] ++ [{m2}, {q}]")));
        }
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(m * (p + q));
        for i in 0..m {
            out.extend_from_slice(&da[i * p..(i + 1) * p]);
            out.extend_from_slice(&db[i * q..(i + 1) * q]);
        }
        Ok(self.push(Op::Concat(a, b), Tensor::from_parts(vec![m, p + q], out)))
    }

    /// Columns `start..end` of `a[m, n]`.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = mat_dims("slice", self.value(a))?;
        if start > end || end > n {
            return Err(Error::shape("slice", format!("[{m}, {n}][.., {start}..{end}]")));
        }
        let d = self.value(a).data();
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&d[i * n + start..i * n + end]);
        }
        Ok(self.push(
            Op::Slice { x: a, start, end },
            Tensor::from_parts(vec![m, w], out),
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).clone().reshape(shape)?;
        Ok(self.push(Op::Reshape(a), t))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", lv.shape()),
            ));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Tensor::full(lv.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(*a).dims2().unwrap();
                    let n = self.value(*b).dims2().unwrap().1;
                    let da = matmul_nt(g.data(), self.value(*b).data(), m, k, n);
                    let db = matmul_tn(self.value(*a).data(), g.data(), m, k, n);
                    accum(&mut adj, *a, Tensor::from_parts(vec![m, k], da));
                    accum(&mut adj, *b, Tensor::from_parts(vec![k, n], db));
                }
                Op::Add(a, b) => {
                    accum(&mut adj, *a, g.clone());
                    accum(&mut adj, *b, g.clone());
                }
                Op::AddBias(a, b) => {
                    let bshape = self.value(*b).shape().to_vec();
                    let n = self.value(*b).len();
                    let mut db = vec![0.0; n];
                    for row in g.data().chunks(n.max(1)) {
                        for (o, v) in db.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    accum(&mut adj, *a, g.clone());
                    accum(&mut adj, *b, Tensor::from_parts(bshape, db));
                }
                Op::Sub(a, b) => {
                    accum(&mut adj, *a, g.clone());
                    accum(&mut adj, *b, map(&g, |x| -x));
                }
                Op::Mul(a, b) => {
                    accum(&mut adj, *a, zip_map(&g, self.value(*b), |x, y| x * y));
                    accum(&mut adj, *b, zip_map(&g, self.value(*a), |x, y| x * y));
                }
                Op::Scale(a, c) => accum(&mut adj, *a, map(&g, |x| c * x)),
                Op::AddScalar(a) => accum(&mut adj, *a, g.clone()),
                Op::RSubScalar(a) => accum(&mut adj, *a, map(&g, |x| -x)),
                Op::Relu(a) => accum(
                    &mut adj,
                    *a,
                    zip_map(&g, self.value(*a), |x, y| if y > 0.0 { x } else { 0.0 }),
                ),
                Op::Tanh(a) => accum(&mut adj, *a, zip_map(&g, &node.value, |x, y| x * (1.0 - y * y))),
                Op::Sigmoid(a) => {
                    accum(&mut adj, *a, zip_map(&g, &node.value, |x, y| x * y * (1.0 - y)))
                }
                Op::Exp(a) => accum(&mut adj, *a, zip_map(&g, &node.value, |x, y| x * y)),
                Op::Log(a) => accum(
                    &mut adj,
                    *a,
                    zip_map(&g, self.value(*a), |x, y| x / y.max(LOG_FLOOR)),
                ),
                Op::Softmax(a) => {
                    let y = &node.value;
                    let (m, n) = y.dims2().unwrap();
                    let mut dx = vec![0.0; m * n];
                    for r in 0..m {
                        let (gr, yr) = (&g.data()[r * n..(r + 1) * n], &y.data()[r * n..(r + 1) * n]);
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            dx[r * n + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    accum(&mut adj, *a, Tensor::from_parts(y.shape().to_vec(), dx));
                }
                Op::LogSoftmax(a) => {
                    let y = &node.value;
                    let (m, n) = y.dims2().unwrap();
                    let mut dx = vec![0.0; m * n];
                    for r in 0..m {
                        let (gr, yr) = (&g.data()[r * n..(r + 1) * n], &y.data()[r * n..(r + 1) * n]);
                        let total: f64 = gr.iter().sum();
                        for j in 0..n {
                            dx[r * n + j] = gr[j] - yr[j].exp() * total;
                        }
                    }
                    accum(&mut adj, *a, Tensor::from_parts(y.shape().to_vec(), dx));
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    accum(&mut adj, *a, Tensor::full(self.value(*a).shape(), gv));
                }
                Op::Mean(a) => {
                    let x = self.value(*a);
                    let gv = g.item() / x.len() as f64;
                    accum(&mut adj, *a, Tensor::full(x.shape(), gv));
                }
                Op::RowSum(a) => {
                    let (m, n) = self.value(*a).dims2().unwrap();
                    let mut dx = Vec::with_capacity(m * n);
                    for &gv in g.data() {
                        dx.extend(std::iter::repeat_n(gv, n));
                    }
                    accum(&mut adj, *a, Tensor::from_parts(vec![m, n], dx));
                }
                Op::Concat(a, b) => {
                    let (m, p) = self.value(*a).dims2().unwrap();
                    let q = self.value(*b).dims2().unwrap().1;
                    let mut da = Vec::with_capacity(m * p);
                    let mut db = Vec::with_capacity(m * q);
                    for row in g.data().chunks((p + q).max(1)).take(m) {
                        da.extend_from_slice(&row[..p]);
                        db.extend_from_slice(&row[p..]);
                    }
                    accum(&mut adj, *a, Tensor::from_parts(vec![m, p], da));
                    accum(&mut adj, *b, Tensor::from_parts(vec![m, q], db));
                }
                Op::Slice { x, start, end } => {
                    let (m, n) = self.value(*x).dims2().unwrap();
                    let w = end - start;
                    let mut dx = vec![0.0; m * n];
                    for r in 0..m {
                        dx[r * n + start..r * n + end].copy_from_slice(&g.data()[r * w..(r + 1) * w]);
                    }
                    accum(&mut adj, *x, Tensor::from_parts(vec![m, n], dx));
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).shape().to_vec();
                    accum(&mut adj, *a, g.clone().reshape(shape)?);
                }
            }
            adj[i] = Some(g);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.op, Op::Leaf) && adj[i].is_none() {
                adj[i] = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(Gradients { adjoints: adj })
    }
}

fn accum(adj: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut adj[v.0] {
        Some(existing) => {
            for (e, x) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
