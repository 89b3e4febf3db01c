//! Reverse-mode gradient tape over matrix-valued nodes.
//!
//! Every node holds a `batch × width` matrix. The primitive set is closed:
//! masked affine maps, elementwise `tanh`/`relu`/`exp`/`log`, addition,
//! subtraction, elementwise product, scaling, shifting, summation and
//! column gather/scatter. Nodes are appended in evaluation order, so parents
//! always precede children and the backward sweep is a single reverse pass.

use std::sync::Arc;

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    /// `x · (W ⊙ M)[rows]ᵀ + bias[rows]`; the bias is a `1 × out` leaf.
    Affine {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        rows: Option<Arc<[usize]>>,
        mask: Option<Arc<Matrix>>,
    },
    Tanh(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Shift(NodeId),
    Sum(NodeId),
    Columns(NodeId, Arc<[usize]>),
    Scatter {
        parts: Vec<(NodeId, Arc<[usize]>)>,
    },
}

impl Op {
    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Affine {
                input, weight, bias, ..
            } => {
                let mut p = vec![*input, *weight];
                p.extend(bias);
                p
            }
            Op::Tanh(a)
            | Op::Relu(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Scale(a, _)
            | Op::Shift(a)
            | Op::Sum(a)
            | Op::Columns(a, _) => vec![*a],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scatter { parts } => parts.iter().map(|(p, _)| *p).collect(),
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
}

/// Single-threaded recording of one forward evaluation.
#[derive(Clone, Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Adjoints of the leaves reached by [`GradTape::backward`]. Interior
/// adjoints are released during the sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of `id`, or zeros of the given shape when the root does not depend on it.
    pub fn take_or_zeros(&mut self, id: NodeId, rows: usize, cols: usize) -> Matrix {
        self.grads
            .get_mut(id.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Matrix::zeros(rows, cols))
    }
}

fn map(x: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    Matrix::from_vec(x.rows(), x.cols(), x.as_slice().iter().map(|&v| f(v)).collect())
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    assert_eq!(
        (a.rows(), a.cols()),
        (b.rows(), b.cols()),
        "tape operands must share a shape"
    );
    Matrix::from_vec(
        a.rows(),
        a.cols(),
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
}

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
    match slot {
        Some(g) => {
            for (a, b) in g.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *a += b;
            }
        }
        None => *slot = Some(delta),
    }
}

impl GradTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        debug_assert_eq!((v.rows(), v.cols()), (1, 1));
        v.as_slice()[0]
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Parameter or input leaf.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Masked affine map restricted to a subset of output rows.
    ///
    /// `weight` is `out × in`; `mask`, when given, has the same shape and
    /// multiplies the weights entrywise. `rows` selects which outputs to
    /// compute (all when `None`).
    pub fn affine(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        rows: Option<Arc<[usize]>>,
        mask: Option<Arc<Matrix>>,
    ) -> NodeId {
        let x = &self.nodes[input.0].value;
        let w = &self.nodes[weight.0].value;
        assert_eq!(x.cols(), w.cols(), "affine input width must match weight columns");
        if let Some(m) = &mask {
            assert_eq!((m.rows(), m.cols()), (w.rows(), w.cols()), "mask shape");
        }
        let b = bias.map(|b| &self.nodes[b.0].value);
        let out_rows: Vec<usize> = match &rows {
            Some(r) => r.to_vec(),
            None => (0..w.rows()).collect(),
        };
        let batch = x.rows();
        let mut out = Matrix::zeros(batch, out_rows.len());
        for (k, &r) in out_rows.iter().enumerate() {
            let wrow = w.row(r);
            let eff: Vec<f64> = match &mask {
                Some(m) => wrow.iter().zip(m.row(r)).map(|(a, b)| a * b).collect(),
                None => wrow.to_vec(),
            };
            let offset = b.map_or(0.0, |b| b.as_slice()[r]);
            for i in 0..batch {
                out[(i, k)] = offset + super::matrix::dot(x.row(i), &eff);
            }
        }
        self.push(
            Op::Affine {
                input,
                weight,
                bias,
                rows,
                mask,
            },
            out,
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), |x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), f64::ln);
        self.push(Op::Log(a), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = zip(self.value(a), self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = zip(self.value(a), self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = zip(self.value(a), self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = map(self.value(a), |x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn shift(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = map(self.value(a), |x| x + c);
        self.push(Op::Shift(a), v)
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).as_slice().iter().sum();
        self.push(Op::Sum(a), Matrix::from_vec(1, 1, vec![s]))
    }

    /// Gathers the listed columns, in order.
    pub fn columns(&mut self, a: NodeId, cols: Arc<[usize]>) -> NodeId {
        let x = self.value(a);
        let mut out = Matrix::zeros(x.rows(), cols.len());
        for i in 0..x.rows() {
            for (k, &c) in cols.iter().enumerate() {
                out[(i, k)] = x[(i, c)];
            }
        }
        self.push(Op::Columns(a, cols), out)
    }

    /// Places the columns of each part at the given target columns of a
    /// `batch × width` matrix; untouched columns are zero.
    pub fn scatter(&mut self, parts: Vec<(NodeId, Arc<[usize]>)>, batch: usize, width: usize) -> NodeId {
        let mut out = Matrix::zeros(batch, width);
        for (p, cols) in &parts {
            let x = self.value(*p);
            assert_eq!(x.cols(), cols.len(), "scatter part width");
            assert_eq!(x.rows(), batch, "scatter part batch");
            for i in 0..batch {
                for (k, &c) in cols.iter().enumerate() {
                    out[(i, c)] += x[(i, k)];
                }
            }
        }
        self.push(Op::Scatter { parts }, out)
    }

    /// Reverse sweep from a scalar root.
    ///
    /// Fails with `CycleDetected` if any node references a parent that does
    /// not precede it.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if root.0 >= self.nodes.len() {
            return Err(Error::CycleDetected { node: root.0 });
        }
        let rv = &self.nodes[root.0].value;
        if rv.rows() != 1 || rv.cols() != 1 {
            return Err(Error::NonScalarRoot { node: root.0 });
        }
        for (i, node) in self.nodes[..=root.0].iter().enumerate() {
            if node.op.parents().iter().any(|p| p.0 >= i) {
                return Err(Error::CycleDetected { node: i });
            }
        }

        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Matrix::filled(1, 1, 1.0));
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => grads[i] = Some(g),
                Op::Affine {
                    input,
                    weight,
                    bias,
                    rows,
                    mask,
                } => {
                    let x = self.value(*input);
                    let w = self.value(*weight);
                    let out_rows: Vec<usize> = match rows {
                        Some(r) => r.to_vec(),
                        None => (0..w.rows()).collect(),
                    };
                    let mut gx = Matrix::zeros(x.rows(), x.cols());
                    let mut gw = Matrix::zeros(w.rows(), w.cols());
                    let mut gb = bias.map(|_| Matrix::zeros(1, w.rows()));
                    for (k, &r) in out_rows.iter().enumerate() {
                        let wrow = w.row(r);
                        let mrow = mask.as_ref().map(|m| m.row(r));
                        let gwrow = gw.row_mut(r);
                        let mut gsum = 0.0;
                        for b in 0..x.rows() {
                            let gk = g[(b, k)];
                            if gk == 0.0 {
                                continue;
                            }
                            gsum += gk;
                            for (gwc, &xc) in gwrow.iter_mut().zip(x.row(b)) {
                                *gwc += gk * xc;
                            }
                        }
                        if let Some(mrow) = mrow {
                            for (gwc, &m) in gwrow.iter_mut().zip(mrow) {
                                *gwc *= m;
                            }
                        }
                        for b in 0..x.rows() {
                            let gk = g[(b, k)];
                            if gk == 0.0 {
                                continue;
                            }
                            let gxrow = gx.row_mut(b);
                            match mrow {
                                Some(mrow) => {
                                    for ((gxc, &wc), &m) in gxrow.iter_mut().zip(wrow).zip(mrow) {
                                        *gxc += gk * wc * m;
                                    }
                                }
                                None => {
                                    for (gxc, &wc) in gxrow.iter_mut().zip(wrow) {
                                        *gxc += gk * wc;
                                    }
                                }
                            }
                        }
                        if let Some(gb) = gb.as_mut() {
                            gb.as_mut_slice()[r] += gsum;
                        }
                    }
                    accumulate(&mut grads[input.0], gx);
                    accumulate(&mut grads[weight.0], gw);
                    if let (Some(b), Some(gb)) = (bias, gb) {
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::Tanh(a) => {
                    let d = zip(&g, &node.value, |g, y| g * (1.0 - y * y));
                    accumulate(&mut grads[a.0], d);
                }
                Op::Relu(a) => {
                    let d = zip(&g, self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut grads[a.0], d);
                }
                Op::Exp(a) => {
                    let d = zip(&g, &node.value, |g, y| g * y);
                    accumulate(&mut grads[a.0], d);
                }
                Op::Log(a) => {
                    let d = zip(&g, self.value(*a), |g, x| g / x);
                    accumulate(&mut grads[a.0], d);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads[b.0], map(&g, |v| -v));
                    accumulate(&mut grads[a.0], g);
                }
                Op::Mul(a, b) => {
                    let da = zip(&g, self.value(*b), |g, y| g * y);
                    let db = zip(&g, self.value(*a), |g, x| g * x);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], map(&g, |v| c * v)),
                Op::Shift(a) => accumulate(&mut grads[a.0], g),
                Op::Sum(a) => {
                    let x = self.value(*a);
                    accumulate(&mut grads[a.0], Matrix::filled(x.rows(), x.cols(), g.as_slice()[0]));
                }
                Op::Columns(a, cols) => {
                    let x = self.value(*a);
                    let mut d = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        for (k, &c) in cols.iter().enumerate() {
                            d[(r, c)] += g[(r, k)];
                        }
                    }
                    accumulate(&mut grads[a.0], d);
                }
                Op::Scatter { parts } => {
                    for (p, cols) in parts {
                        let mut d = Matrix::zeros(g.rows(), cols.len());
                        for r in 0..g.rows() {
                            for (k, &c) in cols.iter().enumerate() {
                                d[(r, k)] = g[(r, c)];
                            }
                        }
                        accumulate(&mut grads[p.0], d);
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }

    #[cfg(test)]
    fn push_unchecked_add(&mut self, a: usize, b: usize) -> NodeId {
        self.push(Op::Add(NodeId(a), NodeId(b)), Matrix::zeros(1, 1))
    }
}
