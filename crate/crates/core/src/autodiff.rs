//! Reverse-mode automatic differentiation on a flat tape.
//!
//! Every operation appends a node holding its forward value. Because a node
//! can only name parents that already exist, the tape is always in
//! topological order and [`Tape::backward`] is a single reverse sweep.

use std::fmt;

use crate::error::{Error, Result, Shape};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    ScalarMul,
    Tanh,
    Sin,
    Cos,
    Sum,
    Mean,
    Square,
    AddRow,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::ScalarMul => "scalar-mul",
            OpKind::Tanh => "tanh",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Square => "square",
            OpKind::AddRow => "broadcast-add-row",
        };
        f.write_str(name)
    }
}

/// A recorded operation and the parents it reads.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// Elementwise product.
    Mul(Var, Var),
    ScalarMul(Var, f64),
    Tanh(Var),
    Sin(Var),
    Cos(Var),
    Sum(Var),
    Mean(Var),
    Square(Var),
    /// `m x n` plus a `1 x n` row added to every row.
    AddRow(Var, Var),
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::ScalarMul(..) => OpKind::ScalarMul,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Sin(_) => OpKind::Sin,
            Op::Cos(_) => OpKind::Cos,
            Op::Sum(_) => OpKind::Sum,
            Op::Mean(_) => OpKind::Mean,
            Op::Square(_) => OpKind::Square,
            Op::AddRow(..) => OpKind::AddRow,
        }
    }

    pub fn parents(&self) -> Vec<Var> {
        match *self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) => vec![a, b],
            Op::ScalarMul(a, _) | Op::Tanh(a) | Op::Sin(a) | Op::Cos(a) | Op::Sum(a) | Op::Mean(a) | Op::Square(a) => {
                vec![a]
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn op(&self, var: Var) -> Op {
        self.nodes[var.0].op
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push_node(Op::Leaf, value)
    }

    /// Evaluates `op` on values already on the tape and records the result.
    ///
    /// Panics if a parent is not on this tape, or if `op` is [`Op::Leaf`].
    pub fn apply(&mut self, op: Op) -> Result<Var> {
        for p in op.parents() {
            assert!(p.0 < self.nodes.len(), "parent {p:?} is not on this tape");
        }
        let value = match op {
            Op::Leaf => panic!("leaves are recorded with Tape::leaf"),
            Op::MatMul(a, b) => self.value(a).matmul(self.value(b))?,
            Op::Add(a, b) => self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?,
            Op::Sub(a, b) => self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?,
            Op::Mul(a, b) => self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?,
            Op::ScalarMul(a, s) => self.value(a).map(|x| s * x),
            Op::Tanh(a) => self.value(a).tanh(),
            Op::Sin(a) => self.value(a).map(f64::sin),
            Op::Cos(a) => self.value(a).map(f64::cos),
            Op::Sum(a) => Tensor::scalar(sum_ltr(self.value(a).data())),
            Op::Mean(a) => {
                let t = self.value(a);
                Tensor::scalar(sum_ltr(t.data()) / t.len() as f64)
            }
            Op::Square(a) => self.value(a).map(|x| x * x),
            Op::AddRow(a, b) => {
                let (x, row) = (self.value(a), self.value(b));
                if row.rows() != 1 || row.cols() != x.cols() {
                    return Err(Error::ShapeMismatch {
                        op: "broadcast-add-row",
                        left: x.shape(),
                        right: row.shape(),
                    });
                }
                let mut out = x.clone();
                for chunk in out.data_mut().chunks_exact_mut(row.cols().max(1)) {
                    for (o, r) in chunk.iter_mut().zip(row.data()) {
                        *o += r;
                    }
                }
                out
            }
        };
        Ok(self.push_node(op, value))
    }

    fn push_node(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Mul(a, b))
    }

    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Var {
        self.apply(Op::ScalarMul(a, s)).expect("scalar-mul cannot fail")
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.apply(Op::Tanh(a)).expect("tanh cannot fail")
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.apply(Op::Sin(a)).expect("sin cannot fail")
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.apply(Op::Cos(a)).expect("cos cannot fail")
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.apply(Op::Sum(a)).expect("sum cannot fail")
    }

    pub fn mean(&mut self, a: Var) -> Var {
        self.apply(Op::Mean(a)).expect("mean cannot fail")
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.apply(Op::Square(a)).expect("square cannot fail")
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.apply(Op::AddRow(a, row))
    }

    /// Gradients of `loss` with respect to every node on the tape.
    ///
    /// Nodes recorded after `loss`, or that `loss` does not depend on, get
    /// zero gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_shape = self.value(loss).shape();
        if loss_shape != Shape(1, 1) {
            return Err(Error::NonScalarLoss(loss_shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.value(b).transpose())?;
                    let gb = self.value(a).transpose_matmul(&g)?;
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g.map(|v| -v));
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(b), "mul", |d, y| d * y)?;
                    let gb = g.zip_map(self.value(a), "mul", |d, x| d * x)?;
                    accumulate(&mut grads, a, ga);
                    accumulate(&mut grads, b, gb);
                }
                Op::ScalarMul(a, s) => accumulate(&mut grads, a, g.map(|d| s * d)),
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, "tanh", |d, y| d * (1.0 - y * y))?;
                    accumulate(&mut grads, a, ga);
                }
                Op::Sin(a) => {
                    let ga = g.zip_map(self.value(a), "sin", |d, x| d * x.cos())?;
                    accumulate(&mut grads, a, ga);
                }
                Op::Cos(a) => {
                    let ga = g.zip_map(self.value(a), "cos", |d, x| -d * x.sin())?;
                    accumulate(&mut grads, a, ga);
                }
                Op::Sum(a) => {
                    let src = self.value(a);
                    accumulate(&mut grads, a, Tensor::filled(src.rows(), src.cols(), g.data()[0]));
                }
                Op::Mean(a) => {
                    let src = self.value(a);
                    let d = g.data()[0] / src.len() as f64;
                    accumulate(&mut grads, a, Tensor::filled(src.rows(), src.cols(), d));
                }
                Op::Square(a) => {
                    let ga = g.zip_map(self.value(a), "square", |d, x| 2.0 * x * d)?;
                    accumulate(&mut grads, a, ga);
                }
                Op::AddRow(a, row) => {
                    let cols = g.cols();
                    let mut col_sums = vec![0.0; cols];
                    for chunk in g.data().chunks_exact(cols.max(1)) {
                        for (s, v) in col_sums.iter_mut().zip(chunk) {
                            *s += v;
                        }
                    }
                    accumulate(&mut grads, row, Tensor::row(col_sums));
                    accumulate(&mut grads, a, g.clone());
                }
            }
            grads[id] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| g.unwrap_or_else(|| Tensor::zeros(node.value.rows(), node.value.cols())))
            .collect();
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, g: Tensor) {
    match &mut grads[var.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Sum in index order, starting from zero.
pub(crate) fn sum_ltr(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc, v| acc + v)
}

/// Output of [`Tape::backward`]: one gradient tensor per recorded node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> &Tensor {
        &self.grads[var.0]
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        std::mem::replace(&mut self.grads[var.0], Tensor::zeros(0, 0))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

impl std::ops::Index<Var> for Gradients {
    type Output = Tensor;

    fn index(&self, var: Var) -> &Tensor {
        self.get(var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn forward_examples() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let eye = tape.leaf(Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
        let p = tape.matmul(a, eye).unwrap();
        assert_eq!(tape.value(p), tape.value(a));

        let z = tape.leaf(Tensor::scalar(0.0));
        let t = tape.tanh(z);
        assert_eq!(tape.value(t).as_scalar(), Some(0.0));

        let h = tape.leaf(Tensor::scalar(FRAC_PI_2));
        let s = tape.sin(h);
        assert!((tape.value(s).as_scalar().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_examples() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(3.0));
        let sq = tape.square(w);
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g[w].as_scalar(), Some(6.0));
        assert_eq!(g[loss].as_scalar(), Some(1.0));

        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(0.0));
        let s = tape.sin(w);
        let loss = tape.sum(s);
        assert_eq!(tape.backward(loss).unwrap()[w].as_scalar(), Some(1.0));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::zeros(2, 1));
        assert!(matches!(tape.backward(w), Err(Error::NonScalarLoss(Shape(2, 1)))));
    }

    #[test]
    fn elementwise_shape_errors() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(2, 3));
        let b = tape.leaf(Tensor::zeros(3, 2));
        let err = tape.add(a, b).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch in add: 2x3 vs 3x2");
        let row = tape.leaf(Tensor::zeros(1, 2));
        let err = tape.add_row(a, row).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch in broadcast-add-row: 2x3 vs 1x2");
        assert!(tape.matmul(a, a).is_err());
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // loss = sum(w * w) uses w twice through mul.
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::row(vec![1.5, -2.0]));
        let p = tape.mul(w, w).unwrap();
        let loss = tape.sum(p);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g[w].data(), &[3.0, -4.0]);
    }

    #[test]
    fn unreached_nodes_get_zero_gradient() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(2.0));
        let unused = tape.leaf(Tensor::zeros(3, 2));
        let loss = tape.square(w);
        let after = tape.tanh(loss);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g[unused], Tensor::zeros(3, 2));
        assert_eq!(g[after], Tensor::zeros(1, 1));
        assert_eq!(g.len(), tape.len());
    }

    #[test]
    fn op_kind_names() {
        assert_eq!(OpKind::AddRow.to_string(), "broadcast-add-row");
        assert_eq!(Op::MatMul(Var(0), Var(1)).kind(), OpKind::MatMul);
        assert_eq!(Op::Tanh(Var(3)).parents(), vec![Var(3)]);
    }
}
