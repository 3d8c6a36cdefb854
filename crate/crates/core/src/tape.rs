//! Reverse-mode differentiation over matrix-valued operations.
//!
//! A [`Tape`] records every operation of one forward pass in execution order.
//! Inputs always precede their consumers, so walking the node list backwards is
//! a valid reverse topological order and each node is visited exactly once.
//!
//! A tape is single-threaded and is meant to live for one training step.

use crate::error::{Error, Result};
use crate::matrix::{gemm_acc, sigmoid, softmax_in_place, Matrix, View};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRowBias(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Logit(Var),
    RowSoftmax(Var),
    BlockColSoftmax(Var, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    BlockLeftMul(Var, Var),
    NormalizeAdjacency(Var),
    MeanSquaredError(Var, Var),
    SumSquares(Var),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
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

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    /// `x + 1·b` where `b` is a single row broadcast over the rows of `x`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(shape_err("add_row_bias", xv, bv));
        }
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (o, b) in value.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(value, Op::AddRowBias(x, bias)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).scale(k);
        self.push(value, Op::Scale(a, k))
    }

    /// `1 - a` elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| 1.0 - v);
        self.push(value, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    /// `ln(p / (1 - p))`; every entry must lie strictly inside (0, 1).
    pub fn logit(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        for r in 0..av.rows() {
            for c in 0..av.cols() {
                let p = av.get(r, c);
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::Domain { row: r, col: c, value: p });
                }
            }
        }
        let value = av.map(|p| (p / (1.0 - p)).ln());
        Ok(self.push(value, Op::Logit(a)))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let value = crate::matrix::row_softmax(self.value(a));
        self.push(value, Op::RowSoftmax(a))
    }

    /// Softmax down each column, separately inside every run of `block`
    /// consecutive rows.
    pub fn block_col_softmax(&mut self, a: Var, block: usize) -> Result<Var> {
        let av = self.value(a);
        if block == 0 || av.rows() % block != 0 {
            return Err(Error::Shape {
                op: "block_col_softmax",
                lhs: av.shape(),
                rhs: (block, 1),
            });
        }
        let mut value = av.clone();
        let cols = value.cols();
        let mut column = vec![0.0; block];
        for start in (0..value.rows()).step_by(block) {
            for c in 0..cols {
                for (i, slot) in column.iter_mut().enumerate() {
                    *slot = value.get(start + i, c);
                }
                softmax_in_place(&mut column);
                for (i, v) in column.iter().enumerate() {
                    value.set(start + i, c, *v);
                }
            }
        }
        Ok(self.push(value, Op::BlockColSoftmax(a, block)))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&v| self.value(v)).collect();
        let value = Matrix::concat_rows(&mats)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        if start + len > av.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                lhs: av.shape(),
                rhs: (start, len),
            });
        }
        let value = av.slice_rows(start, len);
        Ok(self.push(value, Op::SliceRows(a, start)))
    }

    /// Applies the square matrix `p` (n×n) to every consecutive n-row block of
    /// `x`, i.e. `blockdiag(p, …, p) · x` without building the block diagonal.
    pub fn block_left_mul(&mut self, p: Var, x: Var) -> Result<Var> {
        let (pv, xv) = (self.value(p), self.value(x));
        let n = pv.rows();
        if pv.cols() != n || n == 0 || xv.rows() % n != 0 {
            return Err(shape_err("block_left_mul", pv, xv));
        }
        let cols = xv.cols();
        let mut value = Matrix::zeros(xv.rows(), cols);
        let block = n * cols;
        for (xb, yb) in xv.data().chunks(block).zip(value.data_mut().chunks_mut(block)) {
            gemm_acc(View::of(pv), View::new(xb, n, cols), yb);
        }
        Ok(self.push(value, Op::BlockLeftMul(p, x)))
    }

    /// `I + D^(-1/2) A D^(-1/2)` with `D_ii = Σ_j A_ij`; rows with zero degree
    /// get `D_ii^(-1/2) = 0`.
    pub fn normalize_adjacency(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.rows() != av.cols() {
            return Err(shape_err("normalize_adjacency", av, av));
        }
        let value = normalized(av, &inv_sqrt_degrees(av));
        Ok(self.push(value, Op::NormalizeAdjacency(a)))
    }

    /// Mean of squared differences over all entries, as a 1x1 node.
    pub fn mean_squared_error(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.expect_same_shape(bv, "mean_squared_error")?;
        let n = av.len().max(1) as f64;
        let total: f64 = av.data().iter().zip(bv.data()).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok(self.push(Matrix::scalar(total / n), Op::MeanSquaredError(a, b)))
    }

    pub fn sum_squares(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum_squares());
        self.push(value, Op::SumSquares(a))
    }

    /// Back-propagates from a 1x1 root. Nodes the root does not depend on end
    /// up with zero gradients.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rv = self.value(root);
        if rv.shape() != (1, 1) {
            return Err(Error::NonScalarRoot {
                rows: rv.rows(),
                cols: rv.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate_with(grads, *a, av.shape(), |acc| {
                    gemm_acc(View::of(g), View::of(bv).t(), acc.data_mut())
                });
                accumulate_with(grads, *b, bv.shape(), |acc| {
                    gemm_acc(View::of(av).t(), View::of(g), acc.data_mut())
                });
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                accumulate_ref(grads, *a, g);
                accumulate_ref(grads, *b, g);
            }
            Op::Sub(a, b) => {
                accumulate_ref(grads, *a, g);
                accumulate(grads, *b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                accumulate(grads, *a, zip(g, bv, |g, b| g * b));
                accumulate(grads, *b, zip(g, av, |g, a| g * a));
            }
            Op::AddRowBias(x, b) => {
                accumulate_ref(grads, *x, g);
                let mut db = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (d, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                accumulate(grads, *b, db);
            }
            Op::Scale(a, k) => accumulate(grads, *a, g.scale(*k)),
            Op::OneMinus(a) => accumulate(grads, *a, g.scale(-1.0)),
            Op::Sigmoid(a) => accumulate(grads, *a, zip(g, y, |g, s| g * s * (1.0 - s))),
            Op::Tanh(a) => accumulate(grads, *a, zip(g, y, |g, t| g * (1.0 - t * t))),
            Op::Relu(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, zip(g, av, |g, x| if x > 0.0 { g } else { 0.0 }))
            }
            Op::Logit(a) => {
                let av = self.value(*a);
                accumulate(grads, *a, zip(g, av, |g, p| g / (p * (1.0 - p))))
            }
            Op::RowSoftmax(a) => {
                let mut da = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(s, d)| s * d).sum();
                    for ((o, s), d) in da.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = s * (d - dot);
                    }
                }
                accumulate(grads, *a, da);
            }
            Op::BlockColSoftmax(a, block) => {
                let mut da = Matrix::zeros(y.rows(), y.cols());
                for start in (0..y.rows()).step_by(*block) {
                    for c in 0..y.cols() {
                        let dot: f64 = (start..start + block).map(|r| y.get(r, c) * g.get(r, c)).sum();
                        for r in start..start + block {
                            da.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                }
                accumulate(grads, *a, da);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.value(p).rows();
                    accumulate(grads, p, g.slice_rows(offset, rows));
                    offset += rows;
                }
            }
            Op::SliceRows(a, start) => {
                let av = self.value(*a);
                accumulate_with(grads, *a, av.shape(), |acc| {
                    let cols = av.cols();
                    let dst = &mut acc.data_mut()[start * cols..start * cols + g.len()];
                    for (d, v) in dst.iter_mut().zip(g.data()) {
                        *d += v;
                    }
                });
            }
            Op::BlockLeftMul(p, x) => {
                let (pv, xv) = (self.value(*p), self.value(*x));
                let n = pv.rows();
                let cols = xv.cols();
                let block = n * cols;
                accumulate_with(grads, *p, pv.shape(), |acc| {
                    for (gb, xb) in g.data().chunks(block).zip(xv.data().chunks(block)) {
                        gemm_acc(View::new(gb, n, cols), View::new(xb, n, cols).t(), acc.data_mut());
                    }
                });
                accumulate_with(grads, *x, xv.shape(), |acc| {
                    for (gb, ob) in g.data().chunks(block).zip(acc.data_mut().chunks_mut(block)) {
                        gemm_acc(View::of(pv).t(), View::new(gb, n, cols), ob);
                    }
                });
            }
            Op::NormalizeAdjacency(a) => {
                let av = self.value(*a);
                let d = inv_sqrt_degrees(av);
                let n = av.rows();
                // dA_kl = G_kl d_k d_l - ½ d_k³ q_k,
                // q_k = Σ_j G_kj A_kj d_j + Σ_i G_ik A_ik d_i.
                let mut q = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let w = g.get(i, j) * av.get(i, j);
                        q[i] += w * d[j];
                        q[j] += w * d[i];
                    }
                }
                let da = Matrix::from_fn(n, n, |k, l| g.get(k, l) * d[k] * d[l] - 0.5 * d[k].powi(3) * q[k]);
                accumulate(grads, *a, da);
            }
            Op::MeanSquaredError(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let k = 2.0 * g.get(0, 0) / av.len().max(1) as f64;
                let diff = zip(av, bv, |x, y| k * (x - y));
                accumulate(grads, *b, diff.scale(-1.0));
                accumulate(grads, *a, diff);
            }
            Op::SumSquares(a) => {
                let k = 2.0 * g.get(0, 0);
                accumulate(grads, *a, self.value(*a).scale(k));
            }
        }
    }
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    a.zip_map(b, "backward", f).expect("backward shapes follow forward shapes")
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, delta: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&delta).expect("gradient shape"),
        slot @ None => *slot = Some(delta),
    }
}

fn accumulate_ref(grads: &mut [Option<Matrix>], v: Var, delta: &Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(delta).expect("gradient shape"),
        slot @ None => *slot = Some(delta.clone()),
    }
}

fn accumulate_with(grads: &mut [Option<Matrix>], v: Var, shape: (usize, usize), f: impl FnOnce(&mut Matrix)) {
    let acc = grads[v.0].get_or_insert_with(|| Matrix::zeros(shape.0, shape.1));
    f(acc);
}

pub(crate) fn inv_sqrt_degrees(a: &Matrix) -> Vec<f64> {
    (0..a.rows())
        .map(|i| {
            let s: f64 = a.row(i).iter().sum();
            if s > 0.0 {
                1.0 / s.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

pub(crate) fn normalized(a: &Matrix, d: &[f64]) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        let off = d[i] * a.get(i, j) * d[j];
        if i == j {
            1.0 + off
        } else {
            off
        }
    })
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` when `v` does not influence the
    /// root.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, materializing zeros of `shape` when `v`
    /// is off the path.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v).cloned().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Central differences on the single input of a tape-built scalar function.
    fn check_unary(input: Matrix, build: impl Fn(&mut Tape, Var) -> Var) {
        let mut tape = Tape::new();
        let x = tape.leaf(input.clone());
        let root = build(&mut tape, x);
        let analytic = tape.backward(root).unwrap().get_or_zeros(x, input.shape());

        let eval = |m: Matrix| {
            let mut t = Tape::new();
            let x = t.leaf(m);
            let r = build(&mut t, x);
            t.value(r).get(0, 0)
        };
        let eps = 1e-5;
        let mut numeric = Matrix::zeros(input.rows(), input.cols());
        for i in 0..input.len() {
            let mut plus = input.clone();
            plus.data_mut()[i] += eps;
            let mut minus = input.clone();
            minus.data_mut()[i] -= eps;
            numeric.data_mut()[i] = (eval(plus) - eval(minus)) / (2.0 * eps);
        }
        let err = analytic.sub(&numeric).unwrap().max_abs() / numeric.max_abs().max(1.0);
        assert!(err <= 1e-6, "relative error {err}");
    }

    /// Reduces a matrix to a scalar with a fixed random weighting, so every
    /// output entry receives a distinct upstream gradient.
    fn weighted_sum(t: &mut Tape, y: Var, seed: u64) -> Var {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = t.value(y).shape();
        let w = t.leaf(random(shape.0, shape.1, &mut rng));
        let prod = t.mul(y, w).unwrap();
        let half = t.scale(prod, 0.5);
        let zero = t.leaf(Matrix::zeros(shape.0, shape.1));
        let mse = t.mean_squared_error(half, zero).unwrap();
        let s = t.sum_squares(prod);
        t.add(mse, s).unwrap()
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let p = tape.leaf(Matrix::scalar(3.0));
        let root = tape.sum_squares(p);
        let g = tape.backward(root).unwrap();
        assert_eq!(g.get(p).unwrap().get(0, 0), 6.0);
    }

    #[test]
    fn disconnected_leaf_gets_zero() {
        let mut tape = Tape::new();
        let p = tape.leaf(Matrix::scalar(3.0));
        let q = tape.leaf(Matrix::scalar(2.0));
        let root = tape.sum_squares(q);
        let g = tape.backward(root).unwrap();
        assert!(g.get(p).is_none());
        assert_eq!(g.get_or_zeros(p, (1, 1)), Matrix::zeros(1, 1));
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut tape = Tape::new();
        let p = tape.leaf(Matrix::zeros(2, 2));
        assert!(matches!(tape.backward(p), Err(Error::NonScalarRoot { rows: 2, cols: 2 })));
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(3, 4, &mut rng);
        check_unary(x.clone(), |t, v| {
            let y = t.sigmoid(v);
            weighted_sum(t, y, 1)
        });
        check_unary(x.clone(), |t, v| {
            let y = t.tanh(v);
            weighted_sum(t, y, 2)
        });
        check_unary(x.clone(), |t, v| {
            let y = t.relu(v);
            weighted_sum(t, y, 3)
        });
        check_unary(x.clone(), |t, v| {
            let y = t.one_minus(v);
            let y = t.scale(y, 1.7);
            weighted_sum(t, y, 4)
        });
        let p = x.map(|v| 0.5 + 0.4 * v);
        check_unary(p, |t, v| {
            let y = t.logit(v).unwrap();
            weighted_sum(t, y, 5)
        });
    }

    #[test]
    fn structural_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(4, 3, &mut rng);
        let other = random(3, 5, &mut rng);
        check_unary(x.clone(), |t, v| {
            let w = t.leaf(other.clone());
            let y = t.matmul(v, w).unwrap();
            let vt = t.transpose(v);
            let z = t.matmul(vt, v).unwrap();
            let a = weighted_sum(t, y, 6);
            let b = weighted_sum(t, z, 7);
            t.add(a, b).unwrap()
        });
        check_unary(x.clone(), |t, v| {
            let y = t.row_softmax(v);
            weighted_sum(t, y, 8)
        });
        check_unary(x.clone(), |t, v| {
            let y = t.block_col_softmax(v, 2).unwrap();
            weighted_sum(t, y, 9)
        });
        check_unary(x.clone(), |t, v| {
            let top = t.slice_rows(v, 0, 1).unwrap();
            let rest = t.slice_rows(v, 1, 3).unwrap();
            let y = t.concat_rows(&[rest, v, top]).unwrap();
            weighted_sum(t, y, 10)
        });
        let bias = random(1, 3, &mut rng);
        check_unary(bias, |t, b| {
            let xs = t.leaf(x.clone());
            let y = t.add_row_bias(xs, b).unwrap();
            let y = t.mul(y, y).unwrap();
            weighted_sum(t, y, 11)
        });
    }

    #[test]
    fn block_left_mul_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random(3, 3, &mut rng);
        let x = random(6, 2, &mut rng);
        let xc = x.clone();
        check_unary(p.clone(), move |t, pv| {
            let xv = t.leaf(xc.clone());
            let y = t.block_left_mul(pv, xv).unwrap();
            weighted_sum(t, y, 12)
        });
        check_unary(x, move |t, xv| {
            let pv = t.leaf(p.clone());
            let y = t.block_left_mul(pv, xv).unwrap();
            weighted_sum(t, y, 13)
        });
    }

    #[test]
    fn block_left_mul_equals_per_block_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random(3, 3, &mut rng);
        let x = random(9, 4, &mut rng);
        let mut t = Tape::new();
        let (pv, xv) = (t.leaf(p.clone()), t.leaf(x.clone()));
        let y = t.block_left_mul(pv, xv).unwrap();
        for b in 0..3 {
            let expect = p.matmul(&x.slice_rows(3 * b, 3)).unwrap();
            let got = t.value(y).slice_rows(3 * b, 3);
            assert!(expect.sub(&got).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn normalize_adjacency_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Matrix::from_fn(4, 4, |_, _| rng.random_range(0.05..1.0));
        check_unary(a, |t, v| {
            let y = t.normalize_adjacency(v).unwrap();
            weighted_sum(t, y, 14)
        });
    }

    #[test]
    fn mse_gradient_on_both_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random(2, 3, &mut rng);
        let b = random(2, 3, &mut rng);
        let bc = b.clone();
        check_unary(a.clone(), move |t, v| {
            let bv = t.leaf(bc.clone());
            t.mean_squared_error(v, bv).unwrap()
        });
        check_unary(b, move |t, v| {
            let av = t.leaf(a.clone());
            t.mean_squared_error(av, v).unwrap()
        });
    }

    #[test]
    fn logit_rejects_boundary() {
        let mut t = Tape::new();
        let p = t.leaf(Matrix::from_rows(&[[0.5, 1.0]]));
        assert!(matches!(t.logit(p), Err(Error::Domain { row: 0, col: 1, .. })));
    }
}
