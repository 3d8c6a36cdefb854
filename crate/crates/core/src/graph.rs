//! Learned graph structure: node embeddings → edge probabilities → Gumbel
//! (Binary Concrete) relaxed adjacency → normalized propagation → graph
//! convolution.
//!
//! The free functions operate on plain matrices; each builds a throwaway
//! [`Tape`] and runs the same recorded code path the model trains through.

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sigmoid, Matrix};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};

pub const EMBEDDING: &str = "embedding";
pub const GCN_WEIGHT: &str = "gcn_w";

/// Learnable graph tensors: the node embedding `E` (N×d) and the graph
/// convolution weight (C'×C').
#[derive(Clone, Debug, PartialEq)]
pub struct GraphParams {
    pub embedding: Matrix,
    pub weight: Matrix,
}

impl GraphParams {
    pub fn new(embedding: Matrix, weight: Matrix) -> Result<Self> {
        if embedding.cols() == 0 {
            return Err(Error::config("embed_dim", "must be at least 1"));
        }
        if embedding.data().iter().any(|v| v.is_nan()) {
            return Err(Error::ParamsMismatch("embedding contains NaN".into()));
        }
        if weight.rows() != weight.cols() {
            return Err(Error::Shape {
                op: "GraphParams::new",
                lhs: weight.shape(),
                rhs: (weight.cols(), weight.cols()),
            });
        }
        Ok(Self { embedding, weight })
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        Self::new(store.require(EMBEDDING)?.clone(), store.require(GCN_WEIGHT)?.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyMode {
    /// Differentiable Binary Concrete sample, entries in (0, 1).
    Relaxed,
    /// Indicator of the relaxed value reaching 0.5, entries in {0, 1}.
    Hard,
}

/// Paired Gumbel(0, 1) draws for every ordered node pair.
#[derive(Clone, Debug, PartialEq)]
pub struct GumbelNoise {
    pub first: Matrix,
    pub second: Matrix,
}

impl GumbelNoise {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = Gumbel::new(0.0, 1.0).expect("standard Gumbel");
        let mut draw = || Matrix::from_fn(n, n, |_, _| g.sample(rng));
        let first = draw();
        let second = draw();
        Self { first, second }
    }

    /// Noise-free draw: the relaxed sample collapses to `σ(logit(Ω) / τ)`.
    pub fn zeros(n: usize) -> Self {
        Self {
            first: Matrix::zeros(n, n),
            second: Matrix::zeros(n, n),
        }
    }

    pub fn nodes(&self) -> usize {
        self.first.rows()
    }

    /// `n¹ − n²`, a standard logistic draw per entry.
    pub fn difference(&self) -> Matrix {
        self.first.sub(&self.second).expect("noise halves share a shape")
    }
}

#[derive(Clone, Debug)]
pub struct AdjacencySample {
    pub omega: Matrix,
    pub noise: GumbelNoise,
    pub adjacency: Matrix,
    pub propagation: Matrix,
    pub temperature: f64,
    pub mode: AdjacencyMode,
}

/// `Ω = logistic(E·Eᵀ)`: symmetric, strictly inside (0, 1) for finite `E`
/// of moderate magnitude.
pub fn edge_probabilities(embedding: &Matrix) -> Matrix {
    let mut tape = Tape::new();
    let e = tape.leaf(embedding.clone());
    let logits = edge_logits(&mut tape, e);
    let omega = tape.sigmoid(logits);
    tape.value(omega).clone()
}

/// Draws an adjacency matrix from edge probabilities `omega`:
/// `A_ij = σ((logit(Ω_ij) + n¹_ij − n²_ij) / τ)`, thresholded at 0.5 in
/// [`AdjacencyMode::Hard`].
pub fn sample_adjacency(omega: &Matrix, tau: f64, noise: &GumbelNoise, mode: AdjacencyMode) -> Result<AdjacencySample> {
    if !(tau > 0.0) {
        return Err(Error::config("tau", "temperature must be positive"));
    }
    if omega.rows() != omega.cols() || noise.nodes() != omega.rows() {
        return Err(Error::Shape {
            op: "sample_adjacency",
            lhs: omega.shape(),
            rhs: noise.first.shape(),
        });
    }
    let mut tape = Tape::new();
    let o = tape.leaf(omega.clone());
    let logits = tape.logit(o)?;
    let a = match mode {
        AdjacencyMode::Relaxed => relaxed_from_logits(&mut tape, logits, noise, tau)?,
        AdjacencyMode::Hard => hard_from_logits(&mut tape, logits, noise, tau)?,
    };
    let prop = tape.normalize_adjacency(a)?;
    Ok(AdjacencySample {
        omega: omega.clone(),
        noise: noise.clone(),
        adjacency: tape.value(a).clone(),
        propagation: tape.value(prop).clone(),
        temperature: tau,
        mode,
    })
}

/// `I + D^(−1/2)·A·D^(−1/2)` with `D_ii = Σ_j A_ij` and zero-degree rows
/// mapped to `D_ii^(−1/2) = 0`.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix> {
    let mut tape = Tape::new();
    let av = tape.leaf(a.clone());
    let prop = tape.normalize_adjacency(av)?;
    Ok(tape.value(prop).clone())
}

/// One graph convolution `(prop · x) · w` on an N×C' feature matrix.
pub fn gcn_forward(x: &Matrix, prop: &Matrix, w: &Matrix) -> Result<Matrix> {
    if prop.rows() != x.rows() {
        return Err(Error::Shape {
            op: "gcn_forward",
            lhs: prop.shape(),
            rhs: x.shape(),
        });
    }
    let mut tape = Tape::new();
    let (xv, pv, wv) = (tape.leaf(x.clone()), tape.leaf(prop.clone()), tape.leaf(w.clone()));
    let out = gcn_on_tape(&mut tape, pv, xv, wv)?;
    Ok(tape.value(out).clone())
}

pub(crate) fn edge_logits(tape: &mut Tape, embedding: Var) -> Var {
    let et = tape.transpose(embedding);
    tape.matmul(embedding, et).expect("E·Eᵀ always conforms")
}

pub(crate) fn relaxed_from_logits(tape: &mut Tape, logits: Var, noise: &GumbelNoise, tau: f64) -> Result<Var> {
    let n = tape.leaf(noise.difference());
    let shifted = tape.add(logits, n)?;
    let scaled = tape.scale(shifted, 1.0 / tau);
    Ok(tape.sigmoid(scaled))
}

/// The hard sample is piecewise constant in the logits, so it enters the tape
/// as a constant leaf.
pub(crate) fn hard_from_logits(tape: &mut Tape, logits: Var, noise: &GumbelNoise, tau: f64) -> Result<Var> {
    let l = tape.value(logits);
    let d = noise.difference();
    l.expect_same_shape(&d, "hard_from_logits")?;
    let hard = l.zip_map(&d, "hard_from_logits", |l, n| {
        if sigmoid((l + n) / tau) >= 0.5 {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(tape.leaf(hard))
}

/// Graph convolution over a batch stacked as consecutive N-row blocks.
pub(crate) fn gcn_on_tape(tape: &mut Tape, prop: Var, x: Var, w: Var) -> Result<Var> {
    let mixed = tape.block_left_mul(prop, x)?;
    tape.matmul(mixed, w)
}
