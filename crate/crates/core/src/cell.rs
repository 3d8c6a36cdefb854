//! The recurrent cell: input projection, memory-augmented attention over the
//! graph-convolved input and the previous memory, and the gated memory update.
//!
//! All states are laid out one node per row (N×C'), and a minibatch is the
//! vertical stack of its windows, so every weight multiplies from the right.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::{BoundParams, ParamStore};
use crate::tape::{Tape, Var};

pub const PROJ: &str = "proj";
pub const PSI: &str = "psi";
pub const GATE_NAMES: [&str; 6] = ["w_z", "u_z", "w_r", "u_r", "w_h", "u_h"];

/// Axis along which attention scores are normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionAxis {
    /// Each of the 2N rows of `M·ψ` is normalized over its C' features.
    #[default]
    Feature,
    /// Each feature column is normalized over the N nodes, separately for the
    /// graph half and the memory half.
    Node,
}

/// The six C'×C' gate matrices of the memory update.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub w_h: Matrix,
    pub u_h: Matrix,
}

impl GateParams {
    pub fn zeros(hidden: usize) -> Self {
        let z = || Matrix::zeros(hidden, hidden);
        Self {
            w_z: z(),
            u_z: z(),
            w_r: z(),
            u_r: z(),
            w_h: z(),
            u_h: z(),
        }
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let g = |n: &str| store.require(n).cloned();
        Ok(Self {
            w_z: g("w_z")?,
            u_z: g("u_z")?,
            w_r: g("w_r")?,
            u_r: g("u_r")?,
            w_h: g("w_h")?,
            u_h: g("u_h")?,
        })
    }

    fn bind(&self, tape: &mut Tape) -> GateVars {
        GateVars {
            w_z: tape.leaf(self.w_z.clone()),
            u_z: tape.leaf(self.u_z.clone()),
            w_r: tape.leaf(self.w_r.clone()),
            u_r: tape.leaf(self.u_r.clone()),
            w_h: tape.leaf(self.w_h.clone()),
            u_h: tape.leaf(self.u_h.clone()),
        }
    }
}

/// Projection, attention and gate weights of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams {
    pub proj: Matrix,
    pub psi: Matrix,
    pub gates: GateParams,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GateVars {
    pub w_z: Var,
    pub u_z: Var,
    pub w_r: Var,
    pub u_r: Var,
    pub w_h: Var,
    pub u_h: Var,
}

impl GateVars {
    pub fn lookup(bound: &BoundParams) -> Result<Self> {
        Ok(Self {
            w_z: bound.var("w_z")?,
            u_z: bound.var("u_z")?,
            w_r: bound.var("w_r")?,
            u_r: bound.var("u_r")?,
            w_h: bound.var("w_h")?,
            u_h: bound.var("u_h")?,
        })
    }
}

/// Intermediate tensors of one attention pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionContext {
    /// Graph output stacked above the previous memory (2N×C').
    pub m: Matrix,
    /// Normalized scores (2N×C').
    pub p: Matrix,
    pub p_s: Matrix,
    pub p_t: Matrix,
    pub a_s: Matrix,
    pub a_t: Matrix,
    /// `a_s + a_t`.
    pub j_z: Matrix,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct AttentionVars {
    pub m: Var,
    pub p: Var,
    pub p_s: Var,
    pub p_t: Var,
    pub a_s: Var,
    pub a_t: Var,
    pub j_z: Var,
}

/// `X_t = x_raw · proj`, lifting C_in input channels to C' features.
pub fn project_input(x_raw: &Matrix, proj: &Matrix) -> Result<Matrix> {
    x_raw.matmul(proj)
}

/// Memory-augmented attention with feature-axis scores.
pub fn maa_forward(j_r: &Matrix, h_prev: &Matrix, psi: &Matrix) -> Result<AttentionContext> {
    maa_forward_with_axis(j_r, h_prev, psi, AttentionAxis::Feature)
}

pub fn maa_forward_with_axis(j_r: &Matrix, h_prev: &Matrix, psi: &Matrix, axis: AttentionAxis) -> Result<AttentionContext> {
    let mut tape = Tape::new();
    let (jv, hv, pv) = (tape.leaf(j_r.clone()), tape.leaf(h_prev.clone()), tape.leaf(psi.clone()));
    let ctx = maa_on_tape(&mut tape, jv, hv, pv, axis, j_r.rows())?;
    let v = |x: Var| tape.value(x).clone();
    Ok(AttentionContext {
        m: v(ctx.m),
        p: v(ctx.p),
        p_s: v(ctx.p_s),
        p_t: v(ctx.p_t),
        a_s: v(ctx.a_s),
        a_t: v(ctx.a_t),
        j_z: v(ctx.j_z),
    })
}

/// Gated memory update:
///
/// ```text
/// g  = σ(j_z·W_z + h·U_z)
/// r  = σ(j_r·W_r + h·U_r)
/// h̃  = tanh(x·W_h + r ⊙ (h·U_h))
/// h' = g ⊙ h + (1 − g) ⊙ h̃
/// ```
pub fn gru_update(x_t: &Matrix, j_r: &Matrix, j_z: &Matrix, h_prev: &Matrix, gates: &GateParams) -> Result<Matrix> {
    let mut tape = Tape::new();
    let (xv, jr, jz, hv) = (
        tape.leaf(x_t.clone()),
        tape.leaf(j_r.clone()),
        tape.leaf(j_z.clone()),
        tape.leaf(h_prev.clone()),
    );
    let g = gates.bind(&mut tape);
    let h = gru_on_tape(&mut tape, xv, jr, jz, hv, &g)?;
    Ok(tape.value(h).clone())
}

/// Mean squared residual over every entry.
pub fn loss(y_hat: &Matrix, y_true: &Matrix) -> Result<f64> {
    let mut tape = Tape::new();
    let (a, b) = (tape.leaf(y_hat.clone()), tape.leaf(y_true.clone()));
    let l = tape.mean_squared_error(a, b)?;
    Ok(tape.value(l).get(0, 0))
}

/// `a·w + b·u`.
pub(crate) fn two_linear(tape: &mut Tape, a: Var, w: Var, b: Var, u: Var) -> Result<Var> {
    let left = tape.matmul(a, w)?;
    let right = tape.matmul(b, u)?;
    tape.add(left, right)
}

/// `block` is the node count N: node-axis scores normalize inside each run of
/// N rows, i.e. per window and per half of `M`.
pub(crate) fn maa_on_tape(
    tape: &mut Tape,
    j_r: Var,
    h_prev: Var,
    psi: Var,
    axis: AttentionAxis,
    block: usize,
) -> Result<AttentionVars> {
    let rows = tape.value(j_r).rows();
    if tape.value(h_prev).shape() != tape.value(j_r).shape() {
        return Err(Error::Shape {
            op: "maa_forward",
            lhs: tape.value(j_r).shape(),
            rhs: tape.value(h_prev).shape(),
        });
    }
    let m = tape.concat_rows(&[j_r, h_prev])?;
    let scores = tape.matmul(m, psi)?;
    let p = match axis {
        AttentionAxis::Feature => tape.row_softmax(scores),
        AttentionAxis::Node => tape.block_col_softmax(scores, block)?,
    };
    let p_s = tape.slice_rows(p, 0, rows)?;
    let p_t = tape.slice_rows(p, rows, rows)?;
    let a_s = tape.mul(p_s, j_r)?;
    let a_t = tape.mul(p_t, h_prev)?;
    let j_z = tape.add(a_s, a_t)?;
    Ok(AttentionVars {
        m,
        p,
        p_s,
        p_t,
        a_s,
        a_t,
        j_z,
    })
}

/// `candidate_in` feeds the candidate state (the projected input for the
/// full cell, the graph output for a plain graph GRU).
pub(crate) fn gru_on_tape(
    tape: &mut Tape,
    candidate_in: Var,
    j_r: Var,
    j_z: Var,
    h_prev: Var,
    g: &GateVars,
) -> Result<Var> {
    let z_pre = two_linear(tape, j_z, g.w_z, h_prev, g.u_z)?;
    let update = tape.sigmoid(z_pre);
    let r_pre = two_linear(tape, j_r, g.w_r, h_prev, g.u_r)?;
    let reset = tape.sigmoid(r_pre);
    let hu = tape.matmul(h_prev, g.u_h)?;
    let gated = tape.mul(reset, hu)?;
    let xw = tape.matmul(candidate_in, g.w_h)?;
    let c_pre = tape.add(xw, gated)?;
    let candidate = tape.tanh(c_pre);
    let keep = tape.mul(update, h_prev)?;
    let inv = tape.one_minus(update);
    let fresh = tape.mul(inv, candidate)?;
    tape.add(keep, fresh)
}
