//! Comparison models: persistence, graph convolution feeding an LSTM, GRU or
//! causal temporal convolution stack, and the ablated STLGRU variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cell::two_linear;
use crate::data::SeriesTensor;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Architecture, GraphMode, Model, ModelConfig};
use crate::params::BoundParams;
use crate::tape::{Tape, Var};

pub const LSTM_NAMES: [&str; 8] = ["w_i", "u_i", "w_f", "u_f", "w_o", "u_o", "w_c", "u_c"];
/// Two causal layers, each with a kernel tap for `t` and one for `t − dilation`.
pub const TCN_KERNELS: [&str; 4] = ["tcn1_k0", "tcn1_k1", "tcn2_k0", "tcn2_k1"];
pub const TCN_BIASES: [&str; 2] = ["tcn1_b", "tcn2_b"];
pub const TCN_DILATIONS: [usize; 2] = [1, 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Persistence,
    GcnTcn,
    GcnLstm,
    GcnGru,
    StlgruNoMaa,
    StlgruNoGumbel,
    StlgruNoBoth,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Persistence,
        BaselineKind::GcnTcn,
        BaselineKind::GcnLstm,
        BaselineKind::GcnGru,
        BaselineKind::StlgruNoMaa,
        BaselineKind::StlgruNoGumbel,
        BaselineKind::StlgruNoBoth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Persistence => "persistence",
            BaselineKind::GcnTcn => "gcn_tcn",
            BaselineKind::GcnLstm => "gcn_lstm",
            BaselineKind::GcnGru => "gcn_gru",
            BaselineKind::StlgruNoMaa => "stlgru_no_maa",
            BaselineKind::StlgruNoGumbel => "stlgru_no_gumbel",
            BaselineKind::StlgruNoBoth => "stlgru_no_both",
        }
    }

    /// The model configuration for this variant, keeping every size from `base`.
    pub fn configure(self, base: &ModelConfig) -> ModelConfig {
        let (architecture, use_gumbel, use_maa) = match self {
            BaselineKind::Persistence => (Architecture::Persistence, base.use_gumbel, false),
            BaselineKind::GcnTcn => (Architecture::GcnTcn, true, false),
            BaselineKind::GcnLstm => (Architecture::GcnLstm, true, false),
            BaselineKind::GcnGru => (Architecture::GcnGru, true, false),
            BaselineKind::StlgruNoMaa => (Architecture::Stlgru, true, false),
            BaselineKind::StlgruNoGumbel => (Architecture::Stlgru, false, true),
            BaselineKind::StlgruNoBoth => (Architecture::Stlgru, false, false),
        };
        ModelConfig {
            architecture,
            use_gumbel,
            use_maa,
            ..base.clone()
        }
    }

    /// Recognizes a configuration as one of the variants, if it is one.
    pub fn of(config: &ModelConfig) -> Option<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.configure(config) == *config)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("kind", format!("unknown baseline `{s}`")))
    }
}

/// Repeats each node's last observed value (channel 0) across the horizon.
pub fn persistence_forecast(window: &SeriesTensor, horizon: usize) -> Result<Matrix> {
    if window.steps() == 0 || window.nodes() == 0 {
        return Err(Error::SeriesTooShort {
            len: window.steps(),
            reason: "persistence needs at least one observed step".into(),
        });
    }
    let last = window.steps() - 1;
    Ok(Matrix::from_fn(window.nodes(), horizon, |n, _| window.get(last, n, 0)))
}

/// Evaluation-mode forecast of a model that must be configured as `kind`.
pub fn baseline_forward(window: &SeriesTensor, kind: BaselineKind, model: &Model) -> Result<Matrix> {
    let expected = kind.configure(&model.config);
    if expected != model.config {
        return Err(Error::ParamsMismatch(format!(
            "model is configured as {} (gumbel {}, maa {}), not {kind}",
            model.config.architecture, model.config.use_gumbel, model.config.use_maa
        )));
    }
    if kind == BaselineKind::Persistence {
        return persistence_forecast(window, model.config.horizon);
    }
    model.forecast(window, GraphMode::Hard)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LstmVars {
    w: [Var; 4],
    u: [Var; 4],
}

impl LstmVars {
    pub fn lookup(bound: &BoundParams) -> Result<Self> {
        let at = |i: usize| bound.var(LSTM_NAMES[i]);
        Ok(Self {
            w: [at(0)?, at(2)?, at(4)?, at(6)?],
            u: [at(1)?, at(3)?, at(5)?, at(7)?],
        })
    }
}

/// Textbook LSTM step without biases; returns `(h, c)`.
pub(crate) fn lstm_on_tape(tape: &mut Tape, x: Var, h: Var, c: Var, v: &LstmVars) -> Result<(Var, Var)> {
    let pre = (0..4)
        .map(|k| two_linear(tape, x, v.w[k], h, v.u[k]))
        .collect::<Result<Vec<_>>>()?;
    let input = tape.sigmoid(pre[0]);
    let forget = tape.sigmoid(pre[1]);
    let output = tape.sigmoid(pre[2]);
    let cand = tape.tanh(pre[3]);
    let kept = tape.mul(forget, c)?;
    let added = tape.mul(input, cand)?;
    let c_next = tape.add(kept, added)?;
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(output, squashed)?;
    Ok((h_next, c_next))
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct TcnVars {
    k0: [Var; 2],
    k1: [Var; 2],
    b: [Var; 2],
}

impl TcnVars {
    pub fn lookup(bound: &BoundParams) -> Result<Self> {
        Ok(Self {
            k0: [bound.var(TCN_KERNELS[0])?, bound.var(TCN_KERNELS[2])?],
            k1: [bound.var(TCN_KERNELS[1])?, bound.var(TCN_KERNELS[3])?],
            b: [bound.var(TCN_BIASES[0])?, bound.var(TCN_BIASES[1])?],
        })
    }
}

/// Two causal width-2 convolutions over time (dilations 1 and 2, zero
/// padding on the left, ReLU after each). Returns the last step's features.
pub(crate) fn tcn_on_tape(tape: &mut Tape, seq: &[Var], v: &TcnVars) -> Result<Var> {
    let mut layer: Vec<Var> = seq.to_vec();
    for (l, &dilation) in TCN_DILATIONS.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.len());
        for t in 0..layer.len() {
            let mut pre = tape.matmul(layer[t], v.k0[l])?;
            if t >= dilation {
                let past = tape.matmul(layer[t - dilation], v.k1[l])?;
                pre = tape.add(pre, past)?;
            }
            let pre = tape.add_row_bias(pre, v.b[l])?;
            next.push(tape.relu(pre));
        }
        layer = next;
    }
    layer
        .last()
        .copied()
        .ok_or_else(|| Error::config("input_len", "temporal convolution needs at least one step"))
}
