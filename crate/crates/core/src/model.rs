//! Model configuration, parameter layout and the sequential forecast loop.
//!
//! One forward pass samples (or thresholds) the graph once, runs the chosen
//! recurrent stage over the T input steps, and maps the final memory to T'
//! predictions with a two-layer head: `ReLU(H·W1 + b1)·W2 + b2`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::baselines::{lstm_on_tape, tcn_on_tape, LstmVars, TcnVars, LSTM_NAMES, TCN_BIASES, TCN_KERNELS};
use crate::cell::{gru_on_tape, maa_on_tape, AttentionAxis, GateVars, GATE_NAMES, PROJ, PSI};
use crate::data::SeriesTensor;
use crate::error::{Error, Result};
use crate::graph::{edge_logits, gcn_on_tape, hard_from_logits, relaxed_from_logits, GumbelNoise, EMBEDDING, GCN_WEIGHT};
use crate::matrix::Matrix;
use crate::params::{gradient_of_scalar, BoundParams, GradientSet, ParamStore};
use crate::tape::{Tape, Var};

pub const HEAD_W1: &str = "head_w1";
pub const HEAD_B1: &str = "head_b1";
pub const HEAD_W2: &str = "head_w2";
pub const HEAD_B2: &str = "head_b2";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Graph convolution + attention + synchronized gated memory.
    #[default]
    Stlgru,
    /// Graph convolution feeding a standard GRU.
    GcnGru,
    /// Graph convolution feeding a standard LSTM.
    GcnLstm,
    /// Graph convolution per step, then a causal temporal convolution stack.
    GcnTcn,
    /// Repeats the last observation; no parameters.
    Persistence,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Stlgru,
        Architecture::GcnGru,
        Architecture::GcnLstm,
        Architecture::GcnTcn,
        Architecture::Persistence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Stlgru => "stlgru",
            Architecture::GcnGru => "gcn_gru",
            Architecture::GcnLstm => "gcn_lstm",
            Architecture::GcnTcn => "gcn_tcn",
            Architecture::Persistence => "persistence",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("model", format!("unknown model `{s}`")))
    }
}

/// Initial memory `H_0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HiddenInit {
    #[default]
    Zeros,
    Gaussian(f64),
}

impl fmt::Display for HiddenInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HiddenInit::Zeros => f.write_str("zeros"),
            HiddenInit::Gaussian(s) => write!(f, "gaussian({s})"),
        }
    }
}

impl FromStr for HiddenInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("hidden_init", format!("expected `zeros` or `gaussian(<std>)`, got `{s}`"));
        if s == "zeros" {
            return Ok(HiddenInit::Zeros);
        }
        let inner = s
            .strip_prefix("gaussian(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let std: f64 = inner.trim().parse().map_err(|_| bad())?;
        if !(std >= 0.0) {
            return Err(bad());
        }
        Ok(HiddenInit::Gaussian(std))
    }
}

impl TryFrom<String> for HiddenInit {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<HiddenInit> for String {
    fn from(h: HiddenInit) -> String {
        h.to_string()
    }
}

impl HiddenInit {
    pub fn initial_state<R: Rng + ?Sized>(&self, rows: usize, hidden: usize, rng: &mut R) -> Matrix {
        match *self {
            HiddenInit::Zeros => Matrix::zeros(rows, hidden),
            HiddenInit::Gaussian(std) => Matrix::from_fn(rows, hidden, |_, _| {
                let z: f64 = StandardNormal.sample(rng);
                std * z
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// N.
    pub nodes: usize,
    /// Raw input channels C_in.
    pub in_channels: usize,
    /// C'.
    pub hidden_dim: usize,
    /// Node embedding width d.
    pub embed_dim: usize,
    /// T.
    pub input_len: usize,
    /// T'.
    pub horizon: usize,
    /// Gumbel relaxation temperature τ.
    pub tau: f64,
    pub use_gumbel: bool,
    pub use_maa: bool,
    pub attention_axis: AttentionAxis,
    pub hidden_init: HiddenInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Stlgru,
            nodes: 20,
            in_channels: 1,
            hidden_dim: 64,
            embed_dim: 10,
            input_len: 12,
            horizon: 12,
            tau: 0.5,
            use_gumbel: true,
            use_maa: true,
            attention_axis: AttentionAxis::Feature,
            hidden_init: HiddenInit::Zeros,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nodes", self.nodes),
            ("in_channels", self.in_channels),
            ("hidden_dim", self.hidden_dim),
            ("embed_dim", self.embed_dim),
            ("input_len", self.input_len),
            ("horizon", self.horizon),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau", "must be a positive finite number"));
        }
        Ok(())
    }

    /// Whether the attention block is live (only the full cell has one).
    pub fn attention_enabled(&self) -> bool {
        self.architecture == Architecture::Stlgru && self.use_maa
    }

    fn has_graph(&self) -> bool {
        self.architecture != Architecture::Persistence
    }

    /// Every live parameter tensor, by name and shape, in store order.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let c = self.hidden_dim;
        let mut out: Vec<(String, (usize, usize))> = Vec::new();
        let mut push = |name: &str, shape| out.push((name.to_string(), shape));
        if !self.has_graph() {
            return out;
        }
        push(EMBEDDING, (self.nodes, self.embed_dim));
        push(GCN_WEIGHT, (c, c));
        push(PROJ, (self.in_channels, c));
        match self.architecture {
            Architecture::Stlgru | Architecture::GcnGru => {
                if self.attention_enabled() {
                    push(PSI, (c, c));
                }
                for g in GATE_NAMES {
                    push(g, (c, c));
                }
            }
            Architecture::GcnLstm => {
                for g in LSTM_NAMES {
                    push(g, (c, c));
                }
            }
            Architecture::GcnTcn => {
                for (k, b) in TCN_KERNELS.chunks(2).zip(TCN_BIASES) {
                    push(k[0], (c, c));
                    push(k[1], (c, c));
                    push(b, (1, c));
                }
            }
            Architecture::Persistence => unreachable!(),
        }
        push(HEAD_W1, (c, c));
        push(HEAD_B1, (1, c));
        push(HEAD_W2, (c, self.horizon));
        push(HEAD_B2, (1, self.horizon));
        out
    }
}

fn is_bias(name: &str) -> bool {
    name == HEAD_B1 || name == HEAD_B2 || TCN_BIASES.contains(&name)
}

/// How the forward pass obtains its adjacency matrix.
#[derive(Clone, Copy, Debug)]
pub enum GraphMode<'a> {
    /// Differentiable Binary Concrete sample with the given noise.
    Relaxed(&'a GumbelNoise),
    /// Deterministic `Ω ≥ 0.5` threshold.
    Hard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    /// Weights uniform in ±1/√C', biases zero, embeddings N(0, 1)/√d.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let bound = 1.0 / (config.hidden_dim as f64).sqrt();
        let uniform = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let emb_scale = 1.0 / (config.embed_dim as f64).sqrt();
        let mut params = ParamStore::new();
        for (name, (r, c)) in config.param_shapes() {
            let m = if name == EMBEDDING {
                Matrix::from_fn(r, c, |_, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * emb_scale
                })
            } else if is_bias(&name) {
                Matrix::zeros(r, c)
            } else {
                Matrix::from_fn(r, c, |_, _| uniform.sample(rng))
            };
            params.insert(name, m);
        }
        Ok(Self { config, params })
    }

    /// Wraps existing parameters after checking every live tensor is present
    /// with the right shape and nothing extra is supplied.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        for (name, shape) in &shapes {
            let m = params.require(name)?;
            if m.shape() != *shape {
                return Err(Error::ParamsMismatch(format!(
                    "`{name}` has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
        }
        if params.len() != shapes.len() {
            let extra: Vec<&str> = params
                .names()
                .filter(|n| !shapes.iter().any(|(s, _)| s == n))
                .collect();
            return Err(Error::ParamsMismatch(format!("unexpected tensors {extra:?}")));
        }
        Ok(Self { config, params })
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        for (name, (r, c)) in config.param_shapes() {
            params.insert(name, Matrix::zeros(r, c));
        }
        Ok(Self { config, params })
    }

    fn check_window(&self, w: &SeriesTensor) -> Result<()> {
        let c = &self.config;
        if w.steps() != c.input_len {
            return Err(Error::WindowLength {
                expected: c.input_len,
                actual: w.steps(),
            });
        }
        if w.nodes() != c.nodes || w.channels() != c.in_channels {
            return Err(Error::Shape {
                op: "forecast",
                lhs: (c.nodes, c.in_channels),
                rhs: (w.nodes(), w.channels()),
            });
        }
        Ok(())
    }

    /// Normalized propagation matrix `I + D^(−1/2) A D^(−1/2)` on the tape.
    pub(crate) fn propagation_on_tape(&self, tape: &mut Tape, bound: &BoundParams, graph: GraphMode<'_>) -> Result<Var> {
        let e = bound.var(EMBEDDING)?;
        let logits = edge_logits(tape, e);
        let a = if self.config.use_gumbel {
            match graph {
                GraphMode::Relaxed(noise) => relaxed_from_logits(tape, logits, noise, self.config.tau)?,
                GraphMode::Hard => hard_from_logits(tape, logits, &GumbelNoise::zeros(self.config.nodes), self.config.tau)?,
            }
        } else {
            tape.row_softmax(logits)
        };
        tape.normalize_adjacency(a)
    }

    /// The adjacency-derived propagation matrix the model would use.
    pub fn propagation(&self, graph: GraphMode<'_>) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let p = self.propagation_on_tape(&mut tape, &bound, graph)?;
        Ok(tape.value(p).clone())
    }

    /// Records the forward pass for a batch of windows; the result stacks each
    /// window's N×T' prediction vertically.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        batch: &[&SeriesTensor],
        graph: GraphMode<'_>,
        h0: Option<&Matrix>,
    ) -> Result<Var> {
        let cfg = &self.config;
        if batch.is_empty() {
            return Err(Error::config("batch", "empty batch"));
        }
        for w in batch {
            self.check_window(w)?;
        }
        let rows = batch.len() * cfg.nodes;

        if cfg.architecture == Architecture::Persistence {
            let last = Matrix::from_fn(rows, cfg.horizon, |r, _| {
                batch[r / cfg.nodes].get(cfg.input_len - 1, r % cfg.nodes, 0)
            });
            return Ok(tape.leaf(last));
        }

        let h_init = match h0 {
            Some(h) if h.shape() != (rows, cfg.hidden_dim) => {
                return Err(Error::Shape {
                    op: "forward(h0)",
                    lhs: (rows, cfg.hidden_dim),
                    rhs: h.shape(),
                })
            }
            Some(h) => h.clone(),
            None => Matrix::zeros(rows, cfg.hidden_dim),
        };

        let prop = self.propagation_on_tape(tape, bound, graph)?;
        let proj = bound.var(PROJ)?;
        let gcn_w = bound.var(GCN_WEIGHT)?;
        let mut h = tape.leaf(h_init);

        let mut spatial = Vec::with_capacity(cfg.input_len);
        let mut step_inputs = Vec::with_capacity(cfg.input_len);
        for t in 0..cfg.input_len {
            let snapshots: Vec<Matrix> = batch.iter().map(|w| w.step_matrix(t)).collect();
            let refs: Vec<&Matrix> = snapshots.iter().collect();
            let raw = tape.leaf(Matrix::concat_rows(&refs)?);
            let x = tape.matmul(raw, proj)?;
            let j_r = gcn_on_tape(tape, prop, x, gcn_w)?;
            step_inputs.push(x);
            spatial.push(j_r);
        }

        match cfg.architecture {
            Architecture::Stlgru | Architecture::GcnGru => {
                let gates = GateVars::lookup(bound)?;
                let psi = if cfg.attention_enabled() { Some(bound.var(PSI)?) } else { None };
                for (&x, &j_r) in step_inputs.iter().zip(&spatial) {
                    let j_z = match psi {
                        Some(psi) => maa_on_tape(tape, j_r, h, psi, cfg.attention_axis, cfg.nodes)?.j_z,
                        None => j_r,
                    };
                    let candidate_in = if cfg.architecture == Architecture::Stlgru { x } else { j_r };
                    h = gru_on_tape(tape, candidate_in, j_r, j_z, h, &gates)?;
                }
            }
            Architecture::GcnLstm => {
                let vars = LstmVars::lookup(bound)?;
                let mut c = tape.leaf(Matrix::zeros(rows, cfg.hidden_dim));
                for &j_r in &spatial {
                    (h, c) = lstm_on_tape(tape, j_r, h, c, &vars)?;
                }
            }
            Architecture::GcnTcn => {
                let vars = TcnVars::lookup(bound)?;
                h = tcn_on_tape(tape, &spatial, &vars)?;
            }
            Architecture::Persistence => unreachable!(),
        }

        self.head_on_tape(tape, bound, h)
    }

    fn head_on_tape(&self, tape: &mut Tape, bound: &BoundParams, h: Var) -> Result<Var> {
        let hidden = tape.matmul(h, bound.var(HEAD_W1)?)?;
        let hidden = tape.add_row_bias(hidden, bound.var(HEAD_B1)?)?;
        let hidden = tape.relu(hidden);
        let out = tape.matmul(hidden, bound.var(HEAD_W2)?)?;
        tape.add_row_bias(out, bound.var(HEAD_B2)?)
    }

    /// N×T' prediction for one window.
    pub fn forecast(&self, window: &SeriesTensor, graph: GraphMode<'_>) -> Result<Matrix> {
        self.forecast_batch(&[window], graph, None)
    }

    pub fn forecast_batch(&self, batch: &[&SeriesTensor], graph: GraphMode<'_>, h0: Option<&Matrix>) -> Result<Matrix> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let out = self.forward(&mut tape, &bound, batch, graph, h0)?;
        Ok(tape.value(out).clone())
    }

    /// Mean squared error of a batch against its N×T' targets, with the
    /// gradient of that loss for every parameter tensor.
    pub fn loss_and_gradients(
        &self,
        batch: &[&SeriesTensor],
        targets: &[&Matrix],
        graph: GraphMode<'_>,
        h0: Option<&Matrix>,
    ) -> Result<(f64, GradientSet)> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let (root, loss) = self.loss_on_tape(&mut tape, &bound, batch, targets, graph, h0)?;
        let grads = gradient_of_scalar(&tape, root, &bound)?;
        Ok((loss, grads))
    }

    pub fn loss(
        &self,
        batch: &[&SeriesTensor],
        targets: &[&Matrix],
        graph: GraphMode<'_>,
        h0: Option<&Matrix>,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        Ok(self.loss_on_tape(&mut tape, &bound, batch, targets, graph, h0)?.1)
    }

    fn loss_on_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        batch: &[&SeriesTensor],
        targets: &[&Matrix],
        graph: GraphMode<'_>,
        h0: Option<&Matrix>,
    ) -> Result<(Var, f64)> {
        if targets.len() != batch.len() {
            return Err(Error::config("targets", "one target per window required"));
        }
        let pred = self.forward(tape, bound, batch, graph, h0)?;
        let truth = tape.leaf(Matrix::concat_rows(targets)?);
        let root = tape.mean_squared_error(pred, truth)?;
        let value = tape.value(root).get(0, 0);
        Ok((root, value))
    }
}

/// One recurrent step of the full cell: projection → graph convolution →
/// attention (when enabled) → gated memory update.
pub fn cell_step(x_raw: &Matrix, h_prev: &Matrix, prop: &Matrix, model: &Model) -> Result<Matrix> {
    let cfg = &model.config;
    if cfg.architecture != Architecture::Stlgru {
        return Err(Error::ParamsMismatch(format!("cell_step needs an stlgru model, got {}", cfg.architecture)));
    }
    let mut tape = Tape::new();
    let bound = model.params.bind(&mut tape);
    let (raw, h, p) = (
        tape.leaf(x_raw.clone()),
        tape.leaf(h_prev.clone()),
        tape.leaf(prop.clone()),
    );
    let x = tape.matmul(raw, bound.var(PROJ)?)?;
    let j_r = gcn_on_tape(&mut tape, p, x, bound.var(GCN_WEIGHT)?)?;
    let j_z = if cfg.attention_enabled() {
        maa_on_tape(&mut tape, j_r, h, bound.var(PSI)?, cfg.attention_axis, cfg.nodes)?.j_z
    } else {
        j_r
    };
    let gates = GateVars::lookup(&bound)?;
    let out = gru_on_tape(&mut tape, x, j_r, j_z, h, &gates)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{gru_update, maa_forward, project_input, GateParams};
    use crate::graph::gcn_forward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_config(arch: Architecture) -> ModelConfig {
        ModelConfig {
            architecture: arch,
            nodes: 4,
            hidden_dim: 5,
            embed_dim: 3,
            input_len: 6,
            horizon: 3,
            ..Default::default()
        }
    }

    fn toy_window(cfg: &ModelConfig, seed: u64) -> SeriesTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = cfg.nodes * cfg.input_len * cfg.in_channels;
        SeriesTensor::new(cfg.nodes, cfg.input_len, cfg.in_channels, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn zero_parameters_forecast_zero() {
        for arch in Architecture::ALL {
            if arch == Architecture::Persistence {
                continue;
            }
            let cfg = toy_config(arch);
            let model = Model::zeros(cfg.clone()).unwrap();
            let y = model.forecast(&toy_window(&cfg, 1), GraphMode::Hard).unwrap();
            assert_eq!(y, Matrix::zeros(4, 3), "{arch}");
        }
    }

    #[test]
    fn zero_parameters_step_halves_memory() {
        let cfg = toy_config(Architecture::Stlgru);
        let model = Model::zeros(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = Matrix::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0));
        let x = Matrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0));
        let out = cell_step(&x, &h, &Matrix::identity(4), &model).unwrap();
        assert!(out.sub(&h.scale(0.5)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn cell_step_matches_component_composition() {
        let cfg = toy_config(Architecture::Stlgru);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model::init(cfg, &mut rng).unwrap();
        let h = Matrix::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0));
        let x_raw = Matrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0));
        let noise = GumbelNoise::sample(4, &mut rng);
        let prop = model.propagation(GraphMode::Relaxed(&noise)).unwrap();

        let p = &model.params;
        let x = project_input(&x_raw, p.get(PROJ).unwrap()).unwrap();
        let j_r = gcn_forward(&x, &prop, p.get(GCN_WEIGHT).unwrap()).unwrap();
        let ctx = maa_forward(&j_r, &h, p.get(PSI).unwrap()).unwrap();
        let gates = GateParams::from_store(p).unwrap();
        let expect = gru_update(&x, &j_r, &ctx.j_z, &h, &gates).unwrap();
        assert_eq!(cell_step(&x_raw, &h, &prop, &model).unwrap(), expect);
    }

    #[test]
    fn forecast_shape_and_window_checks() {
        let cfg = toy_config(Architecture::Stlgru);
        let model = Model::init(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let w = toy_window(&cfg, 5);
        assert_eq!(model.forecast(&w, GraphMode::Hard).unwrap().shape(), (4, 3));
        let short = w.slice_steps(0, 5);
        assert!(matches!(
            model.forecast(&short, GraphMode::Hard),
            Err(Error::WindowLength { expected: 6, actual: 5 })
        ));
    }

    #[test]
    fn batched_forward_equals_per_window_forward() {
        for arch in [Architecture::Stlgru, Architecture::GcnLstm, Architecture::GcnTcn] {
            for axis in [AttentionAxis::Feature, AttentionAxis::Node] {
                let cfg = ModelConfig {
                    attention_axis: axis,
                    ..toy_config(arch)
                };
                let model = Model::init(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
                let noise = GumbelNoise::sample(4, &mut ChaCha8Rng::seed_from_u64(7));
                let (a, b) = (toy_window(&cfg, 8), toy_window(&cfg, 9));
                let joint = model.forecast_batch(&[&a, &b], GraphMode::Relaxed(&noise), None).unwrap();
                let ya = model.forecast(&a, GraphMode::Relaxed(&noise)).unwrap();
                let yb = model.forecast(&b, GraphMode::Relaxed(&noise)).unwrap();
                let stacked = Matrix::concat_rows(&[&ya, &yb]).unwrap();
                assert!(joint.sub(&stacked).unwrap().max_abs() < 1e-13, "{arch} {axis:?}");
            }
        }
    }

    #[test]
    fn parameters_validated_against_config() {
        let cfg = toy_config(Architecture::Stlgru);
        let model = Model::init(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(Model::from_params(cfg.clone(), model.params.clone()).is_ok());
        let no_maa = ModelConfig { use_maa: false, ..cfg.clone() };
        assert!(Model::from_params(no_maa, model.params.clone()).is_err());
        let mut wrong = model.params.clone();
        wrong.insert(PROJ, Matrix::zeros(2, 5));
        assert!(Model::from_params(cfg, wrong).is_err());
    }

    #[test]
    fn hidden_init_parsing() {
        assert_eq!("zeros".parse::<HiddenInit>().unwrap(), HiddenInit::Zeros);
        assert_eq!("gaussian(0.1)".parse::<HiddenInit>().unwrap(), HiddenInit::Gaussian(0.1));
        assert!("gaussian(-1)".parse::<HiddenInit>().is_err());
        assert!("random".parse::<HiddenInit>().is_err());
        let json = serde_json::to_string(&HiddenInit::Gaussian(0.5)).unwrap();
        assert_eq!(json, "\"gaussian(0.5)\"");
    }

    #[test]
    fn forecast_is_deterministic() {
        let cfg = toy_config(Architecture::Stlgru);
        let m1 = Model::init(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        let m2 = Model::init(cfg.clone(), &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        let noise = GumbelNoise::sample(4, &mut ChaCha8Rng::seed_from_u64(11));
        let w = toy_window(&cfg, 12);
        let a = m1.forecast(&w, GraphMode::Relaxed(&noise)).unwrap();
        let b = m2.forecast(&w, GraphMode::Relaxed(&noise)).unwrap();
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
