//! End-to-end finite-difference check of `loss ∘ forecast`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SeriesTensor;
use crate::error::Result;
use crate::graph::GumbelNoise;
use crate::matrix::Matrix;
use crate::model::{Architecture, GraphMode, Model, ModelConfig};
use crate::params::finite_difference_gradient;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// The small model used for gradient checks: N=5, d=3, C'=8, T=6, T'=4.
pub fn toy_config(architecture: Architecture) -> ModelConfig {
    ModelConfig {
        architecture,
        nodes: 5,
        in_channels: 1,
        hidden_dim: 8,
        embed_dim: 3,
        input_len: 6,
        horizon: 4,
        ..Default::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub shape: (usize, usize),
    /// `‖g_a − g_n‖∞ / max(1, ‖g_n‖∞)`.
    pub relative_error: f64,
    pub max_abs_gradient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub config: ModelConfig,
    pub seed: u64,
    pub eps: f64,
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.relative_error).fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error() <= tolerance
    }
}

/// Compares reverse-mode and central-difference gradients for every parameter
/// tensor on two random windows with frozen graph noise and a random initial
/// memory.
pub fn gradient_check(config: &ModelConfig, seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::init(config.clone(), &mut rng)?;
    let windows: Vec<SeriesTensor> = (0..2)
        .map(|_| {
            let len = config.nodes * config.input_len * config.in_channels;
            SeriesTensor::new(
                config.nodes,
                config.input_len,
                config.in_channels,
                (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect::<Result<_>>()?;
    let targets: Vec<Matrix> = (0..2)
        .map(|_| Matrix::from_fn(config.nodes, config.horizon, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let noise = GumbelNoise::sample(config.nodes, &mut rng);
    let h0 = Matrix::from_fn(2 * config.nodes, config.hidden_dim, |_, _| rng.random_range(-0.5..0.5));

    let batch: Vec<&SeriesTensor> = windows.iter().collect();
    let target_refs: Vec<&Matrix> = targets.iter().collect();
    let graph = GraphMode::Relaxed(&noise);
    let (loss, analytic) = model.loss_and_gradients(&batch, &target_refs, graph, Some(&h0))?;
    let numeric = finite_difference_gradient(
        |params| {
            let probe = Model {
                config: config.clone(),
                params: params.clone(),
            };
            probe.loss(&batch, &target_refs, graph, Some(&h0))
        },
        &model.params,
        eps,
    )?;
    let errors = analytic.relative_errors(&numeric)?;
    let tensors = model
        .params
        .iter()
        .zip(errors)
        .zip(&numeric.0)
        .map(|(((name, m), relative_error), g)| TensorCheck {
            name: name.to_string(),
            shape: m.shape(),
            relative_error,
            max_abs_gradient: g.max_abs(),
        })
        .collect();
    Ok(GradCheckReport {
        config: config.clone(),
        seed,
        eps,
        loss,
        tensors,
    })
}
