//! Chronological splitting, windowing, normalization, Adam, and the
//! train/evaluate loops.

use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SeriesTensor;
use crate::error::{Error, Result};
use crate::graph::GumbelNoise;
use crate::matrix::Matrix;
use crate::metrics::{horizon_report, MetricsReport, DEFAULT_MAPE_FLOOR};
use crate::model::{GraphMode, Model, ModelConfig};
use crate::params::{GradientSet, ParamStore};

pub const CHECKPOINT_FORMAT: &str = "stlgru-checkpoint/1";
pub const DEFAULT_HORIZONS: [usize; 3] = [3, 6, 12];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Chronological order of the three segments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitOrder {
    /// train, test, validation
    #[default]
    TrainTestValidation,
    /// train, validation, test
    TrainValidationTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// (train, test, validation) fractions.
    pub split_ratio: [f64; 3],
    pub split_order: SplitOrder,
    pub input_len: usize,
    pub horizon: usize,
    /// Epochs without a validation MAE improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 16,
            epochs: 50,
            seed: 0,
            split_ratio: [0.6, 0.2, 0.2],
            split_order: SplitOrder::TrainTestValidation,
            input_len: 12,
            horizon: 12,
            patience: 10,
            clip_norm: Some(5.0),
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.input_len == 0 || self.horizon == 0 {
            return Err(Error::config("window", "T and T' must be at least 1"));
        }
        check_ratios(&self.split_ratio)?;
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config("clip_norm", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        self.input_len + self.horizon
    }
}

fn check_ratios(r: &[f64; 3]) -> Result<()> {
    if r.iter().any(|&v| !(v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config("split_ratio", format!("{r:?} must be non-negative and sum to 1")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Range<usize>,
    pub test: Range<usize>,
    pub validation: Range<usize>,
}

/// Contiguous chronological split: train gets ⌊r₀·L⌋ steps, test ⌊r₁·L⌋, and
/// validation the remainder. Every segment with a positive ratio must hold at
/// least `min_len` steps.
pub fn split_dataset(len: usize, ratios: [f64; 3], order: SplitOrder, min_len: usize) -> Result<Splits> {
    check_ratios(&ratios)?;
    // Guard against 0.6·10 landing just under 6.
    let part = |r: f64| ((r * len as f64) + 1e-9).floor() as usize;
    let n_train = part(ratios[0]).min(len);
    let n_test = part(ratios[1]).min(len - n_train);
    let n_val = len - n_train - n_test;
    for (name, n, r) in [("train", n_train, ratios[0]), ("test", n_test, ratios[1]), ("validation", n_val, ratios[2])] {
        if r > 0.0 && n < min_len {
            return Err(Error::SeriesTooShort {
                len,
                reason: format!("{name} split has {n} steps, fewer than one window ({min_len})"),
            });
        }
    }
    let train = 0..n_train;
    Ok(match order {
        SplitOrder::TrainTestValidation => Splits {
            train,
            test: n_train..n_train + n_test,
            validation: n_train + n_test..len,
        },
        SplitOrder::TrainValidationTest => Splits {
            train,
            validation: n_train..n_train + n_val,
            test: n_train + n_val..len,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    /// First step of the input block in the source series.
    pub start: usize,
    /// T steps.
    pub input: SeriesTensor,
    /// N×T' future values of channel 0.
    pub target: Matrix,
}

/// Disjoint blocks of `T + T'` steps inside `range`; a trailing partial block
/// is dropped. Logs a warning when the range cannot hold a single window.
pub fn windowize(series: &SeriesTensor, range: Range<usize>, input_len: usize, horizon: usize) -> Vec<Window> {
    let stride = input_len + horizon;
    let len = range.end.saturating_sub(range.start);
    if stride == 0 || len < stride {
        log::warn!("split {range:?} holds {len} steps, fewer than one window of {stride}");
        return Vec::new();
    }
    (0..len / stride)
        .map(|k| {
            let start = range.start + k * stride;
            Window {
                start,
                input: series.slice_steps(start, input_len),
                target: series.channel_block(start + input_len, horizon, 0),
            }
        })
        .collect()
}

/// Zero-mean, unit-variance scaling with statistics from the training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Normalizer {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("train split", "no values to fit the normalizer"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::ZeroVariance);
        }
        Ok(Self { mean, std })
    }

    /// Statistics over the time steps in `range` only.
    pub fn fit_range(series: &SeriesTensor, range: Range<usize>) -> Result<Self> {
        Self::fit(series.slice_steps(range.start, range.end - range.start).values())
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_series(&self, s: &SeriesTensor) -> SeriesTensor {
        s.map(|v| self.apply(v))
    }

    pub fn invert_matrix(&self, m: &Matrix) -> Matrix {
        m.map(|v| self.invert(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros = || params.iter().map(|(_, p)| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient skips the step
/// (returns `false`) and leaves both the parameters and the moments untouched.
pub fn adam_step(params: &mut ParamStore, grads: &GradientSet, state: &mut AdamState, lr: f64) -> Result<bool> {
    if grads.0.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::ParamsMismatch(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.0.len(),
            state.m.len()
        )));
    }
    for ((_, p), g) in params.iter().zip(&grads.0) {
        p.expect_same_shape(g, "adam_step")?;
    }
    if !grads.is_finite() {
        log::warn!("non-finite gradient at Adam step {}; step skipped", state.t + 1);
        return Ok(false);
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (k, (_, p)) in params.iter_mut().enumerate() {
        let g = grads.0[k].data();
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        for (i, x) in p.data_mut().iter_mut().enumerate() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *x -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean normalized MSE over the epoch's batches.
    pub train_loss: f64,
    /// Original units; NaN when there is no validation window.
    pub val_mae: f64,
    pub skipped_steps: usize,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub splits: Splits,
    pub normalizer: Normalizer,
    pub train: Vec<Window>,
    pub test: Vec<Window>,
    pub validation: Vec<Window>,
}

/// Splits, fits the normalizer on the training segment, and cuts each
/// segment of the normalized series into windows.
pub fn prepare(series: &SeriesTensor, cfg: &TrainConfig) -> Result<Prepared> {
    cfg.validate()?;
    let splits = split_dataset(series.steps(), cfg.split_ratio, cfg.split_order, cfg.window_len())?;
    let normalizer = Normalizer::fit_range(series, splits.train.clone())?;
    let normalized = normalizer.apply_series(series);
    let cut = |r: &Range<usize>| windowize(&normalized, r.clone(), cfg.input_len, cfg.horizon);
    Ok(Prepared {
        train: cut(&splits.train),
        test: cut(&splits.test),
        validation: cut(&splits.validation),
        splits,
        normalizer,
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation MAE (the last ones when no
    /// validation window exists).
    pub model: Model,
    pub normalizer: Normalizer,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

pub fn train(model_config: &ModelConfig, series: &SeriesTensor, cfg: &TrainConfig) -> Result<TrainOutcome> {
    model_config.validate()?;
    if model_config.input_len != cfg.input_len || model_config.horizon != cfg.horizon {
        return Err(Error::config(
            "window",
            format!(
                "model expects T={}, T'={} but training uses T={}, T'={}",
                model_config.input_len, model_config.horizon, cfg.input_len, cfg.horizon
            ),
        ));
    }
    if series.nodes() != model_config.nodes || series.channels() != model_config.in_channels {
        return Err(Error::config(
            "nodes",
            format!(
                "model has N={}, C_in={} but data has N={}, C_in={}",
                model_config.nodes,
                model_config.in_channels,
                series.nodes(),
                series.channels()
            ),
        ));
    }
    let data = prepare(series, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(model_config.clone(), &mut rng)?;
    round_to_precision(&mut model.params, cfg.precision);
    let mut adam = AdamState::new(&model.params);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut stale = 0;
    let mut stopped_early = false;
    let trainable = !model.params.is_empty();
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches, mut skipped) = (0.0, 0usize, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&SeriesTensor> = chunk.iter().map(|&i| &data.train[i].input).collect();
            let targets: Vec<&Matrix> = chunk.iter().map(|&i| &data.train[i].target).collect();
            let noise = GumbelNoise::sample(model_config.nodes, &mut rng);
            let h0 = model_config
                .hidden_init
                .initial_state(inputs.len() * model_config.nodes, model_config.hidden_dim, &mut rng);
            let (loss, mut grads) = model.loss_and_gradients(&inputs, &targets, GraphMode::Relaxed(&noise), Some(&h0))?;
            if !loss.is_finite() {
                log::error!("loss {loss} at epoch {epoch}, batch {b}, seed {}", cfg.seed);
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    seed: cfg.seed,
                });
            }
            loss_sum += loss;
            batches += 1;
            if !trainable {
                continue;
            }
            if let Some(limit) = cfg.clip_norm {
                let norm = grads.global_norm();
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            if adam_step(&mut model.params, &grads, &mut adam, cfg.learning_rate)? {
                round_to_precision(&mut model.params, cfg.precision);
            } else {
                skipped += 1;
            }
        }

        let val_mae = if data.validation.is_empty() {
            f64::NAN
        } else {
            evaluate(&model, &data.validation, &data.normalizer, &[])?.average.mae
        };
        let train_loss = if batches > 0 { loss_sum / batches as f64 } else { f64::NAN };
        log::info!("epoch {epoch}: train loss {train_loss:.6}, validation MAE {val_mae:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_mae,
            skipped_steps: skipped,
        });
        if val_mae.is_nan() {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _, _)| val_mae < *b) {
            best = Some((val_mae, epoch, model.params.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let best_epoch = best.as_ref().map(|b| b.1);
    if let Some((_, _, params)) = best {
        model.params = params;
    }
    Ok(TrainOutcome {
        model,
        normalizer: data.normalizer,
        history,
        best_epoch,
        stopped_early,
    })
}

fn round_to_precision(params: &mut ParamStore, precision: Precision) {
    if precision == Precision::F32 {
        for (_, p) in params.iter_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }
}

/// Hard-graph forecasts over `windows` (normalized inputs and targets),
/// scored in original units. An empty `horizons` list reports only the average.
pub fn evaluate(model: &Model, windows: &[Window], normalizer: &Normalizer, horizons: &[usize]) -> Result<MetricsReport> {
    evaluate_with_floor(model, windows, normalizer, horizons, DEFAULT_MAPE_FLOOR)
}

pub fn evaluate_with_floor(
    model: &Model,
    windows: &[Window],
    normalizer: &Normalizer,
    horizons: &[usize],
    mape_floor: f64,
) -> Result<MetricsReport> {
    let (pred, truth) = predictions(model, windows, normalizer)?;
    horizon_report(&pred, &truth, horizons, mape_floor)
}

/// Stacked original-unit predictions and targets, one row per (window, node).
pub fn predictions(model: &Model, windows: &[Window], normalizer: &Normalizer) -> Result<(Matrix, Matrix)> {
    const CHUNK: usize = 64;
    let mut preds = Vec::new();
    for chunk in windows.chunks(CHUNK) {
        let inputs: Vec<&SeriesTensor> = chunk.iter().map(|w| &w.input).collect();
        preds.push(model.forecast_batch(&inputs, GraphMode::Hard, None)?);
    }
    let pred_refs: Vec<&Matrix> = preds.iter().collect();
    let targets: Vec<&Matrix> = windows.iter().map(|w| &w.target).collect();
    let (pred, truth) = if windows.is_empty() {
        let cols = model.config.horizon;
        (Matrix::zeros(0, cols), Matrix::zeros(0, cols))
    } else {
        (Matrix::concat_rows(&pred_refs)?, Matrix::concat_rows(&targets)?)
    };
    Ok((normalizer.invert_matrix(&pred), normalizer.invert_matrix(&truth)))
}

/// Everything needed to rebuild a trained model and score it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub normalizer: Normalizer,
    pub params: ParamStore,
    pub history: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

impl Checkpoint {
    pub fn new(outcome: &TrainOutcome, train_config: &TrainConfig) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            model_config: outcome.model.config.clone(),
            train_config: train_config.clone(),
            seed: train_config.seed,
            normalizer: outcome.normalizer,
            params: outcome.model.params.clone(),
            history: outcome.history.clone(),
            best_epoch: outcome.best_epoch,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.model_config.clone(), self.params.clone())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let value: serde_json::Value = serde_json::from_slice(&bytes)?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(CHECKPOINT_FORMAT) => Ok(serde_json::from_value(value)?),
            other => Err(Error::Format(format!(
                "checkpoint format {other:?}, expected {CHECKPOINT_FORMAT:?}"
            ))),
        }
    }
}
