//! Accuracy metrics and the parameter/FLOP accountant.

use serde::{Deserialize, Serialize};

use crate::baselines::TCN_DILATIONS;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{Architecture, ModelConfig};

/// Targets at or below this value are left out of MAPE.
pub const DEFAULT_MAPE_FLOOR: f64 = 1.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Percent. Zero when every target was masked.
    pub mape: f64,
    pub n_evaluated: usize,
    /// Targets excluded from MAPE by the floor.
    pub masked_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    /// 1-based step ahead.
    pub horizon: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizons: Vec<HorizonMetrics>,
    /// Over every predicted step, not only the listed horizons.
    pub average: Metrics,
}

impl MetricsReport {
    pub fn at(&self, horizon: usize) -> Option<&Metrics> {
        self.horizons.iter().find(|h| h.horizon == horizon).map(|h| &h.metrics)
    }

    /// `horizon,mae,rmse,mape,n_evaluated,masked_count` rows with an `avg` row last.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,mae,rmse,mape,n_evaluated,masked_count\n");
        let row = |label: String, m: &Metrics| {
            format!(
                "{label},{},{},{},{},{}\n",
                m.mae, m.rmse, m.mape, m.n_evaluated, m.masked_count
            )
        };
        for h in &self.horizons {
            out.push_str(&row(h.horizon.to_string(), &h.metrics));
        }
        out.push_str(&row("avg".into(), &self.average));
        out
    }
}

pub fn compute_metrics(y_hat: &Matrix, y_true: &Matrix) -> Result<Metrics> {
    compute_metrics_with_floor(y_hat, y_true, DEFAULT_MAPE_FLOOR)
}

pub fn compute_metrics_with_floor(y_hat: &Matrix, y_true: &Matrix, mape_floor: f64) -> Result<Metrics> {
    y_hat.expect_same_shape(y_true, "compute_metrics")?;
    Ok(metrics_from_pairs(
        y_hat.data().iter().copied().zip(y_true.data().iter().copied()),
        mape_floor,
    ))
}

pub(crate) fn metrics_from_pairs(pairs: impl Iterator<Item = (f64, f64)>, mape_floor: f64) -> Metrics {
    let (mut abs, mut sq, mut pct) = (0.0, 0.0, 0.0);
    let (mut n, mut masked) = (0usize, 0usize);
    for (p, t) in pairs {
        let e = p - t;
        abs += e.abs();
        sq += e * e;
        if t > mape_floor {
            pct += e.abs() / t;
        } else {
            masked += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Metrics::default();
    }
    let kept = n - masked;
    Metrics {
        mae: abs / n as f64,
        rmse: (sq / n as f64).sqrt(),
        mape: if kept > 0 { 100.0 * pct / kept as f64 } else { 0.0 },
        n_evaluated: n,
        masked_count: masked,
    }
}

/// Metrics per requested horizon (column `h − 1`) plus the all-steps average.
/// Both matrices hold one row per (window, node) and one column per step.
pub fn horizon_report(y_hat: &Matrix, y_true: &Matrix, horizons: &[usize], mape_floor: f64) -> Result<MetricsReport> {
    y_hat.expect_same_shape(y_true, "horizon_report")?;
    let steps = y_hat.cols();
    let mut out = Vec::with_capacity(horizons.len());
    for &h in horizons {
        if h == 0 || h > steps {
            return Err(Error::config("horizon", format!("{h} is outside 1..={steps}")));
        }
        let pairs = (0..y_hat.rows()).map(|r| (y_hat.get(r, h - 1), y_true.get(r, h - 1)));
        out.push(HorizonMetrics {
            horizon: h,
            metrics: metrics_from_pairs(pairs, mape_floor),
        });
    }
    Ok(MetricsReport {
        horizons: out,
        average: compute_metrics_with_floor(y_hat, y_true, mape_floor)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub parameter_count: usize,
    pub flops_per_window: u64,
    /// Per named tensor.
    pub parameter_breakdown: Vec<(String, usize)>,
    /// Per stage.
    pub flop_breakdown: Vec<(String, u64)>,
}

impl CostReport {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        let (parameter_count, parameter_breakdown) = count_parameters(config)?;
        let (flops_per_window, flop_breakdown) = estimate_flops(config, config.input_len)?;
        Ok(Self {
            parameter_count,
            flops_per_window,
            parameter_breakdown,
            flop_breakdown,
        })
    }
}

/// Closed-form parameter count with a per-tensor breakdown.
pub fn count_parameters(config: &ModelConfig) -> Result<(usize, Vec<(String, usize)>)> {
    config.validate()?;
    let (n, d, c, c_in, t_out) = (
        config.nodes,
        config.embed_dim,
        config.hidden_dim,
        config.in_channels,
        config.horizon,
    );
    let sq = c * c;
    let mut parts: Vec<(&str, usize)> = Vec::new();
    if config.architecture != Architecture::Persistence {
        parts.push(("embedding", n * d));
        parts.push(("gcn_w", sq));
        parts.push(("proj", c_in * c));
        match config.architecture {
            Architecture::Stlgru | Architecture::GcnGru => {
                if config.attention_enabled() {
                    parts.push(("psi", sq));
                }
                parts.push(("gates", 6 * sq));
            }
            Architecture::GcnLstm => parts.push(("gates", 8 * sq)),
            Architecture::GcnTcn => parts.push(("tcn", TCN_DILATIONS.len() * (2 * sq + c))),
            Architecture::Persistence => unreachable!(),
        }
        parts.push(("head_w1", sq));
        parts.push(("head_b1", c));
        parts.push(("head_w2", c * t_out));
        parts.push(("head_b2", t_out));
    }
    let total = parts.iter().map(|(_, v)| v).sum();
    Ok((total, parts.into_iter().map(|(k, v)| (k.to_string(), v)).collect()))
}

/// Per-window operation count for `steps` recurrent steps. A multiply-add
/// counts 2, an elementwise transcendental counts 1.
pub fn estimate_flops(config: &ModelConfig, steps: usize) -> Result<(u64, Vec<(String, u64)>)> {
    config.validate()?;
    let (n, c, t_out) = (config.nodes as u64, config.hidden_dim as u64, config.horizon as u64);
    let t = steps as u64;
    let mut parts: Vec<(&str, u64)> = Vec::new();
    if config.architecture != Architecture::Persistence {
        parts.push(("gcn", t * (2 * n * n * c + 2 * n * c * c)));
        match config.architecture {
            Architecture::Stlgru | Architecture::GcnGru => {
                if config.attention_enabled() {
                    parts.push(("maa", t * (2 * 2 * n * c * c + 5 * 2 * n * c + 4 * n * c)));
                }
                parts.push(("gates", t * (6 * 2 * n * c * c + 10 * n * c)));
            }
            Architecture::GcnLstm => parts.push(("gates", t * (8 * 2 * n * c * c + 12 * n * c))),
            Architecture::GcnTcn => {
                let layers = TCN_DILATIONS.len() as u64;
                parts.push(("tcn", layers * t * (2 * 2 * n * c * c + 2 * n * c)));
            }
            Architecture::Persistence => unreachable!(),
        }
        parts.push(("head", 2 * n * c * c + 2 * n * c * t_out));
    }
    let total = parts.iter().map(|(_, v)| v).sum();
    Ok((total, parts.into_iter().map(|(k, v)| (k.to_string(), v)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_examples() {
        let m = compute_metrics(&col(&[2.0, 2.0, 5.0]), &col(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(m.mae, 1.0);
        assert!((m.rmse - (5.0f64 / 3.0).sqrt()).abs() <= 1e-12);
        // y = 1 sits on the floor and is masked
        assert_eq!(m.masked_count, 1);

        let m = compute_metrics_with_floor(&col(&[2.0, 2.0]), &col(&[1.0, 2.0]), 0.0).unwrap();
        assert!((m.mape - 50.0).abs() <= 1e-12);
        let m = compute_metrics(&col(&[2.0, 2.0]), &col(&[1.0, 2.0])).unwrap();
        assert_eq!((m.mape, m.masked_count), (0.0, 1));

        let y = col(&[3.0, 4.0, 5.0]);
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!((m.mae, m.rmse, m.mape), (0.0, 0.0, 0.0));
        assert!(compute_metrics(&col(&[1.0]), &col(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn horizon_columns() {
        let truth = Matrix::from_rows(&[[10.0, 10.0, 10.0], [20.0, 20.0, 20.0]]);
        let pred = Matrix::from_rows(&[[11.0, 12.0, 13.0], [21.0, 22.0, 23.0]]);
        let r = horizon_report(&pred, &truth, &[1, 3], 1.0).unwrap();
        assert_eq!(r.at(1).unwrap().mae, 1.0);
        assert_eq!(r.at(3).unwrap().mae, 3.0);
        assert_eq!(r.average.mae, 2.0);
        assert!(horizon_report(&pred, &truth, &[4], 1.0).is_err());
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().last().unwrap().starts_with("avg,2,"));
    }

    #[test]
    fn parameter_count_example() {
        let cfg = ModelConfig {
            nodes: 5,
            embed_dim: 2,
            hidden_dim: 4,
            in_channels: 1,
            horizon: 3,
            ..Default::default()
        };
        let (total, parts) = count_parameters(&cfg).unwrap();
        assert_eq!(total, 177);
        assert_eq!(parts.iter().map(|p| p.1).sum::<usize>(), 177);
        assert!(count_parameters(&ModelConfig { hidden_dim: 0, ..cfg }).is_err());
    }

    #[test]
    fn single_unit_flops() {
        let cfg = ModelConfig {
            nodes: 1,
            hidden_dim: 1,
            input_len: 1,
            horizon: 1,
            ..Default::default()
        };
        let (total, parts) = estimate_flops(&cfg, 1).unwrap();
        let expect = [("gcn", 4), ("maa", 18), ("gates", 22), ("head", 4)];
        assert_eq!(parts, expect.map(|(k, v)| (k.to_string(), v)).to_vec());
        assert_eq!(total, 48);
    }

    #[test]
    fn gate_flops_quadratic_in_width() {
        let gates = |c: usize| {
            let cfg = ModelConfig { hidden_dim: c, ..Default::default() };
            let (_, parts) = estimate_flops(&cfg, 12).unwrap();
            // the elementwise term is linear, so compare the matmul part only
            parts.iter().find(|p| p.0 == "gates").unwrap().1 - 12 * 10 * cfg.nodes as u64 * c as u64
        };
        assert_eq!(gates(32), 4 * gates(16));
    }

    fn arch_strategy() -> impl Strategy<Value = Architecture> {
        prop::sample::select(Architecture::ALL.to_vec())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn analytic_count_matches_live_tensors(
            arch in arch_strategy(),
            nodes in 1usize..40,
            embed_dim in 1usize..12,
            hidden_dim in 1usize..24,
            in_channels in 1usize..4,
            horizon in 1usize..13,
            use_maa: bool,
            use_gumbel: bool,
        ) {
            let cfg = ModelConfig { architecture: arch, nodes, embed_dim, hidden_dim, in_channels, horizon, use_maa, use_gumbel, ..Default::default() };
            let live: usize = cfg.param_shapes().iter().map(|(_, (r, c))| r * c).sum();
            prop_assert_eq!(count_parameters(&cfg).unwrap().0, live);
        }

        #[test]
        fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..50)) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = compute_metrics(&col(&p), &col(&t)).unwrap();
            prop_assert!(m.mae <= m.rmse * (1.0 + 1e-12));
        }

        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0.0..1e3f64, 0.0..1e3f64), 2..40), seed: u64) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let metrics = |v: &[(f64, f64)]| {
                let (p, t): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
                compute_metrics(&col(&p), &col(&t)).unwrap()
            };
            let (a, b) = (metrics(&pairs), metrics(&shuffled));
            prop_assert!((a.mae - b.mae).abs() <= 1e-9 * a.mae.max(1.0));
            prop_assert!((a.rmse - b.rmse).abs() <= 1e-9 * a.rmse.max(1.0));
            prop_assert!((a.mape - b.mape).abs() <= 1e-9 * a.mape.max(1.0));
            prop_assert_eq!(a.masked_count, b.masked_count);
        }

        #[test]
        fn concatenation_is_weighted_average(
            left in prop::collection::vec((0.0..50.0f64, 0.0..50.0f64), 1..30),
            right in prop::collection::vec((0.0..50.0f64, 0.0..50.0f64), 1..30),
        ) {
            let metrics = |v: &[(f64, f64)]| {
                let (p, t): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
                compute_metrics(&col(&p), &col(&t)).unwrap()
            };
            let (a, b) = (metrics(&left), metrics(&right));
            let all = metrics(&[left.clone(), right.clone()].concat());
            let (na, nb) = (a.n_evaluated as f64, b.n_evaluated as f64);
            let mae = (a.mae * na + b.mae * nb) / (na + nb);
            let mse = (a.rmse.powi(2) * na + b.rmse.powi(2) * nb) / (na + nb);
            prop_assert!((all.mae - mae).abs() <= 1e-9);
            prop_assert!((all.rmse.powi(2) - mse).abs() <= 1e-9 * mse.max(1.0));
            let (ka, kb) = ((a.n_evaluated - a.masked_count) as f64, (b.n_evaluated - b.masked_count) as f64);
            if ka + kb > 0.0 {
                let mape = (a.mape * ka + b.mape * kb) / (ka + kb);
                prop_assert!((all.mape - mape).abs() <= 1e-9 * mape.max(1.0));
            }
            prop_assert_eq!(all.masked_count, a.masked_count + b.masked_count);
        }
    }
}
