//! Synthetic graph-diffusion traffic series with a known ground-truth graph.
//!
//! Each node carries a periodic base signal (a sum of sinusoids with random
//! amplitude and phase). The observed state mixes the node's own base signal
//! with its neighbours' previous state:
//!
//! `x_{t+1} = (1 − α)·b_{t+1} + α·P·x_t + ε_{t+1}`, `ε ~ N(0, σ²)`,
//!
//! where `P` is the row-normalized adjacency of the sampled graph. With
//! `α = 0` nodes are independent; larger `α` spreads each node's pattern to
//! its neighbours. The result is mapped affinely to a positive flow range.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SeriesTensor;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAX_GRAPH_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub steps: usize,
    pub graph_seed: u64,
    pub signal_seed: u64,
    /// Diffusion weight, strictly inside (0, 1) for generated benchmarks; 0
    /// is accepted to produce independent nodes.
    pub alpha: f64,
    pub noise_std: f64,
    /// Periods of the base sinusoids, in steps.
    pub periods: Vec<f64>,
    /// Expected node degree of the random graph.
    pub mean_degree: f64,
    /// Affine map to flow units: `level + scale·x`.
    pub flow_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            nodes: 20,
            steps: 2400,
            graph_seed: 7,
            signal_seed: 11,
            alpha: 0.3,
            noise_std: 0.1,
            periods: vec![24.0, 72.0],
            mean_degree: 3.0,
            flow_scale: 100.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::config("nodes", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1)"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("noise_std", "must be non-negative"));
        }
        if self.periods.is_empty() || self.periods.iter().any(|&p| !(p >= 2.0)) {
            return Err(Error::config("periods", "need at least one period, each ≥ 2 steps"));
        }
        if !(self.mean_degree > 0.0) {
            return Err(Error::config("mean_degree", "must be positive"));
        }
        if !(self.flow_scale > 0.0) {
            return Err(Error::config("flow_scale", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSeries {
    pub series: SeriesTensor,
    /// Symmetric 0/1 adjacency with an empty diagonal.
    pub graph: Matrix,
}

impl SyntheticSeries {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.graph.rows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.graph.get(i, j) != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSeries> {
    spec.validate()?;
    let n = spec.nodes;
    let graph = sample_connected_graph(n, spec.mean_degree, spec.graph_seed)?;
    let mixing = row_normalized(&graph);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.signal_seed);
    let components: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|_| {
            spec.periods
                .iter()
                .map(|_| (rng.random_range(0.5..1.5), rng.random_range(0.0..TAU)))
                .collect()
        })
        .collect();
    let base = |node: usize, t: usize| -> f64 {
        spec.periods
            .iter()
            .zip(&components[node])
            .map(|(p, (amp, phase))| amp * (TAU * t as f64 / p + phase).sin())
            .sum()
    };
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::config("noise_std", e.to_string()))?;

    let mut states = Vec::with_capacity(n * spec.steps);
    let mut x: Vec<f64> = (0..n).map(|i| base(i, 0)).collect();
    states.extend_from_slice(&x);
    for t in 1..spec.steps {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let diffused: f64 = (0..n).map(|j| mixing.get(i, j) * x[j]).sum();
                let eps = if spec.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                (1.0 - spec.alpha) * base(i, t) + spec.alpha * diffused + eps
            })
            .collect();
        states.extend_from_slice(&next);
        x = next;
    }

    let peak = states.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let level = spec.flow_scale * (peak + 0.5);
    let values = states.into_iter().map(|v| level + spec.flow_scale * v).collect();
    Ok(SyntheticSeries {
        series: SeriesTensor::new(n, spec.steps, 1, values)?,
        graph,
    })
}

fn sample_connected_graph(n: usize, mean_degree: f64, seed: u64) -> Result<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = if n > 1 { (mean_degree / (n - 1) as f64).min(1.0) } else { 0.0 };
    for _ in 0..MAX_GRAPH_ATTEMPTS {
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(p) {
                    a.set(i, j, 1.0);
                    a.set(j, i, 1.0);
                }
            }
        }
        if is_connected(&a) {
            return Ok(a);
        }
    }
    Err(Error::DisconnectedGraph(MAX_GRAPH_ATTEMPTS))
}

fn is_connected(a: &Matrix) -> bool {
    let n = a.rows();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if a.get(i, j) != 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn row_normalized(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for r in 0..out.rows() {
        let s: f64 = out.row(r).iter().sum();
        if s > 0.0 {
            out.row_mut(r).iter_mut().for_each(|v| *v /= s);
        }
    }
    out
}
