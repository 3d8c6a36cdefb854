//! Spatio-temporal series storage, the STSF container, and the synthetic
//! traffic generator.

mod stsf;
mod synthetic;

pub use stsf::{load_series, read_series, save_series, write_series, Dtype, StsfHeader, STSF_MAGIC};
pub use synthetic::{generate_synthetic, SyntheticSeries, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Node × step × channel values, stored time-major: `(step, node, channel)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTensor {
    nodes: usize,
    steps: usize,
    channels: usize,
    values: Vec<f64>,
}

impl SeriesTensor {
    pub fn new(nodes: usize, steps: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        let expected = nodes * steps * channels;
        if values.len() != expected {
            return Err(Error::Shape {
                op: "SeriesTensor::new",
                lhs: (nodes * channels, steps),
                rhs: (values.len(), 1),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            nodes,
            steps,
            channels,
            values,
        })
    }

    /// Single-channel series from per-node rows (`rows[node][step]`).
    pub fn from_node_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nodes = rows.len();
        let steps = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != steps) {
            return Err(Error::Format("node rows differ in length".into()));
        }
        let mut values = Vec::with_capacity(nodes * steps);
        for t in 0..steps {
            for r in rows {
                values.push(r[t]);
            }
        }
        Self::new(nodes, steps, 1, values)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, step: usize, node: usize, channel: usize) -> f64 {
        self.values[(step * self.nodes + node) * self.channels + channel]
    }

    /// The N×C snapshot at one step.
    pub fn step_matrix(&self, step: usize) -> Matrix {
        let width = self.nodes * self.channels;
        let start = step * width;
        Matrix::new(self.nodes, self.channels, self.values[start..start + width].to_vec())
            .expect("snapshot extent")
    }

    /// Steps `start..start + len` as a new tensor.
    pub fn slice_steps(&self, start: usize, len: usize) -> SeriesTensor {
        let width = self.nodes * self.channels;
        SeriesTensor {
            nodes: self.nodes,
            steps: len,
            channels: self.channels,
            values: self.values[start * width..(start + len) * width].to_vec(),
        }
    }

    /// N×len matrix of one channel over steps `start..start + len`.
    pub fn channel_block(&self, start: usize, len: usize, channel: usize) -> Matrix {
        Matrix::from_fn(self.nodes, len, |n, t| self.get(start + t, n, channel))
    }

    pub fn node_series(&self, node: usize, channel: usize) -> Vec<f64> {
        (0..self.steps).map(|t| self.get(t, node, channel)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SeriesTensor {
        SeriesTensor {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_time_major() {
        let s = SeriesTensor::from_node_rows(&[vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]]).unwrap();
        assert_eq!(s.values(), &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0]);
        assert_eq!(s.get(2, 1, 0), 30.0);
        assert_eq!(s.step_matrix(1), Matrix::from_rows(&[[2.0], [20.0]]));
        assert_eq!(s.slice_steps(1, 2).node_series(0, 0), vec![2.0, 3.0]);
        assert_eq!(s.channel_block(1, 2, 0), Matrix::from_rows(&[[2.0, 3.0], [20.0, 30.0]]));
    }

    #[test]
    fn rejects_bad_payloads() {
        assert!(SeriesTensor::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(SeriesTensor::new(1, 1, 1, vec![f64::NAN]).is_err());
    }
}
