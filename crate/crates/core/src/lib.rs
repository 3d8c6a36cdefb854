//! STLGRU: a graph-convolutional gated recurrent forecaster with a learned
//! sparse graph, built on a small dense-matrix autodiff tape.

pub mod baselines;
pub mod cell;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod params;
pub mod tape;
pub mod trainer;

pub use baselines::BaselineKind;
pub use data::SeriesTensor;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use metrics::{CostReport, Metrics, MetricsReport};
pub use model::{Architecture, GraphMode, Model, ModelConfig};
pub use params::{BoundParams, GradientSet, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use trainer::{Checkpoint, TrainConfig};
