use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("gradient root must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },

    #[error("finite-difference oracle produced non-finite loss {value} while perturbing {param}[{index}]")]
    NonFiniteOracle {
        param: String,
        index: usize,
        value: f64,
    },

    #[error("edge probability {value} at ({row}, {col}) is outside the open interval (0, 1)")]
    Domain { row: usize, col: usize, value: f64 },

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("window has {actual} steps but the model is configured for T = {expected}")]
    WindowLength { expected: usize, actual: usize },

    #[error("parameter set does not match the model: {0}")]
    ParamsMismatch(String),

    #[error("series of length {len} is too short: {reason}")]
    SeriesTooShort { len: usize, reason: String },

    #[error("training data has zero variance; regenerate the synthetic series with a nonzero amplitude or noise level")]
    ZeroVariance,

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch} (seed {seed})")]
    Diverged { epoch: usize, batch: usize, seed: u64 },

    #[error("could not sample a connected graph after {0} attempts")]
    DisconnectedGraph(usize),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("STSF payload size mismatch: header declares {expected} bytes, file holds {actual}")]
    PayloadSize { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
