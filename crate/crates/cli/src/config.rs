use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use stlgru::cell::AttentionAxis;
use stlgru::data::SyntheticSpec;
use stlgru::model::{Architecture, HiddenInit, ModelConfig};
use stlgru::trainer::{Precision, TrainConfig, DEFAULT_HORIZONS};

use crate::Failure;

/// Flags shared by every command. Each one overrides the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// TOML file with `data`, `out`, `horizons` and `[model]`, `[train]`, `[synthetic]` tables
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Input series in STSF format
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = ["stlgru", "gcn_gru", "gcn_lstm", "gcn_tcn", "persistence"])]
    pub model: Option<String>,
    /// Replace the sampled graph with a dense row-softmaxed embedding graph
    #[arg(long)]
    pub no_gumbel: bool,
    /// Bypass the memory-augmented attention
    #[arg(long)]
    pub no_maa: bool,
    #[arg(long, value_name = "INT")]
    pub hidden_dim: Option<usize>,
    #[arg(long, value_name = "INT")]
    pub embed_dim: Option<usize>,
    #[arg(long, value_name = "FLOAT")]
    pub tau: Option<f64>,
    #[arg(long, value_name = "INT")]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "INT")]
    pub batch: Option<usize>,
    #[arg(long, value_name = "FLOAT")]
    pub lr: Option<f64>,
    /// Training seed (for `synth`, the signal seed)
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Reported horizons; the largest one sets the forecast length T'
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub horizon: Option<Vec<usize>>,
    /// Input window length T
    #[arg(long, value_name = "INT")]
    pub input_len: Option<usize>,
    #[arg(long, value_parser = ["feature", "node"])]
    pub attention_axis: Option<String>,
    /// `zeros` or `gaussian(<std>)`
    #[arg(long, value_name = "INIT")]
    pub hidden_init: Option<String>,
    #[arg(long, value_parser = ["f32", "f64"])]
    pub precision: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub horizons: Vec<usize>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: PathBuf::from("out"),
            horizons: DEFAULT_HORIZONS.to_vec(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            synthetic: SyntheticSpec::default(),
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("invalid `{field}`: {reason}"))
}

impl RunConfig {
    /// Built-in defaults, then the config file, then flags.
    pub fn resolve(flags: &Flags) -> Result<Self, Failure> {
        let mut cfg = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        cfg.apply(flags)?;
        cfg.sync();
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
    }

    fn apply(&mut self, f: &Flags) -> Result<(), Failure> {
        if let Some(p) = &f.data {
            self.data = Some(p.clone());
        }
        if let Some(p) = &f.out {
            self.out = p.clone();
        }
        if let Some(m) = &f.model {
            self.model.architecture = m.parse::<Architecture>().map_err(|e| invalid("model", e))?;
        }
        if f.no_gumbel {
            self.model.use_gumbel = false;
        }
        if f.no_maa {
            self.model.use_maa = false;
        }
        if let Some(v) = f.hidden_dim {
            self.model.hidden_dim = v;
        }
        if let Some(v) = f.embed_dim {
            self.model.embed_dim = v;
        }
        if let Some(v) = f.tau {
            self.model.tau = v;
        }
        if let Some(v) = f.input_len {
            self.model.input_len = v;
        }
        if let Some(v) = &f.attention_axis {
            self.model.attention_axis = match v.as_str() {
                "node" => AttentionAxis::Node,
                _ => AttentionAxis::Feature,
            };
        }
        if let Some(v) = &f.hidden_init {
            self.model.hidden_init = v.parse::<HiddenInit>().map_err(|e| invalid("hidden-init", e))?;
        }
        if let Some(v) = f.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = f.batch {
            self.train.batch_size = v;
        }
        if let Some(v) = f.lr {
            self.train.learning_rate = v;
        }
        if let Some(v) = f.seed {
            self.train.seed = v;
            self.synthetic.signal_seed = v;
        }
        if let Some(v) = &f.horizon {
            self.horizons = v.clone();
        }
        if let Some(v) = &f.precision {
            self.train.precision = if v == "f32" { Precision::F32 } else { Precision::F64 };
        }
        Ok(())
    }

    /// T' follows the largest reported horizon; the trainer mirrors the model's window.
    fn sync(&mut self) {
        if let Some(&h) = self.horizons.iter().max() {
            self.model.horizon = h;
        }
        self.train.input_len = self.model.input_len;
        self.train.horizon = self.model.horizon;
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(invalid("horizon", "need at least one horizon, each ≥ 1"));
        }
        self.model.validate().map_err(usage)?;
        self.train.validate().map_err(usage)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

pub fn usage(e: stlgru::Error) -> Failure {
    Failure::Usage(e.to_string())
}
