//! Pipeline configuration: one flat JSON document with a default for every key.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{Delta, Weights};
use crate::error::{Error, Result};
use crate::gates::{
    TuckmanConfig, WindowStat, DEFAULT_GATE_VALUE_HALF_WIDTH, DEFAULT_GATE_WINDOW_HALF_WIDTH,
};
use crate::groundtruth::{DEFAULT_BAND_MULTIPLIER, DEFAULT_SIGMA_FLOOR};
use crate::metrics::{
    hashed_embedding_provider, CategoryTable, EmbeddingProvider, FillPolicy, MetricId,
};
use crate::trace::{TrimPolicy, DEFAULT_BINS, DEFAULT_TRIM_FRACTION};

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "SLALOM_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateSource {
    /// Derived from ground-truth bands over the Tuckman phase windows.
    #[default]
    Band,
    /// The built-in Tuckman centers.
    Tuckman,
    /// Read from `gates_file`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingChoice {
    #[default]
    Hashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub bins: usize,
    pub trim_fraction: f64,
    pub trim_policy: TrimPolicy,
    pub multiplier: f64,
    pub sigma_floor: f64,
    pub metrics: Vec<MetricId>,
    pub fill: FillPolicy,
    pub gate_source: GateSource,
    pub gates_file: Option<PathBuf>,
    pub gate_value_half_width: f64,
    pub gate_window_half_width: f64,
    pub window_stat: WindowStat,
    /// Per-metric weights; absent metrics weigh 1.
    pub weights: Weights,
    pub delta: Delta,
    /// Optional Sakoe-Chiba radius.
    pub dtw_window: Option<usize>,
    /// Skip DTW scoring for trajectories that miss a gate.
    pub prune_before_scoring: bool,
    pub embedding: EmbeddingChoice,
    pub embedding_dim: usize,
    pub embedding_seed: u64,
    pub categories_file: Option<PathBuf>,
    pub seed: u64,
    pub noise_sigma: f64,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bins: DEFAULT_BINS,
            trim_fraction: DEFAULT_TRIM_FRACTION,
            trim_policy: TrimPolicy::AllButFirst,
            multiplier: DEFAULT_BAND_MULTIPLIER,
            sigma_floor: DEFAULT_SIGMA_FLOOR,
            metrics: MetricId::DEFAULTS.to_vec(),
            fill: FillPolicy::Linear,
            gate_source: GateSource::Band,
            gates_file: None,
            gate_value_half_width: DEFAULT_GATE_VALUE_HALF_WIDTH,
            gate_window_half_width: DEFAULT_GATE_WINDOW_HALF_WIDTH,
            window_stat: WindowStat::Mean,
            weights: Weights::new(),
            delta: Delta::Absolute,
            dtw_window: None,
            prune_before_scoring: true,
            embedding: EmbeddingChoice::Hashed,
            embedding_dim: 256,
            embedding_seed: 0,
            categories_file: None,
            seed: 0,
            noise_sigma: 0.02,
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json<R: Read>(src: R) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_reader(src)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(std::io::BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::invalid("bins must be positive"));
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(Error::invalid("trim_fraction must lie in [0, 0.5)"));
        }
        if !(self.multiplier > 0.0) {
            return Err(Error::invalid("multiplier must be positive"));
        }
        if !(self.sigma_floor >= 0.0) {
            return Err(Error::invalid("sigma_floor must be non-negative"));
        }
        if self.metrics.is_empty() {
            return Err(Error::invalid("metrics must not be empty"));
        }
        if self.gate_source == GateSource::File && self.gates_file.is_none() {
            return Err(Error::invalid("gate_source `file` requires gates_file"));
        }
        if self.weights.values().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn tuckman(&self) -> TuckmanConfig {
        TuckmanConfig {
            value_half_width: self.gate_value_half_width,
            window_half_width: self.gate_window_half_width,
        }
    }

    pub fn provider(&self) -> Result<Box<dyn EmbeddingProvider>> {
        match self.embedding {
            EmbeddingChoice::Hashed => Ok(Box::new(hashed_embedding_provider(
                self.embedding_dim,
                self.embedding_seed,
            )?)),
        }
    }

    pub fn categories(&self) -> Result<CategoryTable> {
        match &self.categories_file {
            None => Ok(CategoryTable::builtin()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
                CategoryTable::parse(&text).map_err(|e| e.in_file(path))
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
