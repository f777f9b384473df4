use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compound::CompoundParams;
use crate::error::{Error, Result};
use crate::limit;

pub const SEED_ENV: &str = "COMPOUND_TPUT_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Fluid,
    Sim,
    Stationary,
    Approx,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Fluid => "fluid",
            Model::Sim => "sim",
            Model::Stationary => "stationary",
            Model::Approx => "approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_rounds: u64,
    /// Defaults to 10% of `n_rounds`.
    pub warmup: Option<u64>,
    pub replicas: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_rounds: 2_000_000,
            warmup: None,
            replicas: 8,
        }
    }
}

impl SimConfig {
    pub fn warmup_rounds(&self) -> u64 {
        self.warmup.unwrap_or(self.n_rounds / 10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitConfig {
    pub n: usize,
    pub burn_in: usize,
    pub v0: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            n: limit::DEFAULT_N,
            burn_in: limit::DEFAULT_BURN_IN,
            v0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub out_dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("results"),
            format: Format::Csv,
        }
    }
}

/// Externally measured mean window (e.g. from a packet-level simulator),
/// carried through to the output as an annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceValue {
    pub p: f64,
    pub mean_window: f64,
    #[serde(default = "default_reference_label")]
    pub label: String,
}

fn default_reference_label() -> String {
    "ns2".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub params: CompoundParams,
    /// Loss rates, strictly descending.
    pub p_list: Vec<f64>,
    pub models: Vec<Model>,
    pub sim: SimConfig,
    pub limit: LimitConfig,
    pub output: OutputConfig,
    pub seed: Option<u64>,
    /// Column the relative errors are computed against.
    pub baseline: Option<Model>,
    pub reference: Vec<ReferenceValue>,
    /// Packet size in bytes; metadata only, goodput stays in packets/s.
    pub packet_size_bytes: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            params: CompoundParams::default(),
            p_list: vec![
                1e-2, 5e-3, 3e-3, 1e-3, 8e-4, 5e-4, 3e-4, 1e-4, 8e-5, 5e-5, 3e-5,
            ],
            models: vec![Model::Fluid, Model::Sim, Model::Stationary, Model::Approx],
            sim: SimConfig::default(),
            limit: LimitConfig::default(),
            output: OutputConfig::default(),
            seed: None,
            baseline: None,
            reference: Vec::new(),
            packet_size_bytes: 1050,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Output {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Seed from the config, else from `COMPOUND_TPUT_SEED`, else the default.
    pub fn effective_seed(&self) -> Result<u64> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("at least one model must be selected".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::Config("models must not repeat".into()));
        }
        if self.p_list.is_empty() {
            return Err(Error::Config("p_list is empty".into()));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Config(format!("loss rate {p} is outside (0, 1)")));
        }
        if self.p_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "p_list must be sorted in strictly descending order".into(),
            ));
        }
        if self.models.contains(&Model::Sim) {
            if self.sim.replicas == 0 {
                return Err(Error::Config("sim.replicas must be >= 1".into()));
            }
            if self.sim.n_rounds < self.sim.warmup_rounds().saturating_mul(10) {
                return Err(Error::Config(
                    "sim.n_rounds must be at least 10 x sim.warmup".into(),
                ));
            }
        }
        if self.models.contains(&Model::Approx) {
            if self.limit.n <= self.limit.burn_in {
                return Err(Error::Config("limit.n must exceed limit.burn_in".into()));
            }
            if !(self.limit.v0 >= 0.0) {
                return Err(Error::Config("limit.v0 must be >= 0".into()));
            }
        }
        Ok(())
    }
}
