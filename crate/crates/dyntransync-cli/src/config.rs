//! TOML configuration types and their mapping onto library structures.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dyntransync::estimators::LambdaRegime;
use dyntransync::estimators::SolverConfig;
use dyntransync::evalmetrics::{BenchConfig, CvCriterion, EstimatorKind};
use dyntransync::synth::{EdgeSchedule, SynthConfig};

use crate::{CliError, CliResult};

/// Reads and parses a TOML config; parse errors carry the offending field.
pub(crate) fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("in {}: {e}", path.display())))
}

/// Which observation model `synth` draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum SynthModel {
    #[default]
    Transync,
    Btl,
}

/// `synth` configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SynthFile {
    pub n: usize,
    pub horizon: usize,
    pub smoothness: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub edge_probability: EdgeSchedule,
    #[serde(default)]
    pub per_step_connected: bool,
    #[serde(default)]
    pub model: SynthModel,
    #[serde(default = "default_btl_trials")]
    pub btl_trials: u64,
}

fn default_btl_trials() -> u64 {
    16
}

impl SynthFile {
    pub fn to_synth_config(&self) -> SynthConfig {
        SynthConfig {
            n: self.n,
            horizon: self.horizon,
            smoothness: self.smoothness,
            noise_sigma: self.noise_sigma,
            edge_probability: self.edge_probability.clone(),
            seed: self.seed,
            per_step_connected: self.per_step_connected,
            btl_trials: self.btl_trials,
        }
    }
}

/// `bench` configuration file: the harness configuration verbatim.
pub(crate) type BenchFile = BenchConfig;

/// `cv` configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct CvFile {
    /// Observation set (JSON) to cross-validate on.
    pub observations: PathBuf,
    pub method: MethodArg,
    pub grid: Vec<f64>,
    pub criterion: CriterionArg,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_repeats() -> usize {
    10
}

/// `ingest` configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct IngestFile {
    pub mode: IngestMode,
    /// Raw CSV input.
    pub input: PathBuf,
    /// Keep only the N most-rated items (ties broken by name).
    #[serde(default)]
    pub top_items: Option<usize>,
    #[serde(default)]
    pub plan: PlanChoice,
    /// Explicit raw-unit range, e.g. to expose trailing empty months.
    #[serde(default)]
    pub range: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum IngestMode {
    Ratings,
    Matches,
}

/// How raw time units are merged into windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub(crate) enum PlanChoice {
    /// Greedy merge until each window's graph is connected (ratings mode).
    #[default]
    Auto,
    /// One window per raw unit.
    OnePerUnit,
    /// Fixed window width in raw units.
    FixedSize { size: usize },
}

/// `diagnose` configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct DiagnoseFile {
    /// Graph sequence (JSON); either a bare sequence or an observation set.
    pub graphs: PathBuf,
    pub lambda: f64,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
}

fn default_kappas() -> Vec<f64> {
    vec![1.1, 2.0, 10.0]
}

/// Estimator name shared by `estimate` and `cv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum MethodArg {
    Ls,
    Dls,
    Dproj,
}

impl MethodArg {
    pub fn kind(self) -> EstimatorKind {
        match self {
            MethodArg::Ls => EstimatorKind::Ls,
            MethodArg::Dls => EstimatorKind::Dls,
            MethodArg::Dproj => EstimatorKind::Dproj,
        }
    }
}

/// Regime flag for the dls parameter rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum RegimeArg {
    FixedGraph,
    Evolving,
    EvolvingWithMargin,
}

impl RegimeArg {
    pub fn regime(self) -> LambdaRegime {
        match self {
            RegimeArg::FixedGraph => LambdaRegime::FixedGraph,
            RegimeArg::Evolving => LambdaRegime::Evolving,
            RegimeArg::EvolvingWithMargin => LambdaRegime::EvolvingWithMargin,
        }
    }
}

/// CV scoring criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum CriterionArg {
    Mse,
    Upsets,
}

impl CriterionArg {
    pub fn criterion(self) -> CvCriterion {
        match self {
            CriterionArg::Mse => CvCriterion::Mse,
            CriterionArg::Upsets => CvCriterion::Upsets,
        }
    }
}
