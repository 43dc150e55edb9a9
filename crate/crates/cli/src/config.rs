//! Experiment configuration: a strict TOML file covering every module
//! knob. Unknown keys are rejected; omitted sections fall back to defaults
//! and are echoed into the output manifest.

use serde::{Deserialize, Serialize};
use std::path::Path;

use mmnoma::channel::{ArrayGeometry, GainModel};
use mmnoma::clustering::ClusteringConfig;
use mmnoma::noma_phy::RadioConfig;
use mmnoma::pipeline::{MobilityModel, PipelineConfig, Scheme, ValidationConfig};
use mmnoma::predictor::TrainingConfig;
use mmnoma::scene::{RenderConfig, SceneConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookSection {
    pub beam_count: usize,
}

impl Default for CodebookSection {
    fn default() -> Self {
        Self { beam_count: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Hidden layer widths of the classifier.
    pub hidden: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { hidden: vec![128] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Evaluation population sweep for `compare`.
    pub user_counts: Vec<usize>,
    pub n_train: usize,
    pub jobs: usize,
    /// Frames per mobility trial.
    pub slots: usize,
    /// Staleness sweep for `stale-sweep`.
    pub staleness_values: Vec<usize>,
    /// Schemes evaluated by `compare`.
    pub schemes: Vec<Scheme>,
    pub array: ArrayGeometry,
    pub codebook: CodebookSection,
    pub gain: GainModel,
    pub scene: SceneConfig,
    pub render: RenderConfig,
    pub model: ModelSection,
    pub training: TrainingConfig,
    pub clustering: ClusteringConfig,
    pub radio: RadioConfig,
    pub validation: ValidationConfig,
    pub mobility: MobilityModel,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: (1..=10).collect(),
            user_counts: vec![40],
            n_train: 100,
            jobs: 1,
            slots: 30,
            staleness_values: vec![0, 2, 8],
            schemes: vec![Scheme::CsiFresh, Scheme::Vision, Scheme::OracleVision],
            array: ArrayGeometry::default(),
            codebook: CodebookSection::default(),
            gain: GainModel::default(),
            scene: SceneConfig::default(),
            render: RenderConfig::default(),
            model: ModelSection::default(),
            training: TrainingConfig::default(),
            clustering: ClusteringConfig::default(),
            radio: RadioConfig::default(),
            validation: ValidationConfig::default(),
            mobility: MobilityModel::default(),
        }
    }
}

impl ExperimentConfig {
    /// Assembles the per-trial config; `user_count` overrides the scene
    /// population for population sweeps.
    pub fn pipeline_config(&self, user_count: usize) -> PipelineConfig {
        PipelineConfig {
            geometry: self.array,
            beam_count: self.codebook.beam_count,
            gain: self.gain,
            scene: SceneConfig { user_count, ..self.scene },
            render: self.render,
            hidden_layers: self.model.hidden.clone(),
            training: self.training,
            n_train: self.n_train,
            clustering: self.clustering,
            radio: self.radio,
            validation: self.validation,
            mobility: self.mobility,
            slots: self.slots,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: list must not be empty".into()));
        }
        if self.user_counts.is_empty() || self.user_counts.contains(&0) {
            return Err(CliError::Config("user_counts: entries must be >= 1".into()));
        }
        if self.staleness_values.is_empty() {
            return Err(CliError::Config("staleness_values: list must not be empty".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Config("jobs: must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(CliError::Config("schemes: list must not be empty".into()));
        }
        if self.schemes.contains(&Scheme::CsiStale) {
            return Err(CliError::Config(
                "schemes: csi_stale is evaluated by stale-sweep, not compare".into(),
            ));
        }
        for &user_count in &self.user_counts {
            self.pipeline_config(user_count).validate()?;
        }
        Ok(())
    }

    /// Serializes the effective configuration; re-parsing yields an
    /// identical config.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("serialize: {}", one_line(&e.to_string()))))
    }
}

fn one_line(message: &str) -> String {
    message.trim().replace('\n', " | ")
}

/// Parses a config from a string; unknown keys, syntax errors and
/// invariant violations all fail with the offending key or line.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig =
        toml::from_str(text).map_err(|e| CliError::Config(one_line(&e.to_string())))?;
    config.validate()?;
    Ok(config)
}

/// Strict parse of a TOML config file. An empty file yields the defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}
