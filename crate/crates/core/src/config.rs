//! Experiment configuration, read from JSON.
//!
//! Every field is optional; missing fields take the defaults below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::des::Time;
use crate::fock::FockSpace;
use crate::hardware::{AfcMemory, ReemissionOrder};
use crate::protocol::{Analyser, NodeNames, Topology};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

fn unit_interval(field: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(invalid(field, format!("{value} is outside [0, 1]")))
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{value} must be positive and finite")))
    }
}

fn non_negative(field: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{value} must be non-negative and finite")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodesConfig {
    pub memory_node_1: String,
    pub memory_node_2: String,
    pub measure_node: String,
}

impl Default for NodesConfig {
    fn default() -> Self {
        let names = NodeNames::default();
        Self {
            memory_node_1: names.memory_node_1,
            memory_node_2: names.memory_node_2,
            measure_node: names.measure_node,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub mode_number: usize,
    pub eta_abs: f64,
    pub eta_ret: f64,
    /// Defaults to `mode_number / frequency_hz`.
    pub storage_time_ps: Option<Time>,
    pub reemission_order: ReemissionOrder,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            mode_number: 100,
            eta_abs: 0.35,
            eta_ret: 1.0,
            storage_time_ps: None,
            reemission_order: ReemissionOrder::Same,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub refractive_index: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            length_km: 20.0,
            attenuation_db_per_km: 0.2,
            refractive_index: 1.47,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dark_count_hz: f64,
    /// Defaults to one source period.
    pub window_ps: Option<Time>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.6,
            dark_count_hz: 150.0,
            window_ps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSweepConfig {
    pub n_steps: usize,
}

impl Default for PhaseSweepConfig {
    fn default() -> Self {
        Self { n_steps: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelitySweepConfig {
    /// Values used for both `mu1` and `mu2`.
    pub mu_grid: Vec<f64>,
}

impl Default for FidelitySweepConfig {
    fn default() -> Self {
        Self {
            mu_grid: vec![0.05, 0.1, 0.15, 0.2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSweepConfig {
    pub mode_numbers: Vec<usize>,
    /// Each value is used for both sources.
    pub mu_values: Vec<f64>,
    /// Points with few modes run extra cycles until they cover this many bins.
    pub min_bins_per_point: u64,
}

impl Default for RateSweepConfig {
    fn default() -> Self {
        let mut mode_numbers = vec![1];
        mode_numbers.extend((1..=10).map(|k| 10 * k));
        Self {
            mode_numbers,
            mu_values: vec![0.05, 0.1, 0.2],
            min_bins_per_point: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographyConfig {
    /// Cycles for the diagonal measurement; defaults to `trials`.
    pub diagonal_trials: Option<u64>,
    /// Cycles per phase step of the interference sweep; defaults to `trials`.
    pub trials_per_phase: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub truncation: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub frequency_hz: f64,
    pub trials: u64,
    pub seed: u64,
    pub delta_phi: f64,
    pub nodes: NodesConfig,
    pub memory: MemoryConfig,
    pub fiber: FiberConfig,
    pub detectors: DetectorConfig,
    pub phase_sweep: PhaseSweepConfig,
    pub fidelity_sweep: FidelitySweepConfig,
    pub rate_sweep: RateSweepConfig,
    pub tomography: TomographyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            truncation: 2,
            mu1: 0.1,
            mu2: 0.1,
            frequency_hz: 5e7,
            trials: 1000,
            seed: 0,
            delta_phi: 0.0,
            nodes: NodesConfig::default(),
            memory: MemoryConfig::default(),
            fiber: FiberConfig::default(),
            detectors: DetectorConfig::default(),
            phase_sweep: PhaseSweepConfig::default(),
            fidelity_sweep: FidelitySweepConfig::default(),
            rate_sweep: RateSweepConfig::default(),
            tomography: TomographyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation < 1 {
            return Err(invalid("truncation", "must be at least 1"));
        }
        non_negative("mu1", self.mu1)?;
        non_negative("mu2", self.mu2)?;
        positive("frequency_hz", self.frequency_hz)?;
        if self.trials < 1 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !self.delta_phi.is_finite() {
            return Err(invalid("delta_phi", "must be finite"));
        }

        let names = [
            ("nodes.memory_node_1", &self.nodes.memory_node_1),
            ("nodes.memory_node_2", &self.nodes.memory_node_2),
            ("nodes.measure_node", &self.nodes.measure_node),
        ];
        for (i, (field, name)) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(invalid(field, "must not be empty"));
            }
            if names[..i].iter().any(|(_, other)| other == name) {
                return Err(invalid(field, format!("duplicate node name {name:?}")));
            }
        }

        let m = &self.memory;
        if m.mode_number < 1 {
            return Err(invalid("memory.mode_number", "must be at least 1"));
        }
        unit_interval("memory.eta_abs", m.eta_abs)?;
        unit_interval("memory.eta_ret", m.eta_ret)?;
        if m.storage_time_ps == Some(0) {
            return Err(invalid("memory.storage_time_ps", "must be positive"));
        }

        positive("fiber.length_km", self.fiber.length_km)?;
        non_negative("fiber.attenuation_db_per_km", self.fiber.attenuation_db_per_km)?;
        if !(self.fiber.refractive_index >= 1.0 && self.fiber.refractive_index.is_finite()) {
            return Err(invalid("fiber.refractive_index", "must be at least 1"));
        }

        unit_interval("detectors.efficiency", self.detectors.efficiency)?;
        non_negative("detectors.dark_count_hz", self.detectors.dark_count_hz)?;
        if self.detectors.window_ps == Some(0) {
            return Err(invalid("detectors.window_ps", "must be positive"));
        }

        if self.phase_sweep.n_steps < 3 {
            return Err(invalid("phase_sweep.n_steps", "must be at least 3"));
        }

        if self.fidelity_sweep.mu_grid.is_empty() {
            return Err(invalid("fidelity_sweep.mu_grid", "must not be empty"));
        }
        for mu in &self.fidelity_sweep.mu_grid {
            non_negative("fidelity_sweep.mu_grid", *mu)?;
        }
        if self.rate_sweep.mode_numbers.is_empty() || self.rate_sweep.mode_numbers.contains(&0) {
            return Err(invalid("rate_sweep.mode_numbers", "must be a non-empty list of positive integers"));
        }
        if self.rate_sweep.mu_values.is_empty() {
            return Err(invalid("rate_sweep.mu_values", "must not be empty"));
        }
        for mu in &self.rate_sweep.mu_values {
            non_negative("rate_sweep.mu_values", *mu)?;
        }
        if self.tomography.diagonal_trials == Some(0) {
            return Err(invalid("tomography.diagonal_trials", "must be at least 1"));
        }
        if self.tomography.trials_per_phase == Some(0) {
            return Err(invalid("tomography.trials_per_phase", "must be at least 1"));
        }

        let topology = self.topology()?;
        topology.validate().map_err(|e| invalid("topology", e.to_string()))?;
        AfcMemory::new(
            m.mode_number,
            m.eta_abs,
            m.eta_ret,
            topology.storage_time(),
            topology.period(),
            m.reemission_order,
            topology.space,
        )
        .map_err(|e| invalid("memory.storage_time_ps", e.to_string()))?;
        Ok(())
    }

    /// Protocol layout for `mu1`, `mu2` with the given analyser.
    pub fn topology(&self) -> Result<Topology> {
        let space = FockSpace::new(self.truncation).map_err(|e| invalid("truncation", e.to_string()))?;
        Ok(Topology {
            names: NodeNames {
                memory_node_1: self.nodes.memory_node_1.clone(),
                memory_node_2: self.nodes.memory_node_2.clone(),
                measure_node: self.nodes.measure_node.clone(),
            },
            space,
            mu: [self.mu1, self.mu2],
            frequency: self.frequency_hz,
            mode_number: self.memory.mode_number,
            eta_abs: self.memory.eta_abs,
            eta_ret: self.memory.eta_ret,
            storage_time: self.memory.storage_time_ps,
            reemission_order: self.memory.reemission_order,
            length_km: self.fiber.length_km,
            attenuation_db_per_km: self.fiber.attenuation_db_per_km,
            refractive_index: self.fiber.refractive_index,
            detector_efficiency: self.detectors.efficiency,
            dark_count_hz: self.detectors.dark_count_hz,
            window: self.detectors.window_ps,
            delta_phi: self.delta_phi,
            analyser: Analyser::Discard,
        })
    }

    /// Cycles simulated for a rate-sweep point with `mode_number` modes.
    pub fn rate_trials(&self, mode_number: usize) -> u64 {
        let m = mode_number.max(1) as u64;
        self.trials.max(self.rate_sweep.min_bins_per_point.div_ceil(m))
    }

    pub fn diagonal_trials(&self) -> u64 {
        self.tomography.diagonal_trials.unwrap_or(self.trials)
    }

    pub fn trials_per_phase(&self) -> u64 {
        self.tomography.trials_per_phase.unwrap_or(self.trials)
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: ConfigError) -> String {
        match err {
            ConfigError::Invalid { field, .. } => field,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn empty_config_is_all_defaults() {
        let config = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(config, ExperimentConfig::default());
    }

    #[test]
    fn defaults_match_reference_parameters() {
        let c = ExperimentConfig::default();
        assert_eq!(c.truncation, 2);
        assert_eq!((c.mu1, c.mu2), (0.1, 0.1));
        assert_eq!(c.memory.eta_abs, 0.35);
        assert_eq!(c.memory.eta_ret, 1.0);
        assert_eq!(c.fiber.length_km, 20.0);
        assert_eq!(c.fiber.attenuation_db_per_km, 0.2);
        assert_eq!(c.fiber.refractive_index, 1.47);
        assert_eq!(c.detectors.efficiency, 0.6);
        assert_eq!(c.detectors.dark_count_hz, 150.0);
        assert_eq!(c.frequency_hz, 5e7);
        assert_eq!(c.memory.mode_number, 100);
        assert_eq!(c.trials, 1000);
        assert_eq!(c.delta_phi, 0.0);
        assert_eq!(c.rate_sweep.mode_numbers, vec![1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
    }

    #[test]
    fn out_of_range_efficiency_names_the_field() {
        let err = ExperimentConfig::from_json(r#"{"memory": {"eta_abs": 1.5}}"#).unwrap_err();
        assert_eq!(field_of(err), "memory.eta_abs");
        let err = ExperimentConfig::from_json(r#"{"detectors": {"efficiency": -0.1}}"#).unwrap_err();
        assert_eq!(field_of(err), "detectors.efficiency");
    }

    #[test]
    fn structural_invariants_are_checked() {
        for (json, field) in [
            (r#"{"memory": {"mode_number": 0}}"#, "memory.mode_number"),
            (r#"{"trials": 0}"#, "trials"),
            (r#"{"phase_sweep": {"n_steps": 2}}"#, "phase_sweep.n_steps"),
            (r#"{"truncation": 0}"#, "truncation"),
            (
                r#"{"memory": {"reemission_order": "reversed", "storage_time_ps": 1000}}"#,
                "memory.storage_time_ps",
            ),
            (r#"{"nodes": {"measure_node": "ANL"}}"#, "nodes.measure_node"),
        ] {
            assert_eq!(field_of(ExperimentConfig::from_json(json).unwrap_err()), field, "{json}");
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"memroy": {}}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let mut config = ExperimentConfig::default();
        config.memory.reemission_order = ReemissionOrder::Reversed;
        config.seed = 42;
        assert_eq!(ExperimentConfig::from_json(&config.to_json()).unwrap(), config);
    }

    #[test]
    fn load_reports_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_config(&dir.path().join("absent.json")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }

    #[test]
    fn rate_trials_cover_minimum_bins() {
        let mut config = ExperimentConfig::default();
        config.trials = 10;
        config.rate_sweep.min_bins_per_point = 1000;
        assert_eq!(config.rate_trials(1), 1000);
        assert_eq!(config.rate_trials(30), 34);
        assert_eq!(config.rate_trials(100), 10);
        assert_eq!(config.rate_trials(1000), 10);
    }

    #[test]
    fn topology_carries_parameters() {
        let config = ExperimentConfig::from_json(r#"{"mu1": 0.05, "fiber": {"length_km": 10}}"#).unwrap();
        let topo = config.topology().unwrap();
        assert_eq!(topo.mu, [0.05, 0.1]);
        assert_eq!(topo.length_km, 10.0);
        assert_eq!(topo.space.truncation(), 2);
    }
}
