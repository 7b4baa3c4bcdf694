//! Run configuration: a JSON document with defaults for every field.

use std::collections::BTreeMap;
use std::path::Path;

use qtraj_thermo::conditioning::{SamplerMode, SamplerOptions};
use qtraj_thermo::operators::{build_two_level_model, validate_model, Channel, Protocol};
use qtraj_thermo::scalar::ComplexMatrix;
use qtraj_thermo::{Model, Record, TwoLevelParams};
use serde::{Deserialize, Serialize};

use crate::scenarios::SCENARIOS;
use crate::CliError;

/// A complex number as `[re, im]`.
pub type ComplexPair = [f64; 2];

/// Resonantly driven two-level emitter; energies in units of `omega`,
/// times reported in `1/gamma0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelConfig {
    #[serde(default = "defaults::omega")]
    pub omega: f64,
    #[serde(default = "defaults::gamma0")]
    pub gamma0: f64,
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::eta")]
    pub eta_minus: f64,
    #[serde(default = "defaults::eta")]
    pub eta_plus: f64,
}

impl Default for TwoLevelConfig {
    fn default() -> Self {
        TwoLevelConfig {
            omega: defaults::omega(),
            gamma0: defaults::gamma0(),
            epsilon: defaults::epsilon(),
            beta: defaults::beta(),
            eta_minus: defaults::eta(),
            eta_plus: defaults::eta(),
        }
    }
}

impl TwoLevelConfig {
    pub fn params(&self) -> TwoLevelParams {
        TwoLevelParams {
            omega: self.omega,
            gamma0: self.gamma0,
            epsilon: self.epsilon,
            beta: self.beta,
            eta_minus: self.eta_minus,
            eta_plus: self.eta_plus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub matrix: Vec<Vec<ComplexPair>>,
    pub entropy_flux: f64,
    pub efficiency: f64,
    #[serde(default)]
    pub reservoir: usize,
    pub reverse_index: usize,
}

/// A model given by its matrices in the basis where time reversal is complex conjugation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitConfig {
    pub hamiltonian: Vec<Vec<ComplexPair>>,
    pub channels: Vec<ChannelConfig>,
    /// Inverse temperature per reservoir id.
    pub beta: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoLevel(TwoLevelConfig),
    Explicit(ExplicitConfig),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::TwoLevel(TwoLevelConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    Chained,
    #[default]
    LookAhead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    /// Protocol duration in `1/gamma0` (model time units for explicit models).
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
    /// Hidden completions per visible record (`M`).
    #[serde(default = "defaults::count")]
    pub samples: usize,
    /// Unconditioned trajectories (`N`).
    #[serde(default = "defaults::count")]
    pub trajectories: usize,
    /// Bins of the discrete oracle grid.
    #[serde(default = "defaults::bins")]
    pub bins: usize,
    /// Horizon of the discrete oracle; `oracle_tau / bins` must keep every
    /// bin's total jump probability at most one.
    #[serde(default = "defaults::oracle_tau")]
    pub oracle_tau: f64,
    /// Simpson subintervals per smooth piece of the filtered state.
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default = "defaults::eta_grid")]
    pub eta_grid: Vec<f64>,
    /// Durations compared by `bound-eta-sweep`.
    #[serde(default = "defaults::taus")]
    pub taus: Vec<f64>,
    /// Durations of the scaled-CGF ladder in `tail-bounds`.
    #[serde(default = "defaults::cgf_taus")]
    pub cgf_taus: Vec<f64>,
    #[serde(default = "defaults::xi_grid")]
    pub xi_grid: Vec<f64>,
    #[serde(default = "defaults::q_grid")]
    pub q_grid: Vec<f64>,
    /// Visible records in the line format `n | t:k ... | m | tau`; empty
    /// selects the scenario's own records.
    #[serde(default)]
    pub records: Vec<String>,
    #[serde(default)]
    pub sampler: SamplerChoice,
    #[serde(default = "defaults::max_attempts")]
    pub max_attempts: u64,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub output: Option<String>,
}

mod defaults {
    pub fn omega() -> f64 {
        1.0
    }
    pub fn gamma0() -> f64 {
        1e-3
    }
    pub fn epsilon() -> f64 {
        1e-2
    }
    pub fn beta() -> f64 {
        0.2
    }
    pub fn eta() -> f64 {
        0.2
    }
    pub fn tau() -> f64 {
        1.0
    }
    pub fn count() -> usize {
        10_000
    }
    pub fn bins() -> usize {
        4
    }
    pub fn oracle_tau() -> f64 {
        0.5
    }
    pub fn cgf_taus() -> Vec<f64> {
        vec![1.0, 2.0, 3.0]
    }
    pub fn steps() -> usize {
        512
    }
    pub fn eta_grid() -> Vec<f64> {
        vec![0.2, 0.4, 0.6, 0.8, 1.0]
    }
    pub fn taus() -> Vec<f64> {
        vec![0.1, 0.5]
    }
    pub fn xi_grid() -> Vec<f64> {
        (0..=12).map(|i| i as f64 * 0.25).collect()
    }
    pub fn q_grid() -> Vec<f64> {
        vec![1.0, 2.0]
    }
    pub fn max_attempts() -> u64 {
        1_000_000
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config deserializes")
    }
}

fn matrix_from_pairs(
    name: &str,
    rows: &[Vec<ComplexPair>],
) -> Result<ComplexMatrix<f64>, CliError> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Invalid(vec![format!(
            "{name}: must be a non-empty square matrix"
        )]));
    }
    Ok(ComplexMatrix::<f64>::from_fn(d, d, |i, j| {
        nalgebra::Complex::new(rows[i][j][0], rows[i][j][1])
    }))
}

impl RunConfig {
    /// Parses JSON text; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Every violated constraint, each prefixed with the offending field.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut unit = |name: &str, x: f64| {
            if !(0.0..=1.0).contains(&x) {
                out.push(format!("{name}: {x} outside [0, 1]"));
            }
        };
        if let ModelConfig::TwoLevel(p) = &self.model {
            unit("model.two_level.eta_minus", p.eta_minus);
            unit("model.two_level.eta_plus", p.eta_plus);
        }
        if let ModelConfig::Explicit(e) = &self.model {
            for (i, ch) in e.channels.iter().enumerate() {
                unit(
                    &format!("model.explicit.channels[{i}].efficiency"),
                    ch.efficiency,
                );
            }
        }
        for (i, eta) in self.eta_grid.iter().enumerate() {
            unit(&format!("eta_grid[{i}]"), *eta);
        }
        for (name, n) in [
            ("samples", self.samples),
            ("trajectories", self.trajectories),
            ("bins", self.bins),
            ("steps", self.steps),
        ] {
            if n < 1 {
                out.push(format!("{name}: must be at least 1"));
            }
        }
        if self.max_attempts < 1 {
            out.push("max_attempts: must be at least 1".into());
        }
        if !(self.tau > 0.0) {
            out.push(format!("tau: {} must be positive", self.tau));
        }
        if !(self.oracle_tau > 0.0) {
            out.push(format!("oracle_tau: {} must be positive", self.oracle_tau));
        }
        if self.taus.iter().any(|t| !(*t > 0.0)) {
            out.push("taus: durations must be positive".into());
        }
        if self.cgf_taus.iter().any(|t| !(*t > 0.0)) {
            out.push("cgf_taus: durations must be positive".into());
        }
        if self.xi_grid.iter().any(|x| !(*x >= 0.0)) {
            out.push("xi_grid: values must be non-negative".into());
        }
        if self.q_grid.iter().any(|q| !(*q >= 1.0)) {
            out.push("q_grid: values must be at least 1".into());
        }
        if let Some(s) = &self.scenario {
            if !SCENARIOS.iter().any(|(name, _)| name == s) {
                out.push(format!("scenario: unknown `{s}`"));
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            if let Err(e) = r.parse::<Record>() {
                out.push(format!("records[{i}]: {e}"));
            }
        }
        if out.is_empty() {
            if let Err(CliError::Invalid(v)) = self.build_model(self.tau) {
                out.extend(v);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(v))
        }
    }

    /// The model on `[0, tau]`, in `1/gamma0` time units for the two-level emitter.
    pub fn build_model(&self, tau: f64) -> Result<Model, CliError> {
        let model = match &self.model {
            ModelConfig::TwoLevel(p) => build_two_level_model(&p.params().in_decay_units(), tau)?,
            ModelConfig::Explicit(e) => {
                let hamiltonian = matrix_from_pairs("model.explicit.hamiltonian", &e.hamiltonian)?;
                let dim = hamiltonian.nrows();
                let channels = e
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Ok(Channel {
                            index: i,
                            matrix: matrix_from_pairs(
                                &format!("model.explicit.channels[{i}].matrix"),
                                &c.matrix,
                            )?,
                            entropy_flux: c.entropy_flux,
                            efficiency: c.efficiency,
                            reservoir: c.reservoir,
                            reverse_index: c.reverse_index,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Model {
                    dim,
                    protocol: Protocol::constant(hamiltonian, tau),
                    channels,
                    beta: e.beta.clone(),
                    reversal_basis: ComplexMatrix::<f64>::identity(dim, dim),
                }
            }
        };
        let violations = validate_model(&model);
        if !violations.is_empty() {
            return Err(CliError::Invalid(
                violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        Ok(model)
    }

    /// Efficiencies replaced: `(η₋, η₊)` for the emitter, every channel set to `eta.0` otherwise.
    pub fn with_efficiencies(&self, eta_minus: f64, eta_plus: f64) -> RunConfig {
        let mut c = self.clone();
        match &mut c.model {
            ModelConfig::TwoLevel(p) => {
                p.eta_minus = eta_minus;
                p.eta_plus = eta_plus;
            }
            ModelConfig::Explicit(e) => {
                for ch in &mut e.channels {
                    ch.efficiency = eta_minus;
                }
            }
        }
        c
    }

    /// Energy unit of reported heats: `omega / gamma0` for the emitter, 1 otherwise.
    pub fn energy_unit(&self) -> f64 {
        match &self.model {
            ModelConfig::TwoLevel(p) => p.omega / p.gamma0,
            ModelConfig::Explicit(_) => 1.0,
        }
    }

    pub fn sampler_options(&self) -> SamplerOptions {
        SamplerOptions {
            mode: match self.sampler {
                SamplerChoice::Chained => SamplerMode::Chained,
                SamplerChoice::LookAhead => SamplerMode::LookAhead,
            },
            max_attempts: self.max_attempts,
        }
    }

    /// Configured records.
    pub fn parsed_records(&self) -> Vec<Record> {
        self.records.iter().filter_map(|r| r.parse().ok()).collect()
    }

    /// Compact JSON of the full configuration with defaults filled in,
    /// omitting the output directory.
    pub fn echo(&self) -> String {
        let echoed = RunConfig {
            output: None,
            ..self.clone()
        };
        serde_json::to_string(&echoed).expect("config serializes")
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)
}
