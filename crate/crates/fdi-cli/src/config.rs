//! JSON experiment configuration and its translation into a runnable
//! scenario.
//!
//! Unknown keys are rejected so typos surface as config errors instead of
//! silently falling back to defaults.

use std::fs;
use std::path::Path;

use fdi_core::{
    build_dc_jacobian, parse_case, parse_matrix, synthetic_jacobian, ArNoiseModel, AttackSpec,
    DetectorChoice, MeasurementMatrix, MeterPlan, Scenario,
};
use nalgebra::DVector;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub state: StateConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    pub run: RunConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// One of `case`, `matrix`, `synthetic`.
    pub source: String,
    pub path: Option<String>,
    pub dims: Option<DimsConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsConfig {
    pub m: usize,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateConfig {
    /// Explicit state vector; defaults to all ones.
    pub values: Option<Vec<f64>>,
    pub perturbation_rho: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub order: usize,
    #[serde(default)]
    pub coeffs: Vec<f64>,
    pub sigma2: f64,
    #[serde(default)]
    pub burn_in: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// One of `none`, `sparse`, `unobservable`, `ica`.
    pub kind: String,
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    pub d: Option<usize>,
    pub sigma_y2: Option<f64>,
}

fn default_magnitude() -> f64 {
    1.0
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { kind: "none".into(), magnitude: 1.0, d: None, sigma_y2: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Samples per trial window.
    pub n: usize,
    /// Trials per hypothesis.
    pub trials: usize,
    pub detectors: Vec<String>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    /// Validates field values and assembles the scenario. Config-level
    /// problems come back as config errors; failures loading referenced data
    /// files are runtime errors.
    pub fn build_scenario(&self, seed_override: Option<u64>) -> Result<Scenario, CliError> {
        if self.run.trials == 0 {
            return Err(CliError::config("run.trials must be >= 1"));
        }
        if self.run.n == 0 {
            return Err(CliError::config("run.n must be >= 1"));
        }
        if self.run.detectors.is_empty() {
            return Err(CliError::config("run.detectors must name at least one detector"));
        }
        let detectors: Vec<DetectorChoice> = self
            .run
            .detectors
            .iter()
            .map(|tag| {
                tag.parse().map_err(|_| {
                    CliError::config(format!(
                        "run.detectors entry `{tag}` is not one of `gaussian`, `ar`"
                    ))
                })
            })
            .collect::<Result<_, _>>()?;

        if self.noise.coeffs.len() != self.noise.order {
            return Err(CliError::config(format!(
                "noise.order = {} but noise.coeffs has {} entries",
                self.noise.order,
                self.noise.coeffs.len()
            )));
        }
        let noise = ArNoiseModel::new(self.noise.coeffs.clone(), self.noise.sigma2)
            .map_err(|e| CliError::config(format!("noise.sigma2: {e}")))?;

        if !(self.state.perturbation_rho >= 0.0) || !self.state.perturbation_rho.is_finite() {
            return Err(CliError::config("state.perturbation_rho must be a nonnegative number"));
        }

        let attack = self.parse_attack()?;
        let mm = self.load_system()?;

        let theta = match &self.state.values {
            Some(values) => {
                if values.len() != mm.states() {
                    return Err(CliError::config(format!(
                        "state.values has {} entries, system has {} states",
                        values.len(),
                        mm.states()
                    )));
                }
                DVector::from_column_slice(values)
            }
            None => DVector::from_element(mm.states(), 1.0),
        };

        let mut scenario = Scenario::new(mm, theta, noise, self.run.n);
        scenario.burn_in = self.noise.burn_in;
        scenario.attack = attack;
        scenario.detectors = detectors;
        scenario.trials = self.run.trials;
        scenario.master_seed = seed_override.unwrap_or(self.run.master_seed);
        scenario.state_perturbation = self.state.perturbation_rho;
        scenario
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(scenario)
    }

    fn parse_attack(&self) -> Result<AttackSpec, CliError> {
        let magnitude = self.attack.magnitude;
        if !magnitude.is_finite() {
            return Err(CliError::config("attack.magnitude must be finite"));
        }
        match self.attack.kind.as_str() {
            "none" => Ok(AttackSpec::None),
            "sparse" => {
                let d = self
                    .attack
                    .d
                    .ok_or_else(|| CliError::config("attack.d is required for kind `sparse`"))?;
                Ok(AttackSpec::Sparse { d, magnitude })
            }
            "unobservable" => Ok(AttackSpec::Unobservable { magnitude }),
            "ica" => {
                let sigma_y2 = self.attack.sigma_y2.ok_or_else(|| {
                    CliError::config("attack.sigma_y2 is required for kind `ica`")
                })?;
                Ok(AttackSpec::Ica { sigma_y2, magnitude })
            }
            other => Err(CliError::config(format!(
                "attack.kind `{other}` is not one of `none`, `sparse`, `unobservable`, `ica`"
            ))),
        }
    }

    fn load_system(&self) -> Result<MeasurementMatrix, CliError> {
        match self.system.source.as_str() {
            "synthetic" => {
                let dims = self.system.dims.as_ref().ok_or_else(|| {
                    CliError::config("system.dims is required for source `synthetic`")
                })?;
                if dims.k == 0 || dims.m <= dims.k {
                    return Err(CliError::config(format!(
                        "system.dims needs m > k >= 1, got m = {}, k = {}",
                        dims.m, dims.k
                    )));
                }
                MeasurementMatrix::from_jacobian(synthetic_jacobian(dims.m, dims.k, dims.seed))
                    .map_err(|e| CliError::runtime(format!("synthetic system: {e}")))
            }
            "matrix" => {
                let path = self.system_path()?;
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::runtime(format!("cannot read matrix file {path}: {e}"))
                })?;
                parse_matrix(&text)
                    .map_err(|e| CliError::runtime(format!("matrix file {path}: {e}")))
            }
            "case" => {
                let path = self.system_path()?;
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::runtime(format!("cannot read case file {path}: {e}")))?;
                let case = parse_case(&text)
                    .map_err(|e| CliError::runtime(format!("case file {path}: {e}")))?;
                let plan = MeterPlan::full(&case);
                build_dc_jacobian(&case, &plan)
                    .map_err(|e| CliError::runtime(format!("case file {path}: {e}")))
            }
            other => Err(CliError::config(format!(
                "system.source `{other}` is not one of `case`, `matrix`, `synthetic`"
            ))),
        }
    }

    fn system_path(&self) -> Result<&str, CliError> {
        self.system
            .path
            .as_deref()
            .ok_or_else(|| {
                CliError::config(format!(
                    "system.path is required for source `{}`",
                    self.system.source
                ))
            })
    }
}
