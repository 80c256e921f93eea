//! Simulation and detection of false data injection in linear power-system
//! state estimation.
//!
//! The crate covers the full pipeline:
//!
//! - [`grid`] / [`measurement`]: case files, DC Jacobians, matrix ingestion,
//!   and the orthonormal complement behind residual detection.
//! - [`ar`]: AR(p) colored-noise simulation and the banded whitening
//!   operator.
//! - [`estimation`]: WLS, sequential Gaussian, and AR maximum-likelihood
//!   state estimators.
//! - [`detection`]: white, Gaussian, and AR-whitened GLRT detectors with
//!   empirical thresholding.
//! - [`attack`] / [`ica`]: sparse, column-space, and blind component-analysis
//!   attack generators.
//! - [`experiment`]: the seeded Monte-Carlo harness with ROC/AUC summaries.

pub mod ar;
pub mod attack;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod grid;
pub mod ica;
pub mod measurement;
pub mod seeding;

pub use ar::{fit_ar_yule_walker, ArNoiseModel, WhiteningOperator};
pub use attack::{sparse_attack, unobservable_attack, AttackKind, AttackVector};
pub use detection::{
    decide, glrt_ar, glrt_gaussian, glrt_gaussian_sequential, glrt_white, threshold_for_pfa,
    ArDetector, DetectionStatistic, DetectorKind, GaussianDetector, NuisanceEstimates,
};
pub use error::{Error, Result};
pub use estimation::{
    ar_mle_estimate, wls_estimate, wls_estimate_sequential, EstimatorKind, ObservationBlock,
    StateEstimate,
};
pub use experiment::{
    mse_eval, mse_eval_squared, perturb_states, roc_from_scores, run_experiment, run_trial,
    simulate_trial_data, AttackSpec, DetectorChoice, Hypothesis, RocCurve, RocPoint, Scenario,
    ScoreRow, ScoreTable, TrialData,
};
pub use grid::{build_dc_jacobian, parse_case, Branch, Bus, GridCase, Meter, MeterPlan};
pub use ica::{fastica, ica_attack, IcaConvergence, IcaModel, IcaOptions};
pub use measurement::{
    format_matrix, orthogonal_complement, parse_matrix, synthetic_jacobian, AttackDecomposition,
    MeasurementMatrix,
};
