//! Seeded Monte-Carlo harness: paired H0/H1 trials over a scenario, score
//! tables, ROC/AUC summaries, and the dynamic-load robustness pieces.
//!
//! Every random draw is keyed by `(master_seed, trial, hypothesis, stream)`
//! (see [`crate::seeding`]), so a score table is a pure function of its
//! scenario no matter how trials are scheduled.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::ar::ArNoiseModel;
use crate::attack::{sparse_attack, unobservable_attack, AttackVector};
use crate::detection::{ArDetector, GaussianDetector};
use crate::error::{Error, Result};
use crate::estimation::{ObservationBlock, StateEstimate};
use crate::ica::{ica_attack, IcaOptions};
use crate::measurement::MeasurementMatrix;
use crate::seeding::{trial_rng, Stream};

/// Trial label: H0 is attack-free, H1 carries the scenario's attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    Null = 0,
    Alternative = 1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::Null => "H0",
            Hypothesis::Alternative => "H1",
        })
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H0" => Ok(Hypothesis::Null),
            "H1" => Ok(Hypothesis::Alternative),
            other => Err(Error::InvalidParameter(format!("unknown hypothesis label `{other}`"))),
        }
    }
}

/// Which detectors a scenario evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorChoice {
    Gaussian,
    Ar,
}

impl fmt::Display for DetectorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorChoice::Gaussian => "gaussian",
            DetectorChoice::Ar => "ar",
        })
    }
}

impl FromStr for DetectorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(DetectorChoice::Gaussian),
            "ar" => Ok(DetectorChoice::Ar),
            other => Err(Error::InvalidParameter(format!("unknown detector tag `{other}`"))),
        }
    }
}

/// Attack family injected under H1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackSpec {
    None,
    /// Constant `magnitude` on `d` uniformly drawn meters.
    Sparse { d: usize, magnitude: f64 },
    /// `H theta_a` with `theta_a` drawn N(0, magnitude^2) per component.
    Unobservable { magnitude: f64 },
    /// Component-analysis attack inferred from a clean window of the same
    /// trial.
    Ica { sigma_y2: f64, magnitude: f64 },
}

/// A full experiment description. Immutable once built; shared read-only by
/// the trial workers.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mm: MeasurementMatrix,
    pub theta: DVector<f64>,
    /// One noise model per meter.
    pub noise: Vec<ArNoiseModel>,
    /// Samples per trial window (N).
    pub samples: usize,
    /// Leading samples discarded before each window. Zero keeps the window
    /// anchored at the models' stored initial conditions, which is the
    /// setting the whitening offset `c` describes exactly; positive values
    /// give near-stationary noise that the zero-initial whitening only
    /// approximates.
    pub burn_in: usize,
    pub attack: AttackSpec,
    pub detectors: Vec<DetectorChoice>,
    /// Trials per hypothesis.
    pub trials: usize,
    pub master_seed: u64,
    /// Half-width of the per-trial multiplicative state perturbation.
    pub state_perturbation: f64,
    /// Reuse trial 0's attack draw in every trial (debugging aid).
    pub fixed_attack: bool,
}

impl Scenario {
    /// Scenario with one shared noise model, both detectors, and the desk
    /// defaults: 1000 trials, no burn-in, no perturbation.
    pub fn new(
        mm: MeasurementMatrix,
        theta: DVector<f64>,
        noise: ArNoiseModel,
        samples: usize,
    ) -> Self {
        let meters = mm.meters();
        Self {
            mm,
            theta,
            noise: vec![noise; meters],
            samples,
            burn_in: 0,
            attack: AttackSpec::None,
            detectors: vec![DetectorChoice::Gaussian, DetectorChoice::Ar],
            trials: 1_000,
            master_seed: 0,
            state_perturbation: 0.0,
            fixed_attack: false,
        }
    }

    /// Innovation variances of the per-meter noise models; the Gaussian
    /// detector and estimator run against these.
    pub fn meter_variances(&self) -> Vec<f64> {
        self.noise.iter().map(ArNoiseModel::sigma2).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples per trial must be >= 1".into()));
        }
        if self.theta.len() != self.mm.states() {
            return Err(Error::Dimension(format!(
                "state vector of length {}, expected K = {}",
                self.theta.len(),
                self.mm.states()
            )));
        }
        if self.noise.len() != self.mm.meters() {
            return Err(Error::Dimension(format!(
                "{} noise models for {} meters",
                self.noise.len(),
                self.mm.meters()
            )));
        }
        if self.detectors.is_empty() {
            return Err(Error::InvalidParameter("no detectors requested".into()));
        }
        if !(self.state_perturbation >= 0.0) || !self.state_perturbation.is_finite() {
            return Err(Error::InvalidParameter(
                "state perturbation must be a nonnegative number".into(),
            ));
        }
        match self.attack {
            AttackSpec::None => {}
            AttackSpec::Sparse { d, magnitude } => {
                if d > self.mm.meters() {
                    return Err(Error::InvalidParameter(format!(
                        "attack sparsity {d} exceeds meter count {}",
                        self.mm.meters()
                    )));
                }
                if !magnitude.is_finite() {
                    return Err(Error::InvalidParameter("attack magnitude must be finite".into()));
                }
            }
            AttackSpec::Unobservable { magnitude } => {
                if !magnitude.is_finite() {
                    return Err(Error::InvalidParameter("attack magnitude must be finite".into()));
                }
            }
            AttackSpec::Ica { sigma_y2, magnitude } => {
                if !(sigma_y2 >= 0.0) || !sigma_y2.is_finite() {
                    return Err(Error::InvalidParameter(
                        "quasi-state variance must be nonnegative".into(),
                    ));
                }
                if !magnitude.is_finite() {
                    return Err(Error::InvalidParameter("attack magnitude must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Everything one trial generated: the observed block, the injected attack,
/// and the (possibly perturbed) state behind it.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub observations: ObservationBlock,
    pub attack: AttackVector,
    pub theta: DVector<f64>,
}

/// One score-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub trial: usize,
    pub detector: DetectorChoice,
    pub hypothesis: Hypothesis,
    pub statistic: f64,
}

/// Per-trial detector statistics with hypothesis labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn from_rows(rows: Vec<ScoreRow>) -> Result<Self> {
        if rows.iter().any(|r| !r.statistic.is_finite()) {
            return Err(Error::InvalidParameter("non-finite statistic in score table".into()));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Detectors present, in first-appearance order.
    pub fn detectors(&self) -> Vec<DetectorChoice> {
        let mut seen = Vec::new();
        for row in &self.rows {
            if !seen.contains(&row.detector) {
                seen.push(row.detector);
            }
        }
        seen
    }

    pub fn scores(&self, detector: DetectorChoice, hypothesis: Hypothesis) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.detector == detector && r.hypothesis == hypothesis)
            .map(|r| r.statistic)
            .collect()
    }
}

/// One `(threshold, P_FA, P_D)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
}

/// ROC curve swept over the pooled scores, with its trapezoidal AUC.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
    auc: f64,
}

impl RocCurve {
    /// Points in increasing-threshold order, from `(-inf, 1, 1)` down to
    /// `(max score, 0, 0)`.
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    pub fn auc(&self) -> f64 {
        self.auc
    }
}

struct PreparedDetectors {
    gaussian: Option<GaussianDetector>,
    ar: Option<ArDetector>,
}

impl PreparedDetectors {
    fn build(scenario: &Scenario) -> Result<Self> {
        let mut gaussian = None;
        let mut ar = None;
        for choice in &scenario.detectors {
            match choice {
                DetectorChoice::Gaussian if gaussian.is_none() => {
                    gaussian =
                        Some(GaussianDetector::new(&scenario.mm, &scenario.meter_variances())?);
                }
                DetectorChoice::Ar if ar.is_none() => {
                    ar = Some(ArDetector::new(&scenario.mm, &scenario.noise, scenario.samples)?);
                }
                _ => {}
            }
        }
        Ok(Self { gaussian, ar })
    }

    fn evaluate(
        &self,
        choice: DetectorChoice,
        obs: &ObservationBlock,
    ) -> Result<f64> {
        match choice {
            DetectorChoice::Gaussian => {
                Ok(self.gaussian.as_ref().expect("prepared").sequential(obs)?.value)
            }
            DetectorChoice::Ar => Ok(self.ar.as_ref().expect("prepared").statistic(obs)?.value),
        }
    }
}

/// Scales each component by an independent uniform draw from
/// `[1 - rho, 1 + rho]`.
pub fn perturb_states<R: Rng + ?Sized>(
    theta: &DVector<f64>,
    rho: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "perturbation half-width must be nonnegative, got {rho}"
        )));
    }
    Ok(DVector::from_fn(theta.len(), |i, _| {
        theta[i] * rng.gen_range(1.0 - rho..=1.0 + rho)
    }))
}

fn attack_trial_index(scenario: &Scenario, trial: usize) -> u64 {
    if scenario.fixed_attack {
        0
    } else {
        trial as u64
    }
}

fn simulate_noise_block(
    scenario: &Scenario,
    trial: usize,
    hypothesis: Hypothesis,
    stream: fn(usize) -> Stream,
) -> DMatrix<f64> {
    let m = scenario.mm.meters();
    let n = scenario.samples;
    let mut w = DMatrix::<f64>::zeros(m, n);
    for i in 0..m {
        let mut rng = trial_rng(scenario.master_seed, trial as u64, hypothesis, stream(i));
        let row = scenario.noise[i].simulate_with_burn_in(n, scenario.burn_in, &mut rng);
        for t in 0..n {
            w[(i, t)] = row[t];
        }
    }
    w
}

fn build_attack(scenario: &Scenario, trial: usize, theta: &DVector<f64>) -> Result<AttackVector> {
    let m = scenario.mm.meters();
    let atrial = attack_trial_index(scenario, trial);
    match scenario.attack {
        AttackSpec::None => Ok(AttackVector::none(m)),
        AttackSpec::Sparse { d, magnitude } => {
            let mut rng =
                trial_rng(scenario.master_seed, atrial, Hypothesis::Alternative, Stream::Attack);
            sparse_attack(m, d, magnitude, &mut rng)
        }
        AttackSpec::Unobservable { magnitude } => {
            let mut rng =
                trial_rng(scenario.master_seed, atrial, Hypothesis::Alternative, Stream::Attack);
            let theta_a = DVector::from_fn(scenario.mm.states(), |_, _| {
                magnitude * rng.sample::<f64, _>(rand_distr::StandardNormal)
            });
            unobservable_attack(&scenario.mm, &theta_a)
        }
        AttackSpec::Ica { sigma_y2, magnitude } => {
            // The attacker observes a clean pre-attack window of the same
            // operating point, with its own noise draw.
            let window_noise = simulate_noise_block(
                scenario,
                atrial as usize,
                Hypothesis::Alternative,
                Stream::WindowNoise,
            );
            let signal = scenario.mm.jacobian() * theta;
            let mut window = window_noise;
            for i in 0..m {
                window.row_mut(i).add_scalar_mut(signal[i]);
            }
            let window = ObservationBlock::new(window)?;
            let mut rng = trial_rng(
                scenario.master_seed,
                atrial,
                Hypothesis::Alternative,
                Stream::AttackerInference,
            );
            ica_attack(&window, sigma_y2, magnitude, &IcaOptions::default(), &mut rng)
        }
    }
}

/// Generates one trial's data: perturbed state, attack (under H1), noise,
/// and the observed block `X = H theta 1^T + a 1^T + W`.
pub fn simulate_trial_data(
    scenario: &Scenario,
    trial: usize,
    hypothesis: Hypothesis,
) -> Result<TrialData> {
    let m = scenario.mm.meters();
    let n = scenario.samples;

    let mut state_rng =
        trial_rng(scenario.master_seed, trial as u64, hypothesis, Stream::StatePerturbation);
    let theta = perturb_states(&scenario.theta, scenario.state_perturbation, &mut state_rng)?;

    let attack = match hypothesis {
        Hypothesis::Null => AttackVector::none(m),
        Hypothesis::Alternative => build_attack(scenario, trial, &theta)?,
    };

    let mut x = simulate_noise_block(scenario, trial, hypothesis, Stream::MeterNoise);
    let signal = scenario.mm.jacobian() * &theta;
    for i in 0..m {
        let level = signal[i] + attack.vector()[i];
        for t in 0..n {
            x[(i, t)] += level;
        }
    }
    Ok(TrialData { observations: ObservationBlock::new(x)?, attack, theta })
}

fn run_trial_with(
    prepared: &PreparedDetectors,
    scenario: &Scenario,
    trial: usize,
    hypothesis: Hypothesis,
) -> Result<Vec<(DetectorChoice, f64)>> {
    let data = simulate_trial_data(scenario, trial, hypothesis)?;
    scenario
        .detectors
        .iter()
        .map(|&choice| Ok((choice, prepared.evaluate(choice, &data.observations)?)))
        .collect()
}

/// Evaluates every requested detector on one freshly simulated trial.
pub fn run_trial(
    scenario: &Scenario,
    trial: usize,
    hypothesis: Hypothesis,
) -> Result<Vec<(DetectorChoice, f64)>> {
    scenario.validate()?;
    let prepared = PreparedDetectors::build(scenario)?;
    run_trial_with(&prepared, scenario, trial, hypothesis)
}

/// Runs `trials` paired H0/H1 trials in parallel and collects the score
/// table. Row order is `(trial, hypothesis, detector)` regardless of
/// scheduling.
pub fn run_experiment(scenario: &Scenario) -> Result<ScoreTable> {
    scenario.validate()?;
    let prepared = PreparedDetectors::build(scenario)?;
    let per_trial: Vec<Vec<ScoreRow>> = (0..scenario.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rows =
                Vec::with_capacity(2 * scenario.detectors.len());
            for hypothesis in [Hypothesis::Null, Hypothesis::Alternative] {
                for (detector, statistic) in
                    run_trial_with(&prepared, scenario, trial, hypothesis)?
                {
                    rows.push(ScoreRow { trial, detector, hypothesis, statistic });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    ScoreTable::from_rows(per_trial.into_iter().flatten().collect())
}

/// Sweeps thresholds over the pooled scores of one detector and returns the
/// ROC curve with its trapezoidal AUC.
pub fn roc_from_scores(table: &ScoreTable, detector: DetectorChoice) -> Result<RocCurve> {
    let h0 = table.scores(detector, Hypothesis::Null);
    let h1 = table.scores(detector, Hypothesis::Alternative);
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::Validation(format!(
            "detector `{detector}` needs scores under both hypotheses (H0: {}, H1: {})",
            h0.len(),
            h1.len()
        )));
    }
    let mut h0_sorted = h0;
    let mut h1_sorted = h1;
    h0_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    h1_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut thresholds: Vec<f64> = Vec::with_capacity(h0_sorted.len() + h1_sorted.len());
    thresholds.extend_from_slice(&h0_sorted);
    thresholds.extend_from_slice(&h1_sorted);
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let frac_above = |sorted: &[f64], tau: f64| -> f64 {
        let above = sorted.len() - sorted.partition_point(|&s| s <= tau);
        above as f64 / sorted.len() as f64
    };

    let mut points = Vec::with_capacity(thresholds.len() + 1);
    points.push(RocPoint { threshold: f64::NEG_INFINITY, pfa: 1.0, pd: 1.0 });
    for &tau in &thresholds {
        points.push(RocPoint {
            threshold: tau,
            pfa: frac_above(&h0_sorted, tau),
            pd: frac_above(&h1_sorted, tau),
        });
    }

    // Trapezoid over (P_FA, P_D) with P_FA ascending, i.e. thresholds
    // descending.
    let mut auc = 0.0;
    for pair in points.windows(2) {
        let (right, left) = (pair[0], pair[1]);
        auc += (right.pfa - left.pfa) * (right.pd + left.pd) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

/// Mean over the N observation columns of the residual norm
/// `||x_t - H theta-hat||`.
pub fn mse_eval(
    obs: &ObservationBlock,
    mm: &MeasurementMatrix,
    estimate: &StateEstimate,
) -> Result<f64> {
    residual_mean(obs, mm, estimate, false)
}

/// Squared-norm variant of [`mse_eval`] for conventional mean-squared-error
/// comparisons.
pub fn mse_eval_squared(
    obs: &ObservationBlock,
    mm: &MeasurementMatrix,
    estimate: &StateEstimate,
) -> Result<f64> {
    residual_mean(obs, mm, estimate, true)
}

fn residual_mean(
    obs: &ObservationBlock,
    mm: &MeasurementMatrix,
    estimate: &StateEstimate,
    squared: bool,
) -> Result<f64> {
    if obs.meters() != mm.meters() {
        return Err(Error::Dimension(format!(
            "block with {} meters, model with {}",
            obs.meters(),
            mm.meters()
        )));
    }
    if estimate.theta().len() != mm.states() {
        return Err(Error::Dimension(format!(
            "estimate of length {}, expected K = {}",
            estimate.theta().len(),
            mm.states()
        )));
    }
    let fitted = mm.jacobian() * estimate.theta();
    let n = obs.samples();
    let mut total = 0.0;
    for t in 0..n {
        let mut sq = 0.0;
        for i in 0..obs.meters() {
            let r = obs.matrix()[(i, t)] - fitted[i];
            sq += r * r;
        }
        total += if squared { sq } else { sq.sqrt() };
    }
    Ok(total / n as f64)
}
