//! State estimators: single-shot WLS, the N-sample Gaussian estimator, and
//! the AR maximum-likelihood estimator built on the whitening statistics.

use nalgebra::{DMatrix, DVector};

use crate::ar::{ArNoiseModel, WhiteningOperator};
use crate::error::{Error, Result};
use crate::measurement::solve_normal_equations;

/// M x N block of sequential readings; row i holds the N samples of meter i.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBlock {
    x: DMatrix<f64>,
}

impl ObservationBlock {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.ncols() == 0 || x.nrows() == 0 {
            return Err(Error::Dimension("observation block must be non-empty".into()));
        }
        Ok(Self { x })
    }

    pub fn meters(&self) -> usize {
        self.x.nrows()
    }

    pub fn samples(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn meter_window(&self, meter: usize) -> DVector<f64> {
        self.x.row(meter).transpose()
    }

    /// Per-meter mean over the N samples.
    pub fn row_means(&self) -> DVector<f64> {
        let n = self.samples() as f64;
        &self.x * DVector::from_element(self.samples(), 1.0 / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    GaussianSingle,
    GaussianSequential,
    ArMle,
}

/// An estimated state vector tagged with the estimator that produced it.
#[derive(Debug, Clone)]
pub struct StateEstimate {
    theta: DVector<f64>,
    method: EstimatorKind,
}

impl StateEstimate {
    /// Wraps a state vector, rejecting non-finite entries.
    pub fn new(theta: DVector<f64>, method: EstimatorKind) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("state estimate (non-finite result)"));
        }
        Ok(Self { theta, method })
    }

    fn checked(theta: DVector<f64>, method: EstimatorKind) -> Result<Self> {
        Self::new(theta, method)
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn method(&self) -> EstimatorKind {
        self.method
    }
}

fn check_variances(sigma2: &[f64], meters: usize) -> Result<()> {
    if sigma2.len() != meters {
        return Err(Error::Dimension(format!(
            "{} meter variances for {} meters",
            sigma2.len(),
            meters
        )));
    }
    if sigma2.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter("meter variances must be positive".into()));
    }
    Ok(())
}

/// Weighted least squares `theta-hat = (H^T S^-1 H)^-1 H^T S^-1 x` with
/// `S = diag(sigma2)`.
pub fn wls_estimate(h: &DMatrix<f64>, sigma2: &[f64], x: &DVector<f64>) -> Result<StateEstimate> {
    check_variances(sigma2, h.nrows())?;
    if x.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "measurement vector of length {}, expected {}",
            x.len(),
            h.nrows()
        )));
    }
    // Scale rows by 1/sigma so the problem reduces to ordinary least squares.
    let mut hw = h.clone();
    let mut xw = x.clone();
    for i in 0..h.nrows() {
        let s = sigma2[i].sqrt().recip();
        hw.row_mut(i).scale_mut(s);
        xw[i] *= s;
    }
    let theta = solve_normal_equations(&hw, &xw)?;
    StateEstimate::checked(theta, EstimatorKind::GaussianSingle)
}

/// The N-sample Gaussian estimator: WLS applied to the per-meter sample
/// means.
pub fn wls_estimate_sequential(
    h: &DMatrix<f64>,
    sigma2: &[f64],
    obs: &ObservationBlock,
) -> Result<StateEstimate> {
    if obs.meters() != h.nrows() {
        return Err(Error::Dimension(format!(
            "block with {} meters, Jacobian with {}",
            obs.meters(),
            h.nrows()
        )));
    }
    let est = wls_estimate(h, sigma2, &obs.row_means())?;
    StateEstimate::checked(est.theta, EstimatorKind::GaussianSequential)
}

/// AR maximum-likelihood state estimator,
/// `theta-hat = (H^T A H)^-1 H^T z` with `A = diag(a_i / sigma_i^2)` and
/// `z_i = 1^T T_i^T (T_i x_i + c_i) / sigma_i^2`.
pub fn ar_mle_estimate(
    h: &DMatrix<f64>,
    models: &[ArNoiseModel],
    obs: &ObservationBlock,
) -> Result<StateEstimate> {
    let m = h.nrows();
    if models.len() != m {
        return Err(Error::Dimension(format!(
            "{} noise models for {} meters",
            models.len(),
            m
        )));
    }
    if obs.meters() != m {
        return Err(Error::Dimension(format!(
            "block with {} meters, Jacobian with {}",
            obs.meters(),
            m
        )));
    }
    let n = obs.samples();
    let mut weights = DVector::<f64>::zeros(m);
    let mut z = DVector::<f64>::zeros(m);
    for i in 0..m {
        let op = WhiteningOperator::build(&models[i], n)?;
        let (a, zi) = op.stats(&obs.meter_window(i))?;
        let s2 = models[i].sigma2();
        weights[i] = a / s2;
        z[i] = zi / s2;
    }
    // H^T A H via row scaling, then one SPD solve.
    let mut ha = h.clone();
    for i in 0..m {
        ha.row_mut(i).scale_mut(weights[i]);
    }
    let normal = h.transpose() * &ha;
    let chol = nalgebra::Cholesky::new(normal).ok_or(Error::Singular("AR normal equations"))?;
    let theta = chol.solve(&(h.transpose() * z));
    StateEstimate::checked(theta, EstimatorKind::ArMle)
}
