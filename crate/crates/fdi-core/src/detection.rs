//! Residual GLRT detectors for injected false data.
//!
//! All four forms reduce to the same quadratic `||B^T y||^2` in a whitened
//! coordinate system: the white form uses the measurement as-is, the Gaussian
//! forms scale each meter by its standard deviation, and the AR form first
//! collapses each meter's N-sample window to the whitening statistic
//! `z_i / a_i` and scales by `sqrt(a_i) / sigma_i`. The complement form is
//! used everywhere; the dense projector exists only to cross-check it.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::ar::{ArNoiseModel, WhiteningOperator};
use crate::error::{Error, Result};
use crate::estimation::ObservationBlock;
use crate::measurement::{orthogonal_complement, solve_normal_equations, MeasurementMatrix};

/// Which detector produced a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    White,
    Gaussian,
    GaussianSequential,
    Ar,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            DetectorKind::White => "white",
            DetectorKind::Gaussian => "gaussian",
            DetectorKind::GaussianSequential => "gaussian-sequential",
            DetectorKind::Ar => "ar",
        };
        f.write_str(tag)
    }
}

/// A detector output: the test statistic plus its residual degrees of
/// freedom.
#[derive(Debug, Clone, Copy)]
pub struct DetectionStatistic {
    pub value: f64,
    pub detector: DetectorKind,
    pub dof: usize,
}

/// Maximum-likelihood nuisance estimates produced alongside a statistic.
#[derive(Debug, Clone)]
pub struct NuisanceEstimates {
    pub theta_1: DVector<f64>,
    pub theta_b: DVector<f64>,
}

/// White-noise GLRT: `T = x^T (I - H (H^T H)^-1 H^T) x`, evaluated as
/// `||B^T x||^2`.
pub fn glrt_white(
    mm: &MeasurementMatrix,
    x: &DVector<f64>,
) -> Result<(DetectionStatistic, NuisanceEstimates)> {
    if x.len() != mm.meters() {
        return Err(Error::Dimension(format!(
            "measurement of length {}, expected M = {}",
            x.len(),
            mm.meters()
        )));
    }
    let theta_b = mm.complement().transpose() * x;
    let theta_1 = solve_normal_equations(mm.jacobian(), x)?;
    let stat = DetectionStatistic {
        value: theta_b.norm_squared(),
        detector: DetectorKind::White,
        dof: mm.dof(),
    };
    Ok((stat, NuisanceEstimates { theta_1, theta_b }))
}

/// Gaussian GLRT with known per-meter variances: whiten, then apply the
/// white form.
pub fn glrt_gaussian(
    mm: &MeasurementMatrix,
    sigma2: &[f64],
    x: &DVector<f64>,
) -> Result<DetectionStatistic> {
    let detector = GaussianDetector::new(mm, sigma2)?;
    detector.statistic(x)
}

/// Gaussian GLRT over N sequential observations: the statistic of the
/// per-meter sample means.
pub fn glrt_gaussian_sequential(
    mm: &MeasurementMatrix,
    sigma2: &[f64],
    obs: &ObservationBlock,
) -> Result<DetectionStatistic> {
    let detector = GaussianDetector::new(mm, sigma2)?;
    detector.sequential(obs)
}

/// AR GLRT over N sequential observations.
pub fn glrt_ar(
    mm: &MeasurementMatrix,
    models: &[ArNoiseModel],
    obs: &ObservationBlock,
) -> Result<(DetectionStatistic, NuisanceEstimates)> {
    let detector = ArDetector::new(mm, models, obs.samples())?;
    detector.evaluate(obs)
}

/// Decide the attacked hypothesis iff the statistic strictly exceeds the
/// threshold.
pub fn decide(stat: &DetectionStatistic, tau: f64) -> bool {
    stat.value > tau
}

/// Empirical threshold: the smallest null score with at most a `pfa`
/// fraction of null scores strictly above it.
pub fn threshold_for_pfa(null_scores: &[f64], pfa: f64) -> Result<f64> {
    if null_scores.len() < 100 {
        return Err(Error::InvalidParameter(format!(
            "threshold calibration needs >= 100 null scores, got {}",
            null_scores.len()
        )));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidParameter(format!("pfa must lie in (0, 1), got {pfa}")));
    }
    if null_scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite null score".into()));
    }
    let mut sorted = null_scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let allowed = pfa * n as f64;
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == v {
            j += 1;
        }
        if (n - 1 - j) as f64 <= allowed {
            return Ok(v);
        }
        i = j + 1;
    }
    Ok(sorted[n - 1])
}

/// Gaussian detector with the whitened complement precomputed, for repeated
/// evaluation against a fixed variance profile.
#[derive(Debug, Clone)]
pub struct GaussianDetector {
    inv_sigma: Vec<f64>,
    b_whitened: DMatrix<f64>,
    dof: usize,
}

impl GaussianDetector {
    pub fn new(mm: &MeasurementMatrix, sigma2: &[f64]) -> Result<Self> {
        let m = mm.meters();
        if sigma2.len() != m {
            return Err(Error::Dimension(format!(
                "{} meter variances for {} meters",
                sigma2.len(),
                m
            )));
        }
        if sigma2.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("meter variances must be positive".into()));
        }
        let inv_sigma: Vec<f64> = sigma2.iter().map(|s| s.sqrt().recip()).collect();
        let mut hw = mm.jacobian().clone();
        for i in 0..m {
            hw.row_mut(i).scale_mut(inv_sigma[i]);
        }
        let b_whitened = orthogonal_complement(&hw)?;
        Ok(Self { inv_sigma, b_whitened, dof: mm.dof() })
    }

    fn whitened(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.inv_sigma.len() {
            return Err(Error::Dimension(format!(
                "measurement of length {}, expected M = {}",
                x.len(),
                self.inv_sigma.len()
            )));
        }
        Ok(DVector::from_fn(x.len(), |i, _| x[i] * self.inv_sigma[i]))
    }

    pub fn statistic(&self, x: &DVector<f64>) -> Result<DetectionStatistic> {
        let y = self.whitened(x)?;
        Ok(DetectionStatistic {
            value: (self.b_whitened.transpose() * y).norm_squared(),
            detector: DetectorKind::Gaussian,
            dof: self.dof,
        })
    }

    pub fn sequential(&self, obs: &ObservationBlock) -> Result<DetectionStatistic> {
        let stat = self.statistic(&obs.row_means())?;
        Ok(DetectionStatistic { detector: DetectorKind::GaussianSequential, ..stat })
    }
}

/// AR detector with whitening operators and the pre-whitened complement
/// precomputed for a fixed window length.
#[derive(Debug, Clone)]
pub struct ArDetector {
    ops: Vec<WhiteningOperator>,
    meter_scale: Vec<f64>,
    h_whitened: DMatrix<f64>,
    b_whitened: DMatrix<f64>,
    normal_chol: Cholesky<f64, Dyn>,
    samples: usize,
    dof: usize,
}

impl ArDetector {
    pub fn new(mm: &MeasurementMatrix, models: &[ArNoiseModel], samples: usize) -> Result<Self> {
        let m = mm.meters();
        if models.len() != m {
            return Err(Error::Dimension(format!(
                "{} noise models for {} meters",
                models.len(),
                m
            )));
        }
        let mut ops = Vec::with_capacity(m);
        let mut meter_scale = Vec::with_capacity(m);
        let mut h_whitened = mm.jacobian().clone();
        for (i, model) in models.iter().enumerate() {
            let op = WhiteningOperator::build(model, samples)?;
            let scale = op.a().sqrt() / model.sigma2().sqrt();
            h_whitened.row_mut(i).scale_mut(scale);
            meter_scale.push(scale);
            ops.push(op);
        }
        let b_whitened = orthogonal_complement(&h_whitened)?;
        let normal_chol = Cholesky::new(h_whitened.transpose() * &h_whitened)
            .ok_or(Error::Singular("pre-whitened normal equations"))?;
        Ok(Self {
            ops,
            meter_scale,
            h_whitened,
            b_whitened,
            normal_chol,
            samples,
            dof: mm.dof(),
        })
    }

    /// Collapses the block to the normalized statistic vector
    /// `z'_i / a_i` with `z'_i = 1^T T_i^T (T_i y_i + c_i)`, `y_i` the scaled
    /// meter window.
    fn statistic_vector(&self, obs: &ObservationBlock) -> Result<DVector<f64>> {
        if obs.meters() != self.ops.len() {
            return Err(Error::Dimension(format!(
                "block with {} meters, detector built for {}",
                obs.meters(),
                self.ops.len()
            )));
        }
        if obs.samples() != self.samples {
            return Err(Error::Dimension(format!(
                "block with {} samples, detector built for {}",
                obs.samples(),
                self.samples
            )));
        }
        let mut z = DVector::<f64>::zeros(self.ops.len());
        for i in 0..self.ops.len() {
            let y = self.meter_scale[i] * obs.meter_window(i);
            let (a, zi) = self.ops[i].stats(&y)?;
            z[i] = zi / a;
        }
        Ok(z)
    }

    pub fn evaluate(&self, obs: &ObservationBlock) -> Result<(DetectionStatistic, NuisanceEstimates)> {
        let z = self.statistic_vector(obs)?;
        let theta_b = self.b_whitened.transpose() * &z;
        let theta_1 = self.normal_chol.solve(&(self.h_whitened.transpose() * &z));
        let stat = DetectionStatistic {
            value: theta_b.norm_squared() / self.samples as f64,
            detector: DetectorKind::Ar,
            dof: self.dof,
        };
        Ok((stat, NuisanceEstimates { theta_1, theta_b }))
    }

    pub fn statistic(&self, obs: &ObservationBlock) -> Result<DetectionStatistic> {
        Ok(self.evaluate(obs)?.0)
    }
}
