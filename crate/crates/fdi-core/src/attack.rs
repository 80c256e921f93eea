//! False-data attack vectors: random sparse injections and column-space
//! (unobservable) injections. The blind component-analysis attack lives in
//! [`crate::ica`].

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::measurement::MeasurementMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    None,
    Sparse,
    Unobservable,
    Ica,
}

/// An additive corruption of the M meter readings, tagged with how it was
/// built.
#[derive(Debug, Clone)]
pub struct AttackVector {
    a: DVector<f64>,
    kind: AttackKind,
    magnitude: f64,
}

impl AttackVector {
    /// The no-attack vector.
    pub fn none(meters: usize) -> Self {
        Self { a: DVector::zeros(meters), kind: AttackKind::None, magnitude: 0.0 }
    }

    pub(crate) fn from_parts(a: DVector<f64>, kind: AttackKind, magnitude: f64) -> Self {
        Self { a, kind, magnitude }
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Number of nonzero entries.
    pub fn sparsity(&self) -> usize {
        self.a.iter().filter(|v| **v != 0.0).count()
    }
}

/// Constant false data of magnitude `magnitude` injected into `d` distinct
/// meters chosen uniformly at random.
pub fn sparse_attack<R: Rng + ?Sized>(
    meters: usize,
    d: usize,
    magnitude: f64,
    rng: &mut R,
) -> Result<AttackVector> {
    if d > meters {
        return Err(Error::InvalidParameter(format!(
            "sparsity {d} exceeds meter count {meters}"
        )));
    }
    let mut a = DVector::zeros(meters);
    for idx in rand::seq::index::sample(rng, meters, d) {
        a[idx] = magnitude;
    }
    Ok(AttackVector::from_parts(a, AttackKind::Sparse, magnitude))
}

/// Column-space attack `a = H theta_a`: indistinguishable from the state
/// change `theta_a` and invisible to every residual detector.
pub fn unobservable_attack(mm: &MeasurementMatrix, theta_a: &DVector<f64>) -> Result<AttackVector> {
    if theta_a.len() != mm.states() {
        return Err(Error::Dimension(format!(
            "injected state of length {}, expected K = {}",
            theta_a.len(),
            mm.states()
        )));
    }
    let a = mm.jacobian() * theta_a;
    let magnitude = theta_a.amax();
    Ok(AttackVector::from_parts(a, AttackKind::Unobservable, magnitude))
}
