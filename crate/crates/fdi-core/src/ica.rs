//! Blind inference of a virtual mixing matrix from observation snapshots, and
//! the stealth attack built on it.
//!
//! An attacker who cannot read the Jacobian can still collect an M x N window
//! of readings, run independent component analysis on it, and inject along
//! the inferred mixing directions. Implementation: row centering, eigenvalue
//! whitening with relative-threshold pruning, then the symmetric fixed-point
//! iteration with the tanh contrast.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::attack::{AttackKind, AttackVector};
use crate::error::{Error, Result};
use crate::estimation::ObservationBlock;

/// Tuning knobs for the fixed-point iteration.
#[derive(Debug, Clone, Copy)]
pub struct IcaOptions {
    /// Components with covariance eigenvalues below this fraction of the
    /// largest eigenvalue are dropped.
    pub eig_threshold: f64,
    /// Convergence tolerance on the weight update.
    pub tol: f64,
    /// Iteration cap; hitting it is reported, not an error.
    pub max_iter: usize,
}

impl Default for IcaOptions {
    fn default() -> Self {
        Self { eig_threshold: 1e-6, tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcaConvergence {
    Converged { iterations: usize },
    MaxIter,
}

/// Result of a component-analysis fit: the back-projected mixing matrix `G`
/// (unit-norm columns), the quasi-state block `Y` with `X_centered ~ G Y`,
/// and the orthonormal weight matrix of the whitened-space iteration.
#[derive(Debug, Clone)]
pub struct IcaModel {
    g: DMatrix<f64>,
    y: DMatrix<f64>,
    weights: DMatrix<f64>,
    row_means: DVector<f64>,
    convergence: IcaConvergence,
}

impl IcaModel {
    /// Virtual mixing matrix, M x r with unit-norm columns.
    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.g
    }

    /// Quasi-state block, r x N.
    pub fn quasi_states(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Orthonormal weight matrix of the whitened-space iteration, r x r.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn row_means(&self) -> &DVector<f64> {
        &self.row_means
    }

    pub fn convergence(&self) -> IcaConvergence {
        self.convergence
    }

    /// Retained component count.
    pub fn components(&self) -> usize {
        self.g.ncols()
    }

    /// `G Y`, the model's reconstruction of the centered window.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.g * &self.y
    }
}

/// Runs FastICA on an observation window.
pub fn fastica<R: Rng + ?Sized>(
    obs: &ObservationBlock,
    options: &IcaOptions,
    rng: &mut R,
) -> Result<IcaModel> {
    if obs.samples() < 2 {
        return Err(Error::Degenerate("component analysis needs at least 2 samples".into()));
    }
    if !(0.0..1.0).contains(&options.eig_threshold) || !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidParameter("bad component-analysis options".into()));
    }
    let m = obs.meters();
    let n = obs.samples();

    let row_means = obs.row_means();
    let mut xc = obs.matrix().clone();
    for i in 0..m {
        xc.row_mut(i).add_scalar_mut(-row_means[i]);
    }
    if xc.amax() <= 1e-12 * (1.0 + obs.matrix().amax()) {
        return Err(Error::Degenerate("observation window has zero variance".into()));
    }

    let (eigvals, eigvecs) = covariance_eigen(&xc);
    let lambda_max = eigvals[0];
    if !(lambda_max > 0.0) {
        return Err(Error::Degenerate("observation window has zero variance".into()));
    }
    let r = eigvals
        .iter()
        .take_while(|&&l| l > 0.0 && l >= options.eig_threshold * lambda_max)
        .count();
    if r == 0 {
        return Err(Error::Degenerate("all components pruned".into()));
    }

    // Whiten: Z = D^{-1/2} E^T Xc has identity sample covariance.
    let e_r = eigvecs.columns(0, r).into_owned();
    let mut z = e_r.transpose() * &xc;
    for j in 0..r {
        z.row_mut(j).scale_mut(1.0 / eigvals[j].sqrt());
    }

    let mut w = DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    w = sym_decorrelate(&w);
    let mut convergence = IcaConvergence::MaxIter;
    for iteration in 1..=options.max_iter {
        let s = &w * &z;
        let g = s.map(f64::tanh);
        let mut w_new = (&g * z.transpose()) / n as f64;
        for i in 0..r {
            let gder_mean = g.row(i).iter().map(|v| 1.0 - v * v).sum::<f64>() / n as f64;
            let updated = w_new.row(i) - w.row(i) * gder_mean;
            w_new.set_row(i, &updated);
        }
        let w_new = sym_decorrelate(&w_new);
        let lim = (0..r)
            .map(|i| (w_new.row(i).dot(&w.row(i)).abs() - 1.0).abs())
            .fold(0.0, f64::max);
        w = w_new;
        if lim < options.tol {
            convergence = IcaConvergence::Converged { iterations: iteration };
            break;
        }
    }

    let y_unit = &w * &z;
    // Back-project: Xc ~ (E D^{1/2} W^T)(W Z) within the retained subspace.
    let mut g_raw = DMatrix::<f64>::zeros(m, r);
    for j in 0..r {
        let scale = eigvals[j].sqrt();
        for i in 0..m {
            for c in 0..r {
                g_raw[(i, c)] += e_r[(i, j)] * scale * w[(c, j)];
            }
        }
    }
    // Normalize mixing columns to unit length; the scale moves into Y so the
    // quasi-state magnitudes carry the data's energy.
    let mut y = y_unit;
    for c in 0..r {
        let norm = g_raw.column(c).norm();
        g_raw.column_mut(c).scale_mut(1.0 / norm);
        y.row_mut(c).scale_mut(norm);
    }

    Ok(IcaModel { g: g_raw, y, weights: w, row_means, convergence })
}

/// Eigenvalues (descending) and matching eigenvectors of the sample
/// covariance `Xc Xc^T / N`, computed on the smaller Gram side.
fn covariance_eigen(xc: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = xc.shape();
    if m <= n {
        let cov = (xc * xc.transpose()) / n as f64;
        sorted_symmetric_eigen(cov)
    } else {
        let gram = (xc.transpose() * xc) / n as f64;
        let (vals, vecs) = sorted_symmetric_eigen(gram);
        let mut out_vecs = DMatrix::<f64>::zeros(m, n);
        for j in 0..n {
            if vals[j] > 0.0 {
                let col = xc * vecs.column(j) / (n as f64 * vals[j]).sqrt();
                out_vecs.set_column(j, &col);
            }
        }
        (vals, out_vecs)
    }
}

fn sorted_symmetric_eigen(mat: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat);
    let dim = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<f64>::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `W <- (W W^T)^{-1/2} W`, keeping the rows orthonormal.
fn sym_decorrelate(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(w * w.transpose());
    let inv_sqrt = DVector::from_fn(eig.eigenvalues.len(), |i, _| {
        1.0 / eig.eigenvalues[i].sqrt().max(1e-7)
    });
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt);
    scaled * eig.eigenvectors.transpose() * w
}

/// Draws a quasi-state perturbation `dy ~ N(0, sigma_y2 I)` and returns the
/// stealth attack `a = magnitude * G dy`.
pub fn ica_attack<R: Rng + ?Sized>(
    clean_window: &ObservationBlock,
    sigma_y2: f64,
    magnitude: f64,
    options: &IcaOptions,
    rng: &mut R,
) -> Result<AttackVector> {
    if !(sigma_y2 >= 0.0) || !sigma_y2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "quasi-state variance must be nonnegative, got {sigma_y2}"
        )));
    }
    let model = fastica(clean_window, options, rng)?;
    let sigma_y = sigma_y2.sqrt();
    let dy = DVector::from_fn(model.components(), |_, _| {
        sigma_y * rng.sample::<f64, _>(StandardNormal)
    });
    let a = magnitude * (model.mixing() * dy);
    Ok(AttackVector::from_parts(a, AttackKind::Ica, magnitude))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn laplacian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen::<f64>() - 0.5;
        -u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (&x, &y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma).powi(2);
            vb += (y - mb).powi(2);
        }
        cov / (va.sqrt() * vb.sqrt())
    }

    fn two_source_mixture(seed: u64, n: usize) -> (DMatrix<f64>, ObservationBlock) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let sources = DMatrix::from_fn(2, n, |_, _| laplacian(&mut rng));
        let angle: f64 = rng.gen::<f64>() * std::f64::consts::PI;
        let mixing =
            DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
        let x = &mixing * &sources;
        (sources, ObservationBlock::new(x).unwrap())
    }

    #[test]
    fn recovers_laplacian_sources_up_to_permutation_and_sign() {
        let (sources, obs) = two_source_mixture(42, 2_000);
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let model = fastica(&obs, &IcaOptions::default(), &mut rng).unwrap();
        assert_eq!(model.components(), 2);
        for i in 0..2 {
            let truth: Vec<f64> = sources.row(i).iter().copied().collect();
            let best = (0..2)
                .map(|j| {
                    let got: Vec<f64> = model.quasi_states().row(j).iter().copied().collect();
                    correlation(&truth, &got).abs()
                })
                .fold(0.0, f64::max);
            assert!(best >= 0.95, "source {i} best |corr| = {best}");
        }
    }

    #[test]
    fn weights_are_orthonormal_and_reconstruction_is_tight() {
        let (_, obs) = two_source_mixture(7, 1_000);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let model = fastica(&obs, &IcaOptions::default(), &mut rng).unwrap();
        let w = model.weights();
        let gram = w * w.transpose();
        assert!((gram - DMatrix::identity(2, 2)).amax() <= 1e-6);

        let mut xc = obs.matrix().clone();
        for i in 0..2 {
            xc.row_mut(i).add_scalar_mut(-model.row_means()[i]);
        }
        let residual = (&xc - model.reconstruct()).norm() / xc.norm();
        assert!(residual <= 0.05, "relative reconstruction residual {residual}");
        for c in 0..model.components() {
            assert!((model.mixing().column(c).norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn gaussian_input_terminates() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(3, 400, |_, _| rng.sample::<f64, _>(StandardNormal));
        let obs = ObservationBlock::new(x).unwrap();
        let model = fastica(&obs, &IcaOptions::default(), &mut rng).unwrap();
        assert_eq!(model.components(), 3);
        // Convergence status may be either variant; only termination matters.
        let _ = model.convergence();
    }

    #[test]
    fn near_rank_one_window_keeps_one_component() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let pattern = DVector::from_fn(6, |i, _| (i as f64 + 1.0).sin());
        let x = DMatrix::from_fn(6, 50, |i, j| {
            pattern[i] * (j as f64 + 1.0) + 1e-9 * rng.sample::<f64, _>(StandardNormal)
        });
        let obs = ObservationBlock::new(x).unwrap();
        let model = fastica(&obs, &IcaOptions::default(), &mut rng).unwrap();
        assert_eq!(model.components(), 1);
    }

    #[test]
    fn constant_window_is_degenerate() {
        let obs = ObservationBlock::new(DMatrix::from_element(4, 10, 2.5)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        assert!(matches!(
            fastica(&obs, &IcaOptions::default(), &mut rng),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn zero_variance_draw_gives_zero_attack() {
        let (_, obs) = two_source_mixture(12, 500);
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let a = ica_attack(&obs, 0.0, 1.0, &IcaOptions::default(), &mut rng).unwrap();
        assert_eq!(a.vector().amax(), 0.0);
        assert_eq!(a.kind(), AttackKind::Ica);
    }

    #[test]
    fn attack_scales_linearly_in_magnitude() {
        let (_, obs) = two_source_mixture(14, 500);
        let mut rng1 = ChaCha12Rng::seed_from_u64(15);
        let mut rng2 = ChaCha12Rng::seed_from_u64(15);
        let a1 = ica_attack(&obs, 0.5, 1.0, &IcaOptions::default(), &mut rng1).unwrap();
        let a2 = ica_attack(&obs, 0.5, 2.0, &IcaOptions::default(), &mut rng2).unwrap();
        assert!((a2.vector() - 2.0 * a1.vector()).amax() <= 1e-12);
    }

    #[test]
    fn attack_is_deterministic_given_seed() {
        let (_, obs) = two_source_mixture(16, 500);
        let mut rng1 = ChaCha12Rng::seed_from_u64(17);
        let mut rng2 = ChaCha12Rng::seed_from_u64(17);
        let a1 = ica_attack(&obs, 0.3, 1.0, &IcaOptions::default(), &mut rng1).unwrap();
        let a2 = ica_attack(&obs, 0.3, 1.0, &IcaOptions::default(), &mut rng2).unwrap();
        assert_eq!(a1.vector(), a2.vector());
    }
}
