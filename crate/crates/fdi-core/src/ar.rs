//! Autoregressive colored-noise simulation and the banded whitening operator.
//!
//! An AR(p) process `w_n = sum_j alpha_j w_{n-j} + v_n` with white Gaussian
//! innovations `v_n ~ N(0, sigma^2)` is whitened over a window of N samples by
//! the lower-banded matrix `T` (unit diagonal, `-alpha_j` on the j-th
//! subdiagonal) plus an offset vector `c` carrying the pre-window initial
//! conditions: `T w + c` recovers the innovation sequence exactly. The two
//! scalars the estimators and detectors consume are
//! `a = 1^T T^T T 1` and `z = 1^T T^T (T x + c)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Per-meter AR(p) noise description: coefficients, innovation variance, and
/// the p samples preceding the window (zero by default).
#[derive(Debug, Clone, PartialEq)]
pub struct ArNoiseModel {
    coeffs: Vec<f64>,
    sigma2: f64,
    initial: Vec<f64>,
}

impl ArNoiseModel {
    /// AR(p) model with zero initial conditions.
    pub fn new(coeffs: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "innovation variance must be positive, got {sigma2}"
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite AR coefficient".into()));
        }
        let initial = vec![0.0; coeffs.len()];
        Ok(Self { coeffs, sigma2, initial })
    }

    /// White Gaussian noise, the p = 0 special case.
    pub fn white(sigma2: f64) -> Result<Self> {
        Self::new(Vec::new(), sigma2)
    }

    /// Replaces the initial conditions `[w_{-1}, ..., w_{-p}]`.
    pub fn with_initial_conditions(mut self, initial: Vec<f64>) -> Result<Self> {
        if initial.len() != self.coeffs.len() {
            return Err(Error::Dimension(format!(
                "{} initial conditions for an AR({}) model",
                initial.len(),
                self.coeffs.len()
            )));
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn initial_conditions(&self) -> &[f64] {
        &self.initial
    }

    /// Checks that every root of `1 - sum_j alpha_j z^j` lies outside the
    /// unit circle, via the companion-matrix eigenvalues.
    pub fn is_stationary(&self) -> bool {
        let p = self.order();
        if p == 0 {
            return true;
        }
        let mut companion = DMatrix::<f64>::zeros(p, p);
        for (j, &alpha) in self.coeffs.iter().enumerate() {
            companion[(0, j)] = alpha;
        }
        for i in 1..p {
            companion[(i, i - 1)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .all(|lambda| lambda.norm() < 1.0)
    }

    /// Draws N samples by running the recursion from the initial conditions
    /// with freshly sampled innovations.
    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DVector<f64> {
        self.simulate_with_burn_in(n, 0, rng)
    }

    /// Like [`simulate`](Self::simulate) but discards `burn_in` leading
    /// samples first, so the returned window is close to stationary.
    pub fn simulate_with_burn_in<R: Rng + ?Sized>(
        &self,
        n: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> DVector<f64> {
        let sigma = self.sigma2.sqrt();
        let total = n + burn_in;
        let innovations: Vec<f64> = (0..total)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let full = self.run_recursion(&innovations);
        DVector::from_iterator(n, full.iter().skip(burn_in).copied())
    }

    /// Runs the recursion with a caller-supplied innovation sequence.
    /// `T w + c` applied to the result returns exactly these innovations.
    pub fn simulate_with_innovations(&self, innovations: &[f64]) -> DVector<f64> {
        DVector::from_vec(self.run_recursion(innovations))
    }

    fn run_recursion(&self, innovations: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(innovations.len());
        for (n, &v) in innovations.iter().enumerate() {
            let mut w = v;
            for (j, &alpha) in self.coeffs.iter().enumerate() {
                let lag = j + 1;
                let prev = if n >= lag {
                    out[n - lag]
                } else {
                    // Reaches back before the window: w_{n-lag} = w_{-(lag-n)}.
                    self.initial[lag - n - 1]
                };
                w += alpha * prev;
            }
            out.push(w);
        }
        out
    }
}

/// Banded whitening operator for one meter over an N-sample window.
///
/// Stores the band (the AR coefficients), the offset `c`, and the
/// precomputed `T 1` so the scalar statistics cost O(N p) per evaluation.
#[derive(Debug, Clone)]
pub struct WhiteningOperator {
    coeffs: Vec<f64>,
    c: DVector<f64>,
    t_ones: DVector<f64>,
    a: f64,
    n: usize,
}

impl WhiteningOperator {
    pub fn build(model: &ArNoiseModel, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("window length must be >= 1".into()));
        }
        let p = model.order();
        let mut c = DVector::<f64>::zeros(n);
        for row in 0..p.min(n) {
            // Row `row` of T w reaches initial conditions for lags j > row:
            // c_row = -sum_{j=row+1..p} alpha_j * w_{row-j}.
            let mut acc = 0.0;
            for j in (row + 1)..=p {
                acc -= model.coeffs[j - 1] * model.initial[j - row - 1];
            }
            c[row] = acc;
        }
        let mut op = Self {
            coeffs: model.coeffs().to_vec(),
            c,
            t_ones: DVector::zeros(n),
            a: 0.0,
            n,
        };
        op.t_ones = op.apply(&DVector::from_element(n, 1.0));
        op.a = op.t_ones.norm_squared();
        Ok(op)
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `a = 1^T T^T T 1`, the effective sample weight of the window.
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Banded product `T x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n, "window length mismatch");
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n {
            let mut acc = x[i];
            for (j, &alpha) in self.coeffs.iter().enumerate() {
                if i > j {
                    acc -= alpha * x[i - j - 1];
                }
            }
            out[i] = acc;
        }
        out
    }

    /// `T x + c`: maps a noise window back to its innovation sequence.
    pub fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        self.apply(x) + &self.c
    }

    /// The pair `(a, z)` with `z = 1^T T^T (T x + c)`.
    pub fn stats(&self, x: &DVector<f64>) -> Result<(f64, f64)> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!(
                "window of length {}, operator built for {}",
                x.len(),
                self.n
            )));
        }
        let z = self.t_ones.dot(&self.whiten(x));
        Ok((self.a, z))
    }

    /// Dense materialization of T; for tests and cross-checks only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut t = DMatrix::identity(self.n, self.n);
        for i in 0..self.n {
            for (j, &alpha) in self.coeffs.iter().enumerate() {
                if i > j {
                    t[(i, i - j - 1)] = -alpha;
                }
            }
        }
        t
    }
}

/// Fits AR coefficients and innovation variance from samples via the
/// Yule-Walker equations on the biased sample autocovariance.
pub fn fit_ar_yule_walker(samples: &[f64], order: usize) -> Result<ArNoiseModel> {
    if samples.len() <= 10 * (order + 1) {
        return Err(Error::InvalidParameter(format!(
            "{} samples are too few to fit an AR({order}) model",
            samples.len()
        )));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let autocov = |lag: usize| -> f64 {
        (0..n - lag)
            .map(|t| (samples[t] - mean) * (samples[t + lag] - mean))
            .sum::<f64>()
            / n as f64
    };
    let r0 = autocov(0);
    if order == 0 {
        return ArNoiseModel::white(r0)
            .map_err(|_| Error::Singular("autocovariance (constant input)"));
    }
    let r: Vec<f64> = (1..=order).map(autocov).collect();
    let toeplitz = DMatrix::from_fn(order, order, |i, j| {
        let lag = i.abs_diff(j);
        if lag == 0 {
            r0
        } else {
            r[lag - 1]
        }
    });
    let chol = nalgebra::Cholesky::new(toeplitz)
        .ok_or(Error::Singular("autocovariance (constant input)"))?;
    let coeffs = chol.solve(&DVector::from_column_slice(&r));
    let sigma2 = r0 - coeffs.dot(&DVector::from_column_slice(&r));
    ArNoiseModel::new(coeffs.iter().copied().collect(), sigma2)
        .map_err(|_| Error::Singular("autocovariance (nonpositive residual variance)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn ar1(alpha: f64, sigma2: f64) -> ArNoiseModel {
        ArNoiseModel::new(vec![alpha], sigma2).unwrap()
    }

    #[test]
    fn white_simulation_has_unit_variance() {
        let model = ArNoiseModel::white(0.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let w = model.simulate(100_000, &mut rng);
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        assert!((var - 0.5).abs() < 0.03 * 0.5, "sample variance {var}");
    }

    #[test]
    fn deterministic_decay_from_initial_condition() {
        let model = ar1(0.9, 1e-24).with_initial_conditions(vec![1.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let w = model.simulate(3, &mut rng);
        assert_abs_diff_eq!(w[0], 0.9, epsilon = 1e-9);
        assert_abs_diff_eq!(w[1], 0.81, epsilon = 1e-9);
        assert_abs_diff_eq!(w[2], 0.729, epsilon = 1e-9);
    }

    #[test]
    fn ar1_long_run_variance_matches_stationary_formula() {
        // Stationary variance sigma^2 / (1 - alpha^2) = 5.263...
        let model = ar1(0.9, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let w = model.simulate_with_burn_in(1_000_000, 200, &mut rng);
        let var = w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64;
        let expected = 1.0 / (1.0 - 0.81);
        assert!((var - expected).abs() < 0.05 * expected, "sample variance {var}");
    }

    #[test]
    fn white_whitening_is_identity() {
        let model = ArNoiseModel::white(1.0).unwrap();
        let op = WhiteningOperator::build(&model, 5).unwrap();
        assert_eq!(op.to_dense(), DMatrix::identity(5, 5));
        assert_eq!(op.c(), &DVector::zeros(5));
        assert_abs_diff_eq!(op.a(), 5.0);
    }

    #[test]
    fn ar1_operator_matches_hand_construction() {
        let op = WhiteningOperator::build(&ar1(0.9, 1.0), 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, -0.9, 1.0, 0.0, 0.0, -0.9, 1.0]);
        assert_eq!(op.to_dense(), expected);
        let t1 = op.apply(&DVector::from_element(3, 1.0));
        assert_abs_diff_eq!(t1[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t1[1], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(t1[2], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(op.a(), 1.02, epsilon = 1e-12);
    }

    #[test]
    fn offset_carries_initial_conditions() {
        let model = ar1(0.9, 1.0).with_initial_conditions(vec![2.0]).unwrap();
        let op = WhiteningOperator::build(&model, 3).unwrap();
        assert_abs_diff_eq!(op.c()[0], -1.8, epsilon = 1e-15);
        assert_abs_diff_eq!(op.c()[1], 0.0);
        assert_abs_diff_eq!(op.c()[2], 0.0);
    }

    #[test]
    fn stats_reduce_to_sample_mean_for_white_noise() {
        let model = ArNoiseModel::white(1.0).unwrap();
        let op = WhiteningOperator::build(&model, 4).unwrap();
        let x = DVector::from_column_slice(&[1.0, 2.0, 3.0, 6.0]);
        let (a, z) = op.stats(&x).unwrap();
        assert_abs_diff_eq!(a, 4.0);
        assert_abs_diff_eq!(z, 12.0); // N * mean
    }

    #[test]
    fn stats_on_zero_window_are_zero() {
        let op = WhiteningOperator::build(&ar1(0.7, 1.0), 6).unwrap();
        let (_, z) = op.stats(&DVector::zeros(6)).unwrap();
        assert_abs_diff_eq!(z, 0.0);
    }

    #[test]
    fn stats_match_worked_example() {
        let op = WhiteningOperator::build(&ar1(0.9, 1.0), 3).unwrap();
        let x = DVector::from_element(3, 1.0);
        let (a, z) = op.stats(&x).unwrap();
        assert_abs_diff_eq!(a, 1.02, epsilon = 1e-12);
        assert_abs_diff_eq!(z, 1.02, epsilon = 1e-12);
    }

    #[test]
    fn whitening_removes_lag_one_correlation() {
        let n = 10_000;
        let model = ar1(0.9, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let w = model.simulate(n, &mut rng);
        let op = WhiteningOperator::build(&model, n).unwrap();
        let v = op.whiten(&w);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let lag1 = (0..n - 1)
            .map(|t| (v[t] - mean) * (v[t + 1] - mean))
            .sum::<f64>()
            / (n as f64 * var);
        assert!(lag1.abs() < 3.0 / (n as f64).sqrt(), "lag-1 autocorrelation {lag1}");
    }

    #[test]
    fn whitening_recovers_recorded_innovations() {
        let model = ArNoiseModel::new(vec![0.5, -0.3], 1.0)
            .unwrap()
            .with_initial_conditions(vec![0.7, -1.1])
            .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let innovations: Vec<f64> = (0..50).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let w = model.simulate_with_innovations(&innovations);
        let op = WhiteningOperator::build(&model, 50).unwrap();
        let v = op.whiten(&w);
        for (got, want) in v.iter().zip(&innovations) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationarity_check() {
        assert!(ar1(0.9, 1.0).is_stationary());
        assert!(!ar1(1.1, 1.0).is_stationary());
        assert!(ArNoiseModel::new(vec![0.5, -0.3], 1.0).unwrap().is_stationary());
        assert!(ArNoiseModel::white(1.0).unwrap().is_stationary());
    }

    #[test]
    fn yule_walker_on_white_noise_finds_small_alpha() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let samples: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = fit_ar_yule_walker(&samples, 1).unwrap();
        assert!(fit.coeffs()[0].abs() <= 0.05, "alpha-hat {}", fit.coeffs()[0]);
    }

    #[test]
    fn yule_walker_recovers_ar1_coefficient() {
        let model = ar1(0.9, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let w = model.simulate_with_burn_in(10_000, 200, &mut rng);
        let fit = fit_ar_yule_walker(w.as_slice(), 1).unwrap();
        let alpha = fit.coeffs()[0];
        assert!((0.85..=0.95).contains(&alpha), "alpha-hat {alpha}");
        assert!(fit.sigma2() > 0.5 && fit.sigma2() < 1.5);
    }

    #[test]
    fn yule_walker_order_zero_returns_sample_variance() {
        let samples: Vec<f64> = vec![1.0, -1.0, 1.0, -1.0, 2.0, -2.0, 1.5, -0.5, 0.25, -0.75, 1.0, 0.0];
        let fit = fit_ar_yule_walker(&samples, 0).unwrap();
        assert_eq!(fit.order(), 0);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / samples.len() as f64;
        assert_abs_diff_eq!(fit.sigma2(), var, epsilon = 1e-12);
    }

    #[test]
    fn yule_walker_rejects_constant_input() {
        let samples = vec![3.0; 200];
        assert!(fit_ar_yule_walker(&samples, 1).is_err());
        assert!(fit_ar_yule_walker(&samples, 0).is_err());
    }

    #[test]
    fn yule_walker_rejects_short_input() {
        let samples = vec![1.0; 15];
        assert!(matches!(fit_ar_yule_walker(&samples, 1), Err(Error::InvalidParameter(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn banded_stats_match_dense_evaluation(
            seed in 0u64..500,
            n in 1usize..12,
            alpha in -0.95f64..0.95,
            w0 in -2.0f64..2.0,
        ) {
            let model = ar1(alpha, 1.0).with_initial_conditions(vec![w0]).unwrap();
            let op = WhiteningOperator::build(&model, n).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));

            let t = op.to_dense();
            let ones = DVector::from_element(n, 1.0);
            let dense_a = (&t * &ones).norm_squared();
            let dense_z = (&t * &ones).dot(&(&t * &x + op.c()));

            let (a, z) = op.stats(&x).unwrap();
            prop_assert!((a - dense_a).abs() <= 1e-10 * (1.0 + dense_a.abs()));
            prop_assert!((z - dense_z).abs() <= 1e-10 * (1.0 + dense_z.abs()));
        }
    }
}
