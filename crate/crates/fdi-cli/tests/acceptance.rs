//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line. Run with `cargo test -p fdi-cli --test acceptance --
//! --nocapture` to see the report.

use std::fs;
use std::process::Command;

use fdi_core::{
    ar_mle_estimate, fastica, fit_ar_yule_walker, glrt_ar, glrt_gaussian_sequential, glrt_white,
    mse_eval, roc_from_scores, run_experiment, simulate_trial_data, synthetic_jacobian,
    wls_estimate_sequential, ArNoiseModel, AttackSpec, DetectorChoice, GaussianDetector,
    Hypothesis, IcaOptions, MeasurementMatrix, ObservationBlock, Scenario,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion} ({name}): {verdict} — {detail}");
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn random_model(m: usize, k: usize, seed: u64) -> MeasurementMatrix {
    MeasurementMatrix::from_jacobian(synthetic_jacobian(m, k, seed)).unwrap()
}

fn paper_scale_model() -> MeasurementMatrix {
    random_model(284, 60, 1)
}

fn paper_scenario(sigma2: f64, attack: AttackSpec, master_seed: u64) -> Scenario {
    let mm = paper_scale_model();
    let theta = DVector::from_element(mm.states(), 1.0);
    let noise = ArNoiseModel::new(vec![0.9], sigma2).unwrap();
    let mut scenario = Scenario::new(mm, theta, noise, 20);
    scenario.attack = attack;
    scenario.trials = 1_000;
    scenario.master_seed = master_seed;
    scenario
}

fn aucs(scenario: &Scenario) -> (f64, f64) {
    let table = run_experiment(scenario).unwrap();
    let gaussian = roc_from_scores(&table, DetectorChoice::Gaussian).unwrap().auc();
    let ar = roc_from_scores(&table, DetectorChoice::Ar).unwrap().auc();
    (gaussian, ar)
}

/// The AR machinery with order-0 models reproduces the sequential Gaussian
/// detector and estimator exactly.
#[test]
fn criterion_1_ar0_equivalence() {
    let mut worst_stat: f64 = 0.0;
    let mut worst_theta: f64 = 0.0;
    for instance in 0..200u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(1_000 + instance);
        let m = rng.gen_range(3..=50);
        let k = rng.gen_range(1..=10.min(m - 1));
        let n = rng.gen_range(1..=20);
        let mm = random_model(m, k, 10_000 + instance);
        let x = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let obs = ObservationBlock::new(x).unwrap();
        let sigma2: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
        let models: Vec<ArNoiseModel> =
            sigma2.iter().map(|&s| ArNoiseModel::white(s).unwrap()).collect();

        let (ar_stat, _) = glrt_ar(&mm, &models, &obs).unwrap();
        let seq_stat = glrt_gaussian_sequential(&mm, &sigma2, &obs).unwrap();
        worst_stat =
            worst_stat.max((ar_stat.value - seq_stat.value).abs() / (1.0 + seq_stat.value));

        let ar_est = ar_mle_estimate(mm.jacobian(), &models, &obs).unwrap();
        let seq_est = wls_estimate_sequential(mm.jacobian(), &sigma2, &obs).unwrap();
        worst_theta = worst_theta.max(
            (ar_est.theta() - seq_est.theta()).norm() / (1.0 + seq_est.theta().norm()),
        );
    }
    report(
        1,
        "ar0-equivalence",
        worst_stat <= 1e-9 && worst_theta <= 1e-9,
        &format!("max relative gap: statistic {worst_stat:.2e}, estimate {worst_theta:.2e}"),
    );
}

/// Column-space injections never move the white GLRT statistic.
#[test]
fn criterion_2_unobservable_invariance() {
    let mut worst: f64 = 0.0;
    for instance in 0..200u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(2_000 + instance);
        let m = rng.gen_range(3..=40);
        let k = rng.gen_range(1..=8.min(m - 1));
        let mm = random_model(m, k, 20_000 + instance);
        let x = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let theta_a = DVector::from_fn(k, |_, _| 5.0 * rng.sample::<f64, _>(StandardNormal));
        let (base, _) = glrt_white(&mm, &x).unwrap();
        let (shifted, _) = glrt_white(&mm, &(&x + mm.jacobian() * theta_a)).unwrap();
        worst = worst.max((base.value - shifted.value).abs() / (1.0 + base.value));
    }
    report(2, "unobservable-invariance", worst <= 1e-9, &format!("max relative drift {worst:.2e}"));
}

/// Correctly specified Gaussian detection on white noise is chi-square: the
/// empirical mean lands on the residual degrees of freedom.
#[test]
fn criterion_3_null_calibration() {
    let mut details = Vec::new();
    let mut pass = true;
    for (m, k, seed) in [(50usize, 10usize, 31u64), (284, 60, 1)] {
        let mm = random_model(m, k, seed);
        let sigma2 = 0.5;
        let detector = GaussianDetector::new(&mm, &vec![sigma2; m]).unwrap();
        let theta = DVector::from_element(k, 1.0);
        let signal = mm.jacobian() * &theta;
        let mut rng = ChaCha12Rng::seed_from_u64(3_000 + m as u64);
        let trials = 2_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let x = DVector::from_fn(m, |i, _| {
                signal[i] + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
            });
            total += detector.statistic(&x).unwrap().value;
        }
        let mean = total / trials as f64;
        let dof = (m - k) as f64;
        pass &= (mean - dof).abs() <= 0.05 * dof;
        details.push(format!("{m}x{k}: mean {mean:.2} vs dof {dof}"));
    }
    report(3, "null-calibration", pass, &details.join("; "));
}

/// Observable sparse attacks at paper scale: the AR detector dominates the
/// Gaussian one at every noise level, and both degrade as noise grows.
#[test]
fn criterion_4_observable_attack_ordering() {
    let seeds = [101u64, 102, 103, 104, 105];
    let sigmas = [0.3, 0.5, 0.7];
    let mut gaussian_means = Vec::new();
    let mut ar_means = Vec::new();
    for &sigma2 in &sigmas {
        let mut gaussian_acc = 0.0;
        let mut ar_acc = 0.0;
        for &seed in &seeds {
            let scenario =
                paper_scenario(sigma2, AttackSpec::Sparse { d: 29, magnitude: 1.0 }, seed);
            let (gaussian, ar) = aucs(&scenario);
            gaussian_acc += gaussian;
            ar_acc += ar;
        }
        gaussian_means.push(gaussian_acc / seeds.len() as f64);
        ar_means.push(ar_acc / seeds.len() as f64);
    }
    let ordering = sigmas
        .iter()
        .enumerate()
        .all(|(i, _)| ar_means[i] > gaussian_means[i]);
    let monotone = gaussian_means.windows(2).all(|w| w[1] <= w[0])
        && ar_means.windows(2).all(|w| w[1] <= w[0]);
    report(
        4,
        "observable-attacks",
        ordering && monotone,
        &format!(
            "sigma2 {sigmas:?}: AUC ar {ar_means:.3?} vs gaussian {gaussian_means:.3?}",
        ),
    );
}

/// Blind component-analysis attacks: the AR detector still dominates, and
/// the Gaussian detector does worse than it did on observable attacks at the
/// same noise level.
#[test]
fn criterion_5_ica_attack_ordering() {
    let master_seed = 201u64;
    let mut observable_gaussian = std::collections::HashMap::new();
    for sigma2 in [0.3, 0.7] {
        let scenario =
            paper_scenario(sigma2, AttackSpec::Sparse { d: 29, magnitude: 1.0 }, master_seed);
        let (gaussian, _) = aucs(&scenario);
        observable_gaussian.insert(format!("{sigma2}"), gaussian);
    }

    let cells = [(0.3, 0.3), (0.3, 0.5), (0.7, 0.5)];
    let mut pass = true;
    let mut details = Vec::new();
    for &(sigma2, sigma_y2) in &cells {
        let scenario =
            paper_scenario(sigma2, AttackSpec::Ica { sigma_y2, magnitude: 1.0 }, master_seed);
        let (gaussian, ar) = aucs(&scenario);
        let baseline = observable_gaussian[&format!("{sigma2}")];
        pass &= ar > gaussian && gaussian < baseline;
        details.push(format!(
            "({sigma2},{sigma_y2}): ar {ar:.3}, gaussian {gaussian:.3} (observable {baseline:.3})"
        ));
    }
    report(5, "ica-attacks", pass, &details.join("; "));
}

/// Small state perturbations move neither the detection AUCs nor the
/// estimation residuals by more than the allowed slack.
#[test]
fn criterion_6_dynamic_load_robustness() {
    let master_seed = 301u64;
    let build = |rho: f64| {
        let mut scenario =
            paper_scenario(0.5, AttackSpec::Sparse { d: 29, magnitude: 1.0 }, master_seed);
        scenario.state_perturbation = rho;
        scenario
    };

    let (gaussian_base, ar_base) = aucs(&build(0.0));
    let (gaussian_pert, ar_pert) = aucs(&build(0.05));
    let auc_ok =
        (gaussian_base - gaussian_pert).abs() <= 0.05 && (ar_base - ar_pert).abs() <= 0.05;

    // Estimation residuals on clean blocks, matched noise draws.
    let trials = 300;
    let mut mse = |rho: f64| -> (f64, f64) {
        let scenario = build(rho);
        let variances = scenario.meter_variances();
        let mut gaussian_acc = 0.0;
        let mut ar_acc = 0.0;
        for trial in 0..trials {
            let data = simulate_trial_data(&scenario, trial, Hypothesis::Null).unwrap();
            let gaussian =
                wls_estimate_sequential(scenario.mm.jacobian(), &variances, &data.observations)
                    .unwrap();
            let ar = ar_mle_estimate(scenario.mm.jacobian(), &scenario.noise, &data.observations)
                .unwrap();
            gaussian_acc += mse_eval(&data.observations, &scenario.mm, &gaussian).unwrap();
            ar_acc += mse_eval(&data.observations, &scenario.mm, &ar).unwrap();
        }
        (gaussian_acc / trials as f64, ar_acc / trials as f64)
    };
    let (mse_gaussian_base, mse_ar_base) = mse(0.0);
    let (mse_gaussian_pert, mse_ar_pert) = mse(0.05);
    let mse_ok = (mse_gaussian_base - mse_gaussian_pert).abs() / mse_gaussian_base <= 0.10
        && (mse_ar_base - mse_ar_pert).abs() / mse_ar_base <= 0.10;

    report(
        6,
        "dynamic-load-robustness",
        auc_ok && mse_ok,
        &format!(
            "AUC gaussian {gaussian_base:.3}->{gaussian_pert:.3}, ar {ar_base:.3}->{ar_pert:.3}; \
             residual gaussian {mse_gaussian_base:.3}->{mse_gaussian_pert:.3}, \
             ar {mse_ar_base:.3}->{mse_ar_pert:.3}"
        ),
    );
}

/// FastICA separates two Laplacian sources (up to permutation and sign) in
/// at least 95 of 100 seeded runs.
#[test]
fn criterion_7_fastica_recovery() {
    fn laplacian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen::<f64>() - 0.5;
        -u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
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

    let mut successes = 0;
    for run in 0..100u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(7_000 + run);
        let sources = DMatrix::from_fn(2, 2_000, |_, _| laplacian(&mut rng));
        let angle: f64 = rng.gen::<f64>() * std::f64::consts::PI;
        let mixing = DMatrix::from_row_slice(
            2,
            2,
            &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()],
        );
        let obs = ObservationBlock::new(&mixing * &sources).unwrap();
        let model = fastica(&obs, &IcaOptions::default(), &mut rng).unwrap();
        let recovered = (0..2).all(|i| {
            let truth: Vec<f64> = sources.row(i).iter().copied().collect();
            (0..model.components()).any(|j| {
                let got: Vec<f64> = model.quasi_states().row(j).iter().copied().collect();
                correlation(&truth, &got).abs() >= 0.95
            })
        });
        if recovered {
            successes += 1;
        }
    }
    report(7, "fastica-recovery", successes >= 95, &format!("{successes}/100 runs recovered"));
}

/// Yule-Walker pins the AR(1) coefficient within 0.05 in at least 95 of 100
/// runs of 10,000 samples.
#[test]
fn criterion_8_yule_walker() {
    let model = ArNoiseModel::new(vec![0.9], 1.0).unwrap();
    let mut successes = 0;
    for run in 0..100u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(8_000 + run);
        let samples = model.simulate_with_burn_in(10_000, 200, &mut rng);
        let fit = fit_ar_yule_walker(samples.as_slice(), 1).unwrap();
        if (0.85..=0.95).contains(&fit.coeffs()[0]) {
            successes += 1;
        }
    }
    report(8, "yule-walker", successes >= 95, &format!("{successes}/100 fits in [0.85, 0.95]"));
}

/// Identical config and seed produce byte-identical score CSVs, whatever the
/// thread count.
#[test]
fn criterion_9_determinism() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        r#"{
  "system": {"source": "synthetic", "dims": {"m": 30, "k": 8, "seed": 5}},
  "noise": {"order": 1, "coeffs": [0.9], "sigma2": 0.5},
  "attack": {"kind": "sparse", "magnitude": 1.0, "d": 3},
  "run": {"n": 10, "trials": 50, "detectors": ["gaussian", "ar"], "master_seed": 77}
}"#,
    )
    .unwrap();

    let mut outputs = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "4"), ("c.csv", "1")] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_fdi"))
            .args([
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    let identical = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    report(
        9,
        "determinism",
        identical,
        &format!("3 runs (threads 1/4/1), {} bytes each", outputs[0].len()),
    );
}
