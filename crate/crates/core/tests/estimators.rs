mod common;

use std::sync::Arc;

use common::{oracle_integral, Lcg};
use geodesy_core::estimators::{
    dtheta_conditional_mean, eif_general_tilt, eif_hellinger, eif_rows, eif_wasserstein, one_step,
    plug_in, remainder_diagnostic, EstimatorOptions, PerturbedDensity, PerturbedOutcome,
};
use geodesy_core::model::{DensityFn, RegressionFn};
use geodesy_core::nuisance::{
    crossfit, make_fold_plan, oracle_nuisances, NuisanceConfig, NuisancePair, Nuisances, Provenance,
    SplineFitter,
};
use geodesy_core::paths::{hellinger_coeffs, Family, GaussianTarget, PathSpec, DENSITY_FLOOR};
use geodesy_core::simbench::Dgp;
use geodesy_core::{
    make_tgrid, ConditionalDensity, Dataset, Error, Observation, OutcomeRegression, QuadratureEngine,
    Support, TGrid,
};

fn uniform_pair(mu: fn(&[f64], f64) -> f64) -> NuisancePair {
    let s = Support::new(0.0, 1.0).unwrap();
    NuisancePair::new(
        Arc::new(RegressionFn(mu)),
        Arc::new(DensityFn::new(s, |_, _| 1.0)),
        Provenance::Oracle,
    )
}

fn oracle(dgp: &Dgp) -> Nuisances {
    Nuisances::Shared(oracle_nuisances(dgp))
}

fn no_chi() -> EstimatorOptions {
    EstimatorOptions { chi_square: false, ..EstimatorOptions::default() }
}

#[test]
fn wasserstein_eif_substitution() {
    // Uniform pi on [0, 1], a* = 1, t = 0.5: nu = 2 on [0.5, 1].
    let pair = uniform_pair(|_, a| a);
    let spec = PathSpec::new(Family::Wasserstein, Support::new(0.0, 1.0).unwrap(), 1.0).unwrap();
    let z = Observation { x: &[0.3], a: 0.5, y: 1.0 };
    let r = eif_wasserstein(&z, 0.5, &spec, &pair, 0.6, DENSITY_FLOOR).unwrap();
    // 2 (1 - 0.5) + 0.75 - 0.6
    assert!((r.value - 1.15).abs() < 1e-14, "{}", r.value);
    let z0 = Observation { x: &[0.3], a: 0.2, y: 0.9 };
    let r0 = eif_wasserstein(&z0, 0.0, &spec, &pair, 0.4, DENSITY_FLOOR).unwrap();
    assert!((r0.value - 0.5).abs() < 1e-14);
    assert!(matches!(
        eif_wasserstein(&z0, 1.0, &spec, &pair, 0.0, DENSITY_FLOOR),
        Err(Error::ForbiddenEndpoint { .. })
    ));
}

#[test]
fn components_sum_to_value() {
    let dgp = Dgp::sim7();
    let pair = oracle_nuisances(&dgp);
    let spec = PathSpec::new(Family::Hellinger, dgp.support(), 5.0).unwrap();
    let engine = QuadratureEngine::default();
    let rule = engine.over(-1.0, 5.0);
    let mut rng = Lcg(5);
    for _ in 0..40 {
        let x = [rng.next(), rng.next()];
        let a = -6.0 + 12.0 * rng.next();
        let y = 10.0 * rng.next() - 5.0;
        let t = 0.99 * rng.next();
        let z = Observation { x: &x, a, y };
        let h = eif_hellinger(&z, t, &spec, &pair, 0.3, DENSITY_FLOOR, &engine).unwrap();
        assert_eq!(h.components.len(), 5);
        let s: f64 = h.components.iter().map(|c| c.1).sum();
        assert!((s - h.value).abs() < 1e-12);
        let delta = t / (1.0 - t);
        let g = eif_general_tilt(
            &z,
            |a, p| (delta * (a - 6.0)).exp() * p,
            |a, _| (delta * (a - 6.0)).exp(),
            &pair,
            0.3,
            DENSITY_FLOOR,
            &rule,
        );
        let s: f64 = g.components.iter().map(|c| c.1).sum();
        assert!((s - g.value).abs() < 1e-12);
        // f' pi = f for the exponential tilt, so the normalizer term vanishes.
        assert!(g.component("phi_c").unwrap().abs() < 1e-12);
    }
}

#[test]
fn start_of_path_collapses_to_outcome() {
    let dgp = Dgp::sim7();
    let pair = oracle_nuisances(&dgp);
    let engine = QuadratureEngine::default();
    let spec = PathSpec::new(Family::Hellinger, dgp.support(), 5.0).unwrap();
    let z = Observation { x: &[0.2, 0.7], a: 1.3, y: 2.5 };
    let h = eif_hellinger(&z, 0.0, &spec, &pair, 1.0, DENSITY_FLOOR, &engine).unwrap();
    assert!((h.value - 1.5).abs() < 1e-12);
    assert_eq!(h.component("D_Q"), Some(0.0));
    assert_eq!(h.component("D_theta").unwrap(), 0.0);
    let rule = engine.over(-1.0, 5.0);
    let g = eif_general_tilt(&z, |_, p| p, |_, _| 1.0, &pair, 1.0, DENSITY_FLOOR, &rule);
    assert!((g.value - 1.5).abs() < 1e-10, "{}", g.value);
}

/// Central difference of `theta -> integral mu nu_t(theta)` with the moments from an
/// independent quadrature.
fn fd_dtheta(dgp: &Dgp, x: &[f64], t: f64, eps: f64, theta: f64) -> f64 {
    let pi = dgp.treatment_density();
    let mu = dgp.outcome_regression();
    let s = dgp.support();
    let target = GaussianTarget::new(5.0, eps, s).unwrap();
    let integrand = |w: fn(f64, f64) -> f64| {
        oracle_integral(s.lo(), s.hi(), 600, |a| {
            mu.mean(x, a) * w(pi.density(a, x), target.density(a))
        })
    };
    let m1 = integrand(|p, _| p);
    let m2 = integrand(|p, q| (p * q).sqrt());
    let m3 = integrand(|_, q| q);
    let e = |th: f64| {
        let (a, g, b) = hellinger_coeffs(th, t);
        a * m1 + 2.0 * g * m2 + b * m3
    };
    let h = 1e-5;
    (e(theta + h) - e(theta - h)) / (2.0 * h)
}

#[test]
fn dtheta_matches_finite_difference() {
    let dgp = Dgp::sim7();
    let pi = dgp.treatment_density();
    let mu = dgp.outcome_regression();
    let engine = QuadratureEngine::default();
    let mut rng = Lcg(77);
    for _ in 0..12 {
        let x = [rng.next(), rng.next()];
        let t = 0.05 + 0.9 * rng.next();
        let eps = [0.05, 0.2, 0.5][(rng.next() * 3.0) as usize];
        let spec = PathSpec::new(Family::Hellinger, dgp.support(), 5.0).unwrap().with_epsilon(eps).unwrap();
        let target = spec.target().unwrap();
        let u = pi.affinity(&x, &target).unwrap();
        let got = dtheta_conditional_mean(&mu, &pi, &spec, t, &x, &engine).unwrap();
        let want = fd_dtheta(&dgp, &x, t, eps, u.acos());
        assert!((got - want).abs() <= 1e-5 * want.abs().max(1e-3), "{got} vs {want}");
    }
    // With the moments held fixed, a constant c gives c (alpha' + 2 gamma' u + beta'),
    // which equals c 2 gamma sin(theta) because alpha + 2 gamma cos(theta) + beta = 1.
    let c = RegressionFn(|_: &[f64], _| 3.0);
    let spec = PathSpec::new(Family::Hellinger, dgp.support(), 5.0).unwrap();
    let x = [0.5, 0.5];
    let theta = pi.affinity(&x, &spec.target().unwrap()).unwrap().acos();
    let (_, gamma, _) = hellinger_coeffs(theta, 0.4);
    let d = dtheta_conditional_mean(&c, &pi, &spec, 0.4, &x, &engine).unwrap();
    let want = 3.0 * 2.0 * gamma * theta.sin();
    assert!((d - want).abs() < 1e-6 * want.abs(), "{d} vs {want}");
    let d0 = dtheta_conditional_mean(&mu, &pi, &spec, 0.0, &[0.5, 0.5], &engine).unwrap();
    assert_eq!(d0, 0.0);
}

fn mean_zero(family: Family, n: usize) {
    let dgp = Dgp::sim7();
    let data = dgp.sample(n, 2024).unwrap();
    let spec = PathSpec::new(family, dgp.support(), 5.0).unwrap();
    let grid = TGrid::new(vec![0.1, 0.5, 0.9]).unwrap();
    let rows = eif_rows(&data, &spec, &grid, &oracle(&dgp), &no_chi(), 0..n).unwrap();
    let truth = geodesy_core::simbench::true_effect_curve(&dgp, &spec, &grid, 50_000, 7).unwrap();
    for (k, &t) in grid.values().iter().enumerate() {
        let v: Vec<f64> = rows.iter().map(|r| r.values[k] - truth[k].psi).collect();
        let (m, sd) = geodesy_core::stats::mean_sd(&v);
        // The truth carries its own Monte Carlo error, far below sd / sqrt(n).
        assert!(m.abs() < 3.0 * sd / (n as f64).sqrt(), "{family:?} t={t}: mean {m}, sd {sd}");
    }
}

#[test]
fn eif_mean_zero_wasserstein() {
    mean_zero(Family::Wasserstein, 20_000);
}

#[test]
fn eif_mean_zero_hellinger() {
    mean_zero(Family::Hellinger, 20_000);
}

#[test]
fn eif_mean_zero_exp_tilt() {
    mean_zero(Family::ExpTilt, 20_000);
}

fn small_fitted(n: usize) -> (Dataset, Nuisances) {
    let dgp = Dgp::sim7();
    let data = dgp.sample(n, 31).unwrap();
    let plan = make_fold_plan(n, 2, 3).unwrap();
    let cf = crossfit(&data, plan, &SplineFitter { cfg: NuisanceConfig::default() }).unwrap();
    (data, Nuisances::CrossFit(cf))
}

#[test]
fn one_step_starts_at_sample_mean() {
    let (data, fitted) = small_fitted(300);
    let dgp = Dgp::sim7();
    let grid = make_tgrid(0.9, 0.3).unwrap();
    for nuis in [fitted, oracle(&dgp)] {
        for family in [Family::Wasserstein, Family::Hellinger, Family::ExpTilt] {
            let spec = PathSpec::new(family, dgp.support(), 5.0).unwrap();
            let r = one_step(&data, &spec, &grid, &nuis, &EstimatorOptions::default()).unwrap();
            assert!((r.curve[0].psi_hat - data.mean_y()).abs() < 1e-12, "{family:?}");
            assert_eq!(r.n, 300);
            for p in &r.curve {
                assert!(p.ci_lo <= p.psi_hat && p.psi_hat <= p.ci_hi && p.se >= 0.0 && p.chi_sq >= 0.0);
            }
            assert_eq!(r.curve[0].chi_sq, 0.0);
        }
    }
}

#[test]
fn one_step_is_self_centering() {
    let (data, nuis) = small_fitted(200);
    let grid = make_tgrid(0.9, 0.45).unwrap();
    let spec = PathSpec::new(Family::Hellinger, data.support(), 5.0).unwrap();
    let rows = eif_rows(&data, &spec, &grid, &nuis, &no_chi(), 0..200).unwrap();
    let r = one_step(&data, &spec, &grid, &nuis, &no_chi()).unwrap();
    for (k, p) in r.curve.iter().enumerate() {
        let centered: f64 = rows.iter().map(|row| row.values[k] - p.psi_hat).sum::<f64>() / 200.0;
        assert!(centered.abs() < 1e-10);
    }
}

#[test]
fn split_rows_reduce_to_the_same_curve() {
    let dgp = Dgp::sim7();
    let data = dgp.sample(120, 4).unwrap();
    let spec = PathSpec::new(Family::ExpTilt, dgp.support(), 5.0).unwrap();
    let grid = make_tgrid(0.5, 0.25).unwrap();
    let opts = no_chi();
    let mut rows = eif_rows(&data, &spec, &grid, &oracle(&dgp), &opts, 0..50).unwrap();
    rows.extend(eif_rows(&data, &spec, &grid, &oracle(&dgp), &opts, 50..120).unwrap());
    let whole = one_step(&data, &spec, &grid, &oracle(&dgp), &opts).unwrap();
    let split = geodesy_core::estimators::summarize(&grid, &rows, 1).unwrap();
    assert_eq!(whole, split);
}

#[test]
fn standard_error_grows_along_the_path() {
    let dgp = Dgp::sim7();
    let data = dgp.sample(2000, 8).unwrap();
    let grid = TGrid::new(vec![0.1, 0.5, 0.99]).unwrap();
    let spec = PathSpec::new(Family::Wasserstein, dgp.support(), 5.0).unwrap();
    let r = one_step(&data, &spec, &grid, &oracle(&dgp), &no_chi()).unwrap();
    assert!(r.curve[2].se > r.curve[1].se && r.curve[1].se > r.curve[0].se);
}

#[test]
fn reflected_tilt_has_no_one_step() {
    let dgp = Dgp::sim7();
    let data = dgp.sample(60, 1).unwrap();
    let spec = PathSpec::new(Family::ReflectedTilt, dgp.support(), 0.0).unwrap();
    let grid = make_tgrid(0.5, 0.5).unwrap();
    let err = one_step(&data, &spec, &grid, &oracle(&dgp), &no_chi()).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

#[test]
fn plug_in_reflected_concentrates_at_split() {
    let dgp = Dgp::sim7();
    let data = dgp.sample(40, 2).unwrap();
    let spec = PathSpec::new(Family::ReflectedTilt, dgp.support(), 0.0).unwrap();
    let grid = TGrid::new(vec![0.0, 0.999]).unwrap();
    let engine = QuadratureEngine::default();
    let curve = plug_in(&data, &spec, &grid, &oracle(&dgp), &engine).unwrap();
    let at_split: f64 = (0..40).map(|i| dgp.outcome_mean(data.x_row(i), 0.0)).sum::<f64>() / 40.0;
    assert!((curve[1].psi_hat - at_split).abs() < 0.05, "{} vs {at_split}", curve[1].psi_hat);
}

#[test]
fn plug_in_with_fitted_nuisances_differs_from_sample_mean() {
    let (data, nuis) = small_fitted(300);
    let spec = PathSpec::new(Family::Wasserstein, data.support(), 5.0).unwrap();
    let grid = TGrid::new(vec![0.0]).unwrap();
    let curve = plug_in(&data, &spec, &grid, &nuis, &QuadratureEngine::default()).unwrap();
    let diff = (curve[0].psi_hat - data.mean_y()).abs();
    assert!(diff > 1e-6 && diff < 0.5, "{diff}");
}

fn perturbed(dgp: &Dgp, c_pi: f64, c_mu: f64) -> NuisancePair {
    let truth = oracle_nuisances(dgp);
    let engine = QuadratureEngine::default();
    let pi = PerturbedDensity::new(truth.pi.clone(), c_pi, |a: f64, x: &[f64]| (0.7 * a + x[0]).sin(), &engine);
    let mu = PerturbedOutcome::new(truth.mu.clone(), c_mu, |x: &[f64], a: f64| (0.5 * a - x[1]).cos());
    NuisancePair::new(Arc::new(mu), Arc::new(pi), Provenance::Fitted)
}

#[test]
fn remainder_is_second_order() {
    let dgp = Dgp::sim7();
    let truth = oracle_nuisances(&dgp);
    let xs = dgp.sample_covariates(40, 9);
    let spec = PathSpec::new(Family::Wasserstein, dgp.support(), 5.0).unwrap();
    let engine = QuadratureEngine::default();
    let r = |cp: f64, cm: f64| {
        remainder_diagnostic(&truth, &perturbed(&dgp, cp, cm), &spec, 0.5, &xs, 2, &engine).unwrap()
    };
    assert!(r(0.0, 0.0).abs() < 1e-9);
    assert!(r(0.0, 0.3).abs() < 1e-6, "{}", r(0.0, 0.3));
    assert!(r(0.3, 0.0).abs() < 1e-6, "{}", r(0.3, 0.0));
    let vals: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&c| r(c, c)).collect();
    for w in vals.windows(2) {
        let ratio = w[0] / w[1];
        assert!((2.5..=6.0).contains(&ratio), "{vals:?}");
    }
}
