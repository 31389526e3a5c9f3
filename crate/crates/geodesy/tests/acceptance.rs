//! Acceptance run: every criterion at its stated tolerance, one PASS/FAIL line each.
//!
//! A FAIL is reported, not hidden; the process exits nonzero on any FAIL only when
//! `GEODESY_ACCEPTANCE_STRICT=1`, so the regular test run stays usable while a
//! criterion is known to be out of reach.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use geodesy::commands::cached_truth;
use geodesy::parallel;
use geodesy_core::estimators::{
    dtheta_conditional_mean, eif_rows, one_step, remainder_diagnostic, EstimatorOptions, PerturbedDensity,
    PerturbedOutcome,
};
use geodesy_core::model::{ConditionalDensity, DensityFn, OutcomeRegression};
use geodesy_core::msm::{estimate_surface, fit_beta, fit_surface, Basis, MsmModel, SurfaceNodes};
use geodesy_core::nuisance::{
    crossfit, make_fold_plan, oracle_nuisances, NuisanceConfig, NuisancePair, Nuisances, OutcomeFitter, Provenance,
    SplineFitter,
};
use geodesy_core::paths::{
    hellinger_affinity_closed_form, hellinger_affinity_quadrature, hellinger_coeffs, ratio_error_lower_bound_check,
    wasserstein_density, GaussianTarget, PathAt,
};
use geodesy_core::simbench::{chi_sq_profile, CoverageConfig, Dgp, NuisanceMode};
use geodesy_core::special::{normal_pdf, truncated_normal_inverse};
use geodesy_core::stats::mean_sd;
use geodesy_core::{make_tgrid, Dataset, Family, PathSpec, QuadratureEngine, Support, TGrid};

/// Value `5 + 2 / 6^3` the sim7 curves approach as t -> 1.
const SIM7_LIMIT: f64 = 5.009_259_259_259_259;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Deterministic uniforms in [0, 1) for probe points.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn uniform_breaks(lo: f64, hi: f64, pieces: usize) -> Vec<f64> {
    (0..=pieces).map(|k| lo + (hi - lo) * k as f64 / pieces as f64).collect()
}

fn density_validity() -> Outcome {
    let start = Instant::now();
    let e = QuadratureEngine::default();
    let dgp = Dgp::sim7();
    let pi = dgp.treatment_density();
    let ts = [0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9, 0.95, 0.99];
    let mut rng = Lcg(1);
    let xs: Vec<[f64; 2]> = (0..20).map(|_| [-(1.0 - rng.next()).ln(), -(1.0 - rng.next()).ln()]).collect();
    let mut worst: f64 = 0.0;
    for family in Family::ALL {
        let spec = PathSpec::new(family, dgp.support(), 5.0).unwrap().with_split_point(2.0).unwrap();
        for x in &xs {
            for &t in &ts {
                let m = PathAt::new(&spec, &pi, x, t, &e).unwrap().mass(&e);
                worst = worst.max((m - 1.0).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-6 && secs < 30.0, format!("max |mass - 1| = {worst:.2e} over 4 x 20 x 10 in {secs:.1} s"))
}

fn push_forward_law() -> Outcome {
    let dgp = Dgp::sim7();
    let pi = dgp.treatment_density();
    let spec = PathSpec::new(Family::Wasserstein, dgp.support(), 5.0).unwrap();
    let e = QuadratureEngine::default();
    let x = [0.8, 0.6];
    let loc = pi.location(&x).unwrap();
    let mut rng = Lcg(2);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| truncated_normal_inverse(rng.next().max(1e-300), loc, 1.0, -1.0, 5.0)).collect();
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5, 0.75] {
        let mut moved: Vec<f64> = draws.iter().map(|a| (1.0 - t) * a + t * 5.0).collect();
        moved.sort_by(f64::total_cmp);
        let (lo, hi) = spec.shrunken_support(t);
        let cells = 500;
        let h = (hi - lo) / cells as f64;
        let (mut cdf, mut ks) = (0.0, 0.0f64);
        for k in 0..cells {
            let a = lo + k as f64 * h;
            cdf += e.over(a, a + h).integrate(|v| wasserstein_density(&pi, t, &spec, v, &x).unwrap());
            let emp = moved.partition_point(|&v| v <= a + h) as f64 / n as f64;
            ks = ks.max((emp - cdf).abs());
        }
        parts.push(format!("t={t}: {ks:.4}"));
        worst = worst.max(ks);
    }
    outcome(worst < 0.02, format!("KS {}", parts.join(", ")))
}

fn affinity_closed_form() -> Outcome {
    let start = Instant::now();
    let s = Support::new(-1.0, 5.0).unwrap();
    let e = QuadratureEngine::default();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let mu = -1.0 + 6.0 * i as f64 / 19.0;
        for j in 0..5 {
            let eps = [0.02, 0.05, 0.1, 0.25, 0.5][j];
            let closed = hellinger_affinity_closed_form(mu, s, 5.0, eps).unwrap();
            let pi = DensityFn::new(s, move |a, _| {
                let z = geodesy_core::special::normal_cdf(5.0 - mu) - geodesy_core::special::normal_cdf(-1.0 - mu);
                normal_pdf(a - mu) / z
            });
            let spec = PathSpec::new(Family::Hellinger, s, 5.0).unwrap().with_epsilon(eps).unwrap();
            let quad = hellinger_affinity_quadrature(&pi, &spec, &[], &e).unwrap();
            worst = worst.max(((closed - quad) / quad).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-6 && secs < 5.0, format!("max relative error {worst:.2e} on 20 x 5 grid in {secs:.2} s"))
}

/// Central difference in theta of `alpha m1 + 2 gamma m2 + beta m3`, with the three
/// moments integrated separately on a fine composite rule.
fn fd_dtheta(dgp: &Dgp, x: &[f64], t: f64, eps: f64, theta: f64) -> f64 {
    let pi = dgp.treatment_density();
    let mu = dgp.outcome_regression();
    let s = dgp.support();
    let target = GaussianTarget::new(5.0, eps, s).unwrap();
    let e = QuadratureEngine::default();
    let cut = 5.0 - 12.0 * eps;
    let mut breaks = uniform_breaks(s.lo(), cut, 40);
    breaks.extend(uniform_breaks(cut, s.hi(), 40).into_iter().skip(1));
    let rule = e.piecewise(&breaks);
    let moment = |w: &dyn Fn(f64, f64) -> f64| rule.integrate(|a| mu.mean(x, a) * w(pi.density(a, x), target.density(a)));
    let m1 = moment(&|p, _| p);
    let m2 = moment(&|p, q| (p * q).sqrt());
    let m3 = moment(&|_, q| q);
    let f = |th: f64| {
        let (a, g, b) = hellinger_coeffs(th, t);
        a * m1 + 2.0 * g * m2 + b * m3
    };
    let h = 1e-5;
    (f(theta + h) - f(theta - h)) / (2.0 * h)
}

fn dtheta_closed_form() -> Outcome {
    let dgp = Dgp::sim7();
    let pi = dgp.treatment_density();
    let mu = dgp.outcome_regression();
    let e = QuadratureEngine::default();
    let mut rng = Lcg(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let x = [-(1.0 - rng.next()).ln(), -(1.0 - rng.next()).ln()];
        let t = 0.05 + 0.9 * rng.next();
        let eps = 0.03 + 0.47 * rng.next();
        let spec = PathSpec::new(Family::Hellinger, dgp.support(), 5.0).unwrap().with_epsilon(eps).unwrap();
        let theta = pi.affinity(&x, &spec.target().unwrap()).unwrap().acos();
        let got = dtheta_conditional_mean(&mu, &pi, &spec, t, &x, &e).unwrap();
        let want = fd_dtheta(&dgp, &x, t, eps, theta);
        worst = worst.max(((got - want) / want).abs());
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 50 probes"))
}

fn eif_mean_zero() -> Outcome {
    let dgp = Dgp::sim7();
    let n = 100_000;
    let data = dgp.sample(n, 5).unwrap();
    let grid = TGrid::new(vec![0.1, 0.5, 0.9]).unwrap();
    let nuis = Nuisances::Shared(oracle_nuisances(&dgp));
    let opts = EstimatorOptions { chi_square: false, ..EstimatorOptions::default() };
    let e = QuadratureEngine::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for family in [Family::Wasserstein, Family::Hellinger, Family::ExpTilt] {
        let spec = PathSpec::new(family, dgp.support(), 5.0).unwrap();
        let rows = eif_rows(&data, &spec, &grid, &nuis, &opts, 0..n).unwrap();
        // Truth from independent covariate draws, with Monte Carlo error far below sd / sqrt(n).
        let truth = parallel::true_effect_curve(&dgp, &spec, &grid, 1_000_000, 6, &e).unwrap();
        for (k, &t) in grid.values().iter().enumerate() {
            let v: Vec<f64> = rows.iter().map(|r| r.values[k] - truth[k].psi).collect();
            let (m, sd) = mean_sd(&v);
            let z = m.abs() / (sd / (n as f64).sqrt());
            pass &= z < 3.0;
            parts.push(format!("{}@{t} z={z:.2}", family.label()));
        }
    }
    outcome(pass, format!("|mean| / (sd/sqrt n): {}", parts.join(", ")))
}

fn endpoint_identity() -> Outcome {
    let grid = TGrid::new(vec![0.0, 0.5]).unwrap();
    let opts = EstimatorOptions::default();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut check = |data: &Dataset, nuis: &Nuisances, a_star: f64| {
        for family in [Family::Wasserstein, Family::Hellinger, Family::ExpTilt] {
            let spec = PathSpec::new(family, data.support(), a_star).unwrap();
            let r = one_step(data, &spec, &grid, nuis, &opts).unwrap();
            worst = worst.max((r.curve.iter().next().unwrap().psi_hat - data.mean_y()).abs());
            cases += 1;
        }
    };
    let sim7 = Dgp::sim7();
    let data = sim7.sample(400, 7).unwrap();
    let fitted = crossfit(&data, make_fold_plan(400, 5, 7).unwrap(), &SplineFitter { cfg: NuisanceConfig::default() }).unwrap();
    check(&data, &Nuisances::CrossFit(fitted), 5.0);
    check(&data, &Nuisances::Shared(oracle_nuisances(&sim7)), 5.0);
    let msm6 = Dgp::msm6();
    let data = msm6.sample(300, 8).unwrap();
    check(&data, &Nuisances::Shared(oracle_nuisances(&msm6)), 2.0);
    // Arbitrary data with deliberately wrong nuisances.
    let mut rng = Lcg(9);
    let (mut x, mut a, mut y) = (vec![], vec![], vec![]);
    for _ in 0..250 {
        x.push(rng.next());
        a.push(3.0 * rng.next());
        y.push(100.0 * rng.next() - 30.0);
    }
    let s = Support::new(0.0, 3.0).unwrap();
    let data = Dataset::new(1, x, a, y, s).unwrap();
    let wrong = NuisancePair::new(
        Arc::new(geodesy_core::model::RegressionFn(|x: &[f64], a: f64| (x[0] * a).sin())),
        Arc::new(DensityFn::new(s, |a, _| 2.0 * a / 9.0)),
        Provenance::Fitted,
    );
    check(&data, &Nuisances::Shared(wrong), 1.5);
    outcome(worst <= 1e-12, format!("max |psi_hat(0) - mean(y)| = {worst:.1e} over {cases} fits"))
}

fn headline_number() -> Outcome {
    let start = Instant::now();
    let dgp = Dgp::sim7();
    let grid = TGrid::new(vec![0.99]).unwrap();
    let nuis = Nuisances::Shared(oracle_nuisances(&dgp));
    let opts = EstimatorOptions { chi_square: false, ..EstimatorOptions::default() };
    let at = |seed: u64| -> (f64, f64) {
        let data = dgp.sample(2000, seed).unwrap();
        let est = |f: Family| {
            let spec = PathSpec::new(f, dgp.support(), 5.0).unwrap();
            parallel::one_step(&data, &spec, &grid, &nuis, &opts).unwrap().curve.iter().next().unwrap().psi_hat
        };
        (est(Family::Wasserstein), est(Family::Hellinger))
    };
    // Seed fixed in advance; the rate over other seeds is printed for context.
    let (w, h) = at(12345);
    let secs = start.elapsed().as_secs_f64();
    let pass = (w - SIM7_LIMIT).abs() < 0.15 && (h - SIM7_LIMIT).abs() < 0.15 && secs < 120.0;
    let seeds = 40;
    let mut hits = (0, 0, 0);
    for s in 1..=seeds {
        let (w, h) = at(s);
        let (wi, hi) = ((w - SIM7_LIMIT).abs() < 0.15, (h - SIM7_LIMIT).abs() < 0.15);
        hits.0 += wi as usize;
        hits.1 += hi as usize;
        hits.2 += (wi && hi) as usize;
    }
    outcome(
        pass,
        format!(
            "seed 12345: W {w:.4}, H {h:.4} (limit {SIM7_LIMIT:.5}) in {secs:.1} s; \
             other seeds within 0.15: W {}/{seeds}, H {}/{seeds}, both {}/{seeds}",
            hits.0, hits.1, hits.2
        ),
    )
}

fn coverage_reproduction() -> Outcome {
    let start = Instant::now();
    let dgp = Dgp::sim7();
    let families = vec![Family::Wasserstein, Family::ExpTilt, Family::Hellinger];
    let grid = make_tgrid(0.95, 0.05).unwrap();
    let mut cfg = CoverageConfig::new(dgp, families.clone(), 250, 300, 0);
    cfg.folds = 5;
    cfg.mode = NuisanceMode::OraclePiFittedMu;
    let cache = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-truth");
    let truths: Vec<_> = families
        .iter()
        .map(|&f| cached_truth(&dgp, &cfg.spec(f).unwrap(), &grid, 100_000, 0, Some(&cache)).unwrap())
        .collect();
    let report = parallel::coverage(&cfg, &grid, &truths).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let near = |t: f64, v: f64| (t - v).abs() < 1e-9;
    let mut pass = secs < 900.0;
    let mut lines = Vec::new();
    for &f in &families {
        let cov: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| [0.1, 0.2, 0.3, 0.4, 0.5].iter().any(|&t| near(r.t, t)))
            .map(|r| r.get(f).unwrap().coverage)
            .collect();
        let widths: Vec<f64> =
            report.rows.iter().filter(|r| r.t > 0.5 - 1e-9).map(|r| r.get(f).unwrap().width).collect();
        let cov_ok = cov.iter().all(|c| (0.90..=0.99).contains(c));
        let width_ok = widths.windows(2).all(|w| w[1] > w[0]);
        pass &= cov_ok && width_ok;
        let fmt = |v: &[f64], p: usize| v.iter().map(|c| format!("{c:.p$}")).collect::<Vec<_>>().join(" ");
        lines.push(format!(
            "      {}: coverage t=0.1..0.5 [{}] {}; width t=0.5..0.95 [{}] {}",
            f.label(),
            fmt(&cov, 3),
            if cov_ok { "ok" } else { "out of [0.90, 0.99]" },
            fmt(&widths, 2),
            if width_ok { "increasing" } else { "not increasing" }
        ));
    }
    outcome(
        pass,
        format!("{} replications ok, {} failed, {secs:.0} s\n{}", report.succeeded, report.failed, lines.join("\n")),
    )
}

fn chi_square_explosion() -> Outcome {
    let dgp = Dgp::msm6();
    let spec = PathSpec::new(Family::Wasserstein, dgp.support(), 2.0).unwrap();
    let grid = TGrid::new(vec![0.5, 0.99]).unwrap();
    let prof = chi_sq_profile(&dgp, &spec, &grid, 2000, 10).unwrap();
    let ratio = prof[1] / prof[0];
    outcome(ratio > 100.0, format!("E chi2 at 0.5 = {:.3}, at 0.99 = {:.1}, ratio {ratio:.0}", prof[0], prof[1]))
}

fn msm_exactness() -> Outcome {
    let support = Dgp::msm6().support();
    let basis = Basis::Custom(vec![("a".to_string(), Arc::new(|a: f64| a) as Arc<dyn Fn(f64) -> f64 + Send + Sync>)]);
    let model = MsmModel::new(basis, support, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let beta = fit_beta(|a, s| a * s, &model, k as f64 / 10.0).unwrap();
        worst = worst.max((beta[0] - 1.0).abs());
    }
    let dgp = Dgp::msm6();
    let n = 2000;
    let data = dgp.sample(n, 61).unwrap();
    let nodes = SurfaceNodes::default_for(dgp.support(), 0.3).unwrap();
    let model = MsmModel::new(Basis::Poly(2), dgp.support(), data.mean_y()).unwrap();
    let opts = EstimatorOptions::default();
    let psi_star = |nuis: &Nuisances| {
        let est = estimate_surface(&data, nuis, &nodes, &opts).unwrap();
        fit_surface(&model, &est).unwrap().psi_star(2.0).unwrap()
    };
    // True treatment density with a cross-fitted outcome regression.
    let pi = oracle_nuisances(&dgp).pi;
    let plan = || make_fold_plan(n, 5, 61).unwrap();
    let cf = crossfit(&data, plan(), &OutcomeFitter { cfg: NuisanceConfig::default(), pi }).unwrap();
    let psi = psi_star(&Nuisances::CrossFit(cf));
    let all = crossfit(&data, plan(), &SplineFitter { cfg: NuisanceConfig::default() }).unwrap();
    let psi_fitted = psi_star(&Nuisances::CrossFit(all));
    outcome(
        worst < 1e-8 && (1.9..=2.1).contains(&psi),
        format!(
            "exact surface max |beta - 1| = {worst:.1e}; msm6 psi*(0.3) = {psi:.4} (true pi, fitted mu); \
             both fitted (informational) {psi_fitted:.4}"
        ),
    )
}

fn perturbed(dgp: &Dgp, c_pi: f64, c_mu: f64) -> NuisancePair {
    let truth = oracle_nuisances(dgp);
    let e = QuadratureEngine::default();
    let pi = PerturbedDensity::new(truth.pi.clone(), c_pi, |a: f64, x: &[f64]| (0.7 * a + x[0]).sin(), &e);
    let mu = PerturbedOutcome::new(truth.mu.clone(), c_mu, |x: &[f64], a: f64| (0.5 * a - x[1]).cos());
    NuisancePair::new(Arc::new(mu), Arc::new(pi), Provenance::Fitted)
}

fn second_order_remainder() -> Outcome {
    let dgp = Dgp::sim7();
    let truth = oracle_nuisances(&dgp);
    let xs = dgp.sample_covariates(100, 11);
    let spec = PathSpec::new(Family::Wasserstein, dgp.support(), 5.0).unwrap();
    let e = QuadratureEngine::default();
    let r = |cp: f64, cm: f64| remainder_diagnostic(&truth, &perturbed(&dgp, cp, cm), &spec, 0.5, &xs, 2, &e).unwrap();
    let exact = [r(0.0, 0.3), r(0.3, 0.0), r(0.0, 0.0)];
    let exact_ok = exact.iter().all(|v| v.abs() < 1e-6);
    let vals: Vec<f64> = [0.4, 0.2, 0.1, 0.05].iter().map(|&c| r(c, c)).collect();
    let ratios: Vec<f64> = vals.windows(2).map(|w| w[0] / w[1]).collect();
    let ratio_ok = ratios.iter().all(|q| (2.5..=6.0).contains(q));
    outcome(
        exact_ok && ratio_ok,
        format!(
            "ratios R2(c)/R2(c/2) for c = 0.4, 0.2, 0.1: {}; one nuisance exact: max |R2| = {:.1e}",
            ratios.iter().map(|q| format!("{q:.3}")).collect::<Vec<_>>().join(", "),
            exact.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        ),
    )
}

fn ratio_error_bound() -> Outcome {
    let e = QuadratureEngine::default();
    let quad = e.piecewise(&uniform_breaks(-9.0, 9.0, 72));
    let gauss = |a: f64, m: f64, s: f64| normal_pdf((a - m) / s) / s;
    let mut rng = Lcg(12);
    let (mut held, mut min_ratio) = (0, f64::INFINITY);
    for _ in 0..100 {
        let t = 0.05 + 0.9 * rng.next();
        let a_star = -1.5 + 3.0 * rng.next();
        let (b0, b1, s) = (rng.next() - 0.5, 1.5 * rng.next(), 0.5 + rng.next());
        let (db0, db1, ks) = (0.6 * (rng.next() - 0.5), 0.6 * (rng.next() - 0.5), 0.7 + 0.6 * rng.next());
        let xs: Vec<f64> = (0..20).map(|_| 2.0 * rng.next() - 1.0).collect();
        let m = move |x: &[f64]| b0 + b1 * x[0];
        let mh = move |x: &[f64]| b0 + db0 + (b1 + db1) * x[0];
        let sh = s * ks;
        let push = move |mean: f64| (1.0 - t) * mean + t * a_star;
        let r = ratio_error_lower_bound_check(
            |a, x| gauss(a, m(x), s),
            |a, x| gauss(a, push(m(x)), (1.0 - t) * s),
            |a, x| gauss(a, mh(x), sh),
            |a, x| gauss(a, push(mh(x)), (1.0 - t) * sh),
            &xs,
            1,
            &quad,
        );
        held += r.holds() as usize;
        if r.rhs > 0.0 {
            min_ratio = min_ratio.min(r.lhs / r.rhs);
        }
    }
    outcome(held == 100, format!("lhs >= rhs in {held}/100 trials; smallest lhs/rhs {min_ratio:.3}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, tag: &str| -> Vec<u8> {
        let out = dir.path().join(format!("sim-{tag}.csv"));
        let cache = dir.path().join(format!("cache-{tag}"));
        let status = Command::new(env!("CARGO_BIN_EXE_geodesy"))
            .args(["simulate", "--n", "150", "--reps", "8", "--families", "all", "--t-step", "0.25", "--t-max", "0.75"])
            .args(["--truth-mc", "2000", "--seed", "2718", "--threads", threads])
            .arg("--cache-dir")
            .arg(&cache)
            .arg("--out")
            .arg(&out)
            .status()
            .expect("binary runs");
        assert!(status.success(), "simulate failed at {threads} threads");
        std::fs::read(&out).unwrap()
    };
    let outs = [run("1", "a"), run("1", "b"), run("8", "c"), run("8", "d")];
    let same = outs.iter().all(|o| *o == outs[0]);
    outcome(same, format!("4 runs (threads 1, 1, 8, 8), {} bytes each, identical: {same}", outs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("density validity, four families", density_validity),
        ("Wasserstein push-forward law (KS)", push_forward_law),
        ("closed-form Hellinger affinity", affinity_closed_form),
        ("closed-form theta derivative", dtheta_closed_form),
        ("EIF mean zero at the truth", eif_mean_zero),
        ("psi_hat(0) equals the outcome mean", endpoint_identity),
        ("sim7 curves at t = 0.99, n = 2000", headline_number),
        ("coverage at desk scale", coverage_reproduction),
        ("chi-square explosion near t = 1", chi_square_explosion),
        ("MSM exactness and msm6 extrapolation", msm_exactness),
        ("second-order remainder", second_order_remainder),
        ("ratio-error lower bound", ratio_error_bound),
        ("simulate determinism across threads", determinism),
    ];
    let only: Option<Vec<usize>> = std::env::var("GEODESY_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|k| k.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} [{id:2}] {name}: {} ({:.1} s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} of {ran} criteria passed; failed: {failed:?}", ran - failed.len());
    if !failed.is_empty() && std::env::var("GEODESY_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
