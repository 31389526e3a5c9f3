//! True effect curves and chi-square profiles by Monte Carlo over covariates.

use alloc::vec::Vec;

use super::Dgp;
use crate::error::{Error, Result};
use crate::grid::TGrid;
use crate::model::{ConditionalDensity, OutcomeRegression};
use crate::paths::{tilt_breaks, Family, PathAt, PathSpec, DENSITY_FLOOR};
use crate::quadrature::QuadratureEngine;
use crate::seed::{derive_seed, STREAM_TRUTH};
use crate::stats;

/// `psi(t)` with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruePoint {
    pub t: f64,
    pub psi: f64,
    pub mc_se: f64,
}

/// Covariate sample used by the truth oracles for `seed`.
pub fn truth_covariates(dgp: &Dgp, mc_n: usize, seed: u64) -> Vec<f64> {
    dgp.sample_covariates(mc_n, derive_seed(seed, STREAM_TRUTH))
}

/// `E_{rho_t}[mu | x]` across the grid for one covariate row.
pub fn conditional_effects(
    dgp: &Dgp,
    spec: &PathSpec,
    tgrid: &TGrid,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<Vec<f64>> {
    let pi = dgp.treatment_density();
    let mu = dgp.outcome_regression();
    tgrid
        .values()
        .iter()
        .map(|&t| {
            if spec.family == Family::ExpTilt && t > 0.0 {
                return tilt_effect(&pi, &mu, spec, x, t, engine);
            }
            Ok(PathAt::new(spec, &pi, x, t, engine)?.expect(engine, |a, _| mu.mean(x, a)))
        })
        .collect()
}

/// Exponential tilt mean as a ratio of two integrals taken in one pass of the doubled rule.
fn tilt_effect(
    pi: &dyn ConditionalDensity,
    mu: &dyn OutcomeRegression,
    spec: &PathSpec,
    x: &[f64],
    t: f64,
    engine: &QuadratureEngine,
) -> Result<f64> {
    if t >= 1.0 {
        return Err(Error::ForbiddenEndpoint { t });
    }
    let delta = t / (1.0 - t);
    let (lo, hi) = (spec.support.lo(), spec.support.hi());
    let q = engine.piecewise_fine(&tilt_breaks(lo, hi, hi, delta));
    let mut p = alloc::vec![0.0; q.len()];
    pi.density_many(x, q.nodes(), &mut p);
    let (mut num, mut den) = (0.0, 0.0);
    for ((&a, &w), &pa) in q.nodes().iter().zip(q.weights()).zip(&p) {
        if pa > 0.0 {
            let m = w * pa * libm::exp(delta * (a - hi));
            num += m * mu.mean(x, a);
            den += m;
        }
    }
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::Singular(alloc::format!("tilt normalizer vanished at t = {t}")))
    }
}

/// Averages per-row conditional effects into the curve.
pub fn summarize_truth(tgrid: &TGrid, rows: &[Vec<f64>]) -> Result<Vec<TruePoint>> {
    if rows.is_empty() {
        return Err(Error::arg("the truth needs at least one covariate draw"));
    }
    let n = rows.len() as f64;
    let mut column = alloc::vec![0.0; rows.len()];
    Ok(tgrid
        .values()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            for (c, r) in column.iter_mut().zip(rows) {
                *c = r[k];
            }
            let (psi, sd) = stats::mean_sd(&column);
            TruePoint { t, psi, mc_se: sd / libm::sqrt(n) }
        })
        .collect())
}

/// `psi(t) = E_X[integral mu(X, a) rho_t(a | X) da]` over `mc_n` covariate draws, with
/// quadrature in `a` and the closed-form affinity for the Hellinger path.
pub fn true_effect_curve(
    dgp: &Dgp,
    spec: &PathSpec,
    tgrid: &TGrid,
    mc_n: usize,
    seed: u64,
) -> Result<Vec<TruePoint>> {
    let engine = QuadratureEngine::default();
    let xs = truth_covariates(dgp, mc_n, seed);
    let rows = xs
        .chunks(dgp.d())
        .map(|x| conditional_effects(dgp, spec, tgrid, x, &engine))
        .collect::<Result<Vec<_>>>()?;
    summarize_truth(tgrid, &rows)
}

/// `chi^2(rho_t || pi)` across the grid for one covariate row.
pub fn conditional_chi_square(
    dgp: &Dgp,
    spec: &PathSpec,
    tgrid: &TGrid,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<Vec<f64>> {
    let pi = dgp.treatment_density();
    tgrid
        .values()
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(0.0);
            }
            Ok(PathAt::new(spec, &pi, x, t, engine)?.chi_square(engine, DENSITY_FLOOR).value)
        })
        .collect()
}

/// `E_X[chi^2(rho_t || pi)]`; an infinite entry marks mass placed where pi is floored.
pub fn chi_sq_profile(
    dgp: &Dgp,
    spec: &PathSpec,
    tgrid: &TGrid,
    mc_n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if mc_n == 0 {
        return Err(Error::arg("mc_n must be positive"));
    }
    let engine = QuadratureEngine::default();
    let xs = truth_covariates(dgp, mc_n, seed);
    let rows = xs
        .chunks(dgp.d())
        .map(|x| conditional_chi_square(dgp, spec, tgrid, x, &engine))
        .collect::<Result<Vec<_>>>()?;
    let mut column = alloc::vec![0.0; rows.len()];
    Ok((0..tgrid.len())
        .map(|k| {
            for (c, r) in column.iter_mut().zip(&rows) {
                *c = r[k];
            }
            if column.iter().any(|v| v.is_infinite()) {
                f64::INFINITY
            } else {
                stats::mean(&column)
            }
        })
        .collect())
}
