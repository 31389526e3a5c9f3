//! Cross-fit one-step estimators and the plug-in curve.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::eif::{HellingerMoments, RowContext};
use crate::curve::{EffectCurve, EffectPoint};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grid::TGrid;
use crate::nuisance::Nuisances;
use crate::paths::{Family, PathAt, PathSpec, DENSITY_FLOOR};
use crate::quadrature::QuadratureEngine;
use crate::stats;

/// Numerical settings shared by the estimators.
#[derive(Debug, Clone)]
pub struct EstimatorOptions {
    pub engine: QuadratureEngine,
    pub floor: f64,
    /// Compute the chi-square diagnostic for every `(i, t)`.
    pub chi_square: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { engine: QuadratureEngine::default(), floor: DENSITY_FLOOR, chi_square: true }
    }
}

/// Curve with sample size, fold count and the fraction of floored `(i, t)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub curve: EffectCurve,
    pub n: usize,
    pub folds: usize,
    pub clipping_rate: f64,
}

/// Uncentered influence-function values of one observation across the t-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RowEif {
    pub values: Vec<f64>,
    pub clipped: Vec<bool>,
    /// Chi-square divergence per t; zeros when the diagnostic is off.
    pub chi_sq: Vec<f64>,
}

fn check_family(spec: &PathSpec) -> Result<()> {
    spec.validate()?;
    if !spec.family.has_eif() {
        return Err(Error::Unsupported(
            "one-step inference is not available for the reflected tilt; use the plug-in curve".into(),
        ));
    }
    Ok(())
}

/// Influence-function values for `rows`, each with its own cross-fit pair.
///
/// Rows are independent, so callers may split the range and concatenate in order.
pub fn eif_rows(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    opts: &EstimatorOptions,
    rows: Range<usize>,
) -> Result<Vec<RowEif>> {
    check_family(spec)?;
    if rows.end > data.n() {
        return Err(Error::Shape("row range exceeds the data".into()));
    }
    let ts = tgrid.values();
    let mut out = Vec::with_capacity(rows.len());
    for i in rows {
        let z = data.obs(i);
        let pair = nuis.pair_for(i);
        let moments = match spec.family {
            Family::Hellinger => {
                let target = spec.target()?;
                Some(HellingerMoments::compute(&*pair.mu, &*pair.pi, &target, z.x, &opts.engine))
            }
            _ => None,
        };
        let cache = pair.pi.row_cache(z.x);
        let mut row = RowEif {
            values: vec![0.0; ts.len()],
            clipped: vec![false; ts.len()],
            chi_sq: vec![0.0; ts.len()],
        };
        for (k, &t) in ts.iter().enumerate() {
            let ctx = RowContext::new(spec, pair, z.x, t, &opts.engine, moments.as_ref())?;
            let rec = ctx.eif(spec, pair, t, &z, opts.floor, &cache);
            row.values[k] = rec.value;
            row.clipped[k] = rec.clipped;
            if opts.chi_square && t > 0.0 {
                let path = match moments {
                    Some(m) => PathAt::hellinger_with_affinity(spec, &*pair.pi, z.x, t, m.u)?,
                    None => PathAt::new(spec, &*pair.pi, z.x, t, &opts.engine)?,
                };
                row.chi_sq[k] = path.chi_square(&opts.engine, opts.floor).value;
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Reduces per-row values to the curve: `psi = mean`, `se = sd / sqrt(n)` with the
/// population standard deviation of the centered values.
pub fn summarize(tgrid: &TGrid, rows: &[RowEif], folds: usize) -> Result<EstimateResult> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Shape("no observations".into()));
    }
    let mut curve = Vec::with_capacity(tgrid.len());
    let mut column = vec![0.0; n];
    let mut clipped = 0usize;
    for (k, &t) in tgrid.values().iter().enumerate() {
        for (c, r) in column.iter_mut().zip(rows) {
            *c = r.values[k];
            clipped += r.clipped[k] as usize;
        }
        let (psi, sd) = stats::mean_sd(&column);
        if !psi.is_finite() || !sd.is_finite() {
            return Err(Error::NonFinite { row: 0, column: "eif".into() });
        }
        for (c, r) in column.iter_mut().zip(rows) {
            *c = r.chi_sq[k];
        }
        let chi = if column.iter().any(|v| v.is_infinite()) { f64::INFINITY } else { stats::mean(&column) };
        curve.push(EffectPoint::wald(t, psi, sd / libm::sqrt(n as f64), chi));
    }
    Ok(EstimateResult {
        curve,
        n,
        folds,
        clipping_rate: clipped as f64 / (n * tgrid.len()) as f64,
    })
}

/// One-step estimate for the family in `spec`.
pub fn one_step(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    let rows = eif_rows(data, spec, tgrid, nuis, opts, 0..data.n())?;
    summarize(tgrid, &rows, nuis.folds())
}

pub fn one_step_wasserstein(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    one_step(data, &spec.with_family(Family::Wasserstein)?, tgrid, nuis, opts)
}

pub fn one_step_hellinger(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    one_step(data, &spec.with_family(Family::Hellinger)?, tgrid, nuis, opts)
}

/// Exponential tilt with `delta = t / (1 - t)` toward the upper end of the support.
pub fn one_step_exp_tilt(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    one_step(data, &spec.with_family(Family::ExpTilt)?, tgrid, nuis, opts)
}

/// Plug-in values `E_{rho_t}[mu | X_i]` for `rows` across the grid.
pub fn plug_in_rows(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    engine: &QuadratureEngine,
    rows: Range<usize>,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(rows.len());
    for i in rows {
        let x = data.x_row(i);
        let pair = nuis.pair_for(i);
        let mut vals = Vec::with_capacity(tgrid.len());
        for &t in tgrid.values() {
            let path = PathAt::new(spec, &*pair.pi, x, t, engine)?;
            vals.push(path.expect(engine, |a, _| pair.mu.mean(x, a)));
        }
        out.push(vals);
    }
    Ok(out)
}

/// Plug-in curve `mean_i integral mu(X_i, a) rho_t(a | X_i) da`, without correction
/// or standard errors. Valid for every family.
pub fn plug_in(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    engine: &QuadratureEngine,
) -> Result<EffectCurve> {
    let rows = plug_in_rows(data, spec, tgrid, nuis, engine, 0..data.n())?;
    Ok(plug_in_curve(tgrid, &rows))
}

pub fn plug_in_curve(tgrid: &TGrid, rows: &[Vec<f64>]) -> EffectCurve {
    let mut column = vec![0.0; rows.len()];
    tgrid
        .values()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            for (c, r) in column.iter_mut().zip(rows) {
                *c = r[k];
            }
            let psi = stats::mean(&column);
            EffectPoint { t, psi_hat: psi, se: 0.0, ci_lo: psi, ci_hi: psi, chi_sq: 0.0 }
        })
        .collect()
}
