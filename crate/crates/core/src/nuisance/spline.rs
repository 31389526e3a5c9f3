//! Penalized cubic B-spline regression with GCV-selected smoothing.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Support};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::model::OutcomeRegression;

/// Uniform cubic B-spline basis on `[lo, hi]` with `interior` equally spaced knots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSplineBasis {
    lo: f64,
    hi: f64,
    interior: usize,
    h: f64,
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, interior: usize) -> Self {
        let h = (hi - lo) / (interior + 1) as f64;
        Self { lo, hi, interior, h }
    }

    pub fn len(&self) -> usize {
        self.interior + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First nonzero index and the four nonzero values at `v` (clamped to the range).
    #[inline]
    pub fn eval(&self, v: f64) -> (usize, [f64; 4]) {
        let v = v.clamp(self.lo, self.hi);
        let pos = (v - self.lo) / self.h;
        let seg = (libm::floor(pos) as usize).min(self.interior);
        let u = pos - seg as f64;
        let (u2, u3) = (u * u, u * u * u);
        let w = 1.0 - u;
        (
            seg,
            [
                w * w * w / 6.0,
                (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
                (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
                u3 / 6.0,
            ],
        )
    }
}

/// Second-difference penalty `D2^T D2` of size `m`.
fn second_difference_penalty(m: usize) -> Vec<f64> {
    let mut s = vec![0.0; m * m];
    for r in 0..m.saturating_sub(2) {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(i, a) in &d {
            for &(j, b) in &d {
                s[i * m + j] += a * b;
            }
        }
    }
    s
}

/// Ridge weight added to the penalty of covariate blocks, which are otherwise
/// collinear with the intercept and linear terms.
const BLOCK_RIDGE: f64 = 1.0;

/// Smallest training set accepted by a fit.
const MIN_ROWS: usize = 10;

#[derive(Debug, Clone)]
struct CovariateBlock {
    col: usize,
    mean: f64,
    sd: f64,
    basis: BSplineBasis,
    /// Offset of the block's first column.
    start: usize,
}

/// Column layout of the regression design.
///
/// With an exposure, each covariate enters through the tensor product of its basis with
/// the exposure basis, so its effect may change shape along `a`. Without one, each
/// covariate has a linear column and its spline columns.
#[derive(Debug, Clone)]
struct Design {
    exposure: Option<BSplineBasis>,
    covariates: Vec<CovariateBlock>,
    p: usize,
}

impl Design {
    fn build(data: &Dataset, exposure: Option<Support>, cfg: &SplineConfig) -> Self {
        let exposure = exposure.map(|s| BSplineBasis::new(s.lo(), s.hi(), cfg.exposure_knots));
        // exposure basis (sums to one) or an explicit intercept
        let mut p = exposure.map_or(1, |b| b.len());
        let mut covariates = Vec::new();
        let n = data.n();
        for j in 0..data.d() {
            let col: Vec<f64> = (0..n).map(|i| data.x_row(i)[j]).collect();
            let (mean, sd) = crate::stats::mean_sd(&col);
            if !(sd > 1e-12 * (1.0 + mean.abs())) {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &col {
                let z = (v - mean) / sd;
                lo = lo.min(z);
                hi = hi.max(z);
            }
            let basis = BSplineBasis::new(lo, hi, cfg.covariate_knots);
            let width = match exposure {
                Some(b) => basis.len() * b.len(),
                None => 1 + basis.len(),
            };
            covariates.push(CovariateBlock { col: j, mean, sd, basis, start: p });
            p += width;
        }
        Self { exposure, covariates, p }
    }

    /// Calls `f(column, value)` for every nonzero entry of the design row.
    #[inline]
    fn for_each<F: FnMut(usize, f64)>(&self, x: &[f64], a: f64, mut f: F) {
        match self.exposure {
            Some(eb) => {
                let (sa, va) = eb.eval(a);
                let na = eb.len();
                for k in 0..4 {
                    f(sa + k, va[k]);
                }
                for blk in &self.covariates {
                    let z = (x[blk.col] - blk.mean) / blk.sd;
                    let (sz, vz) = blk.basis.eval(z);
                    for i in 0..4 {
                        let row = blk.start + (sz + i) * na + sa;
                        for k in 0..4 {
                            f(row + k, vz[i] * va[k]);
                        }
                    }
                }
            }
            None => {
                f(0, 1.0);
                for blk in &self.covariates {
                    let z = (x[blk.col] - blk.mean) / blk.sd;
                    f(blk.start, z);
                    let (s, v) = blk.basis.eval(z);
                    for k in 0..4 {
                        f(blk.start + 1 + s + k, v[k]);
                    }
                }
            }
        }
    }

    fn penalty(&self) -> Matrix {
        let mut s = Matrix::zeros(self.p);
        // second differences over `m` coefficients spaced `stride` apart
        let mut put = |start: usize, m: usize, stride: usize| {
            let d = second_difference_penalty(m);
            for i in 0..m {
                for j in 0..m {
                    s[(start + i * stride, start + j * stride)] += d[i * m + j];
                }
            }
        };
        match self.exposure {
            Some(b) => {
                let na = b.len();
                put(0, na, 1);
                for blk in &self.covariates {
                    let nz = blk.basis.len();
                    for iz in 0..nz {
                        put(blk.start + iz * na, na, 1);
                    }
                    for ia in 0..na {
                        put(blk.start + ia, nz, na);
                    }
                }
            }
            None => {
                for blk in &self.covariates {
                    put(blk.start + 1, blk.basis.len(), 1);
                }
            }
        }
        for blk in &self.covariates {
            // the linear column of a treatment regression stays unpenalized
            let cols = match self.exposure {
                Some(b) => blk.start..blk.start + blk.basis.len() * b.len(),
                None => blk.start + 1..blk.start + 1 + blk.basis.len(),
            };
            for c in cols {
                s[(c, c)] += BLOCK_RIDGE;
            }
        }
        s
    }
}

/// Settings of the spline regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineConfig {
    /// Interior knots of the exposure basis.
    pub exposure_knots: usize,
    /// Interior knots of each covariate basis.
    pub covariate_knots: usize,
    /// Candidate smoothing parameters.
    pub ridge_grid: Vec<f64>,
}

impl Default for SplineConfig {
    fn default() -> Self {
        Self { exposure_knots: 8, covariate_knots: 5, ridge_grid: default_ridge_grid() }
    }
}

/// Ten log-spaced values from 1e-6 to 1e3.
pub fn default_ridge_grid() -> Vec<f64> {
    (0..10).map(|k| libm::pow(10.0, -6.0 + k as f64)).collect()
}

/// A fitted penalized spline.
#[derive(Debug, Clone)]
pub struct SplineRegression {
    design: Design,
    coef: Vec<f64>,
    lambda: f64,
    edf: f64,
    gcv: f64,
    /// Grid values skipped because the penalized system was singular.
    skipped: Vec<f64>,
}

impl SplineRegression {
    /// Regression of `y` on `(x, a)`.
    pub fn fit_outcome(train: &Dataset, cfg: &SplineConfig) -> Result<Self> {
        let design = Design::build(train, Some(train.support()), cfg);
        Self::fit(design, train, train.y(), cfg, true)
    }

    /// Regression of `a` on `x` alone.
    pub fn fit_treatment(train: &Dataset, cfg: &SplineConfig) -> Result<Self> {
        let design = Design::build(train, None, cfg);
        Self::fit(design, train, train.a(), cfg, false)
    }

    fn fit(design: Design, data: &Dataset, target: &[f64], cfg: &SplineConfig, with_a: bool) -> Result<Self> {
        let (n, p) = (data.n(), design.p);
        // The penalty keeps the system definite when p > n; GCV still needs edf < n.
        if n < MIN_ROWS {
            return Err(Error::arg(format!("need at least {MIN_ROWS} training rows for a spline fit, got {n}")));
        }
        if cfg.ridge_grid.is_empty() || cfg.ridge_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::arg("ridge grid must hold positive finite values"));
        }
        let nf = n as f64;
        let mut xtx = Matrix::zeros(p);
        let mut xty = vec![0.0; p];
        let mut idx = Vec::with_capacity(64);
        let mut val = Vec::with_capacity(64);
        for i in 0..n {
            idx.clear();
            val.clear();
            let a = if with_a { data.a()[i] } else { 0.0 };
            design.for_each(data.x_row(i), a, |c, v| {
                idx.push(c);
                val.push(v);
            });
            for (r, &ci) in idx.iter().enumerate() {
                xty[ci] += val[r] * target[i] / nf;
                for (s, &cj) in idx.iter().enumerate() {
                    xtx[(ci, cj)] += val[r] * val[s] / nf;
                }
            }
        }
        let penalty = design.penalty();
        let mut grid = cfg.ridge_grid.clone();
        grid.sort_by(f64::total_cmp);
        let mut best: Option<(f64, f64, f64, Vec<f64>)> = None;
        let mut skipped = Vec::new();
        for &lambda in &grid {
            let mut m = xtx.clone();
            for i in 0..p {
                for j in 0..p {
                    m[(i, j)] += lambda * penalty[(i, j)];
                }
            }
            let Some(chol) = Cholesky::new(&m, 1e-13) else {
                skipped.push(lambda);
                continue;
            };
            let coef = chol.solve(&xty);
            // edf = tr((X'X + lambda S)^{-1} X'X)
            let inv = chol.inverse();
            let mut edf = 0.0;
            for i in 0..p {
                for k in 0..p {
                    edf += inv[(i, k)] * xtx[(k, i)];
                }
            }
            if !(edf < nf) {
                skipped.push(lambda);
                continue;
            }
            let mut rss = 0.0;
            for i in 0..n {
                let a = if with_a { data.a()[i] } else { 0.0 };
                let mut fit = 0.0;
                design.for_each(data.x_row(i), a, |c, v| fit += coef[c] * v);
                rss += (target[i] - fit) * (target[i] - fit);
            }
            let gcv = nf * rss / ((nf - edf) * (nf - edf));
            if best.as_ref().map_or(true, |b| gcv < b.1) {
                best = Some((lambda, gcv, edf, coef));
            }
        }
        let Some((lambda, gcv, edf, coef)) = best else {
            return Err(Error::Singular(format!(
                "penalized normal equations are singular for every smoothing value in {grid:?}"
            )));
        };
        Ok(Self { design, coef, lambda, edf, gcv, skipped })
    }

    /// Selected smoothing parameter.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn edf(&self) -> f64 {
        self.edf
    }

    pub fn gcv(&self) -> f64 {
        self.gcv
    }

    /// Grid values rejected as singular.
    pub fn skipped_lambdas(&self) -> &[f64] {
        &self.skipped
    }

    /// Prediction at `(x, a)`; `a` is ignored for treatment regressions.
    #[inline]
    pub fn predict(&self, x: &[f64], a: f64) -> f64 {
        let mut s = 0.0;
        self.design.for_each(x, a, |c, v| s += self.coef[c] * v);
        s
    }
}

impl OutcomeRegression for SplineRegression {
    fn mean(&self, x: &[f64], a: f64) -> f64 {
        self.predict(x, a)
    }
}
