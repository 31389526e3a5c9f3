//! Location–scale conditional density with a kernel estimate of the residual law.

use alloc::vec::Vec;

use super::spline::{SplineConfig, SplineRegression};
use crate::data::{Dataset, Support};
use crate::error::{Error, Result};
use crate::model::{ConditionalDensity, RowCache};
use crate::special::{normal_interval, INV_SQRT_2PI};

/// Kernel contributions beyond this many bandwidths are dropped.
const KERNEL_WINDOW: f64 = 10.0;

/// Grid points per bandwidth of the tabulated residual density.
const TABLE_DENSITY: f64 = 64.0;

/// Smallest training size accepted by the density fit.
pub const MIN_DENSITY_ROWS: usize = 50;

/// Bandwidth of the residual kernel estimate, on the standardized scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// 0.9 min(sd, IQR / 1.34) m^(-1/5).
    Silverman,
    Fixed(f64),
}

/// `A = g(X) + sigma e`, with `e` drawn from a kernel estimate, truncated to the support.
#[derive(Debug, Clone)]
pub struct LocationScaleDensity {
    location: SplineRegression,
    scale: f64,
    residuals: Vec<f64>,
    bandwidth: f64,
    support: Support,
    table: KdeTable,
}

/// Kernel estimate and its derivative on a uniform grid, for cubic Hermite interpolation.
#[derive(Debug, Clone)]
struct KdeTable {
    start: f64,
    step: f64,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl KdeTable {
    fn build(residuals: &[f64], h: f64) -> Self {
        let start = residuals[0] - KERNEL_WINDOW * h;
        let end = residuals[residuals.len() - 1] + KERNEL_WINDOW * h;
        let step = h / TABLE_DENSITY;
        let m = libm::ceil((end - start) / step) as usize + 1;
        let mut value = Vec::with_capacity(m);
        let mut slope = Vec::with_capacity(m);
        for k in 0..m {
            let (f, d) = kde_direct(residuals, h, start + k as f64 * step);
            value.push(f);
            slope.push(d);
        }
        Self { start, step, value, slope }
    }

    fn eval(&self, z: f64) -> f64 {
        let pos = (z - self.start) / self.step;
        if !(pos >= 0.0) || pos >= (self.value.len() - 1) as f64 {
            return 0.0;
        }
        let k = pos as usize;
        let u = pos - k as f64;
        let (f0, f1) = (self.value[k], self.value[k + 1]);
        let (d0, d1) = (self.slope[k] * self.step, self.slope[k + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * f0
            + (u3 - 2.0 * u2 + u) * d0
            + (-2.0 * u3 + 3.0 * u2) * f1
            + (u3 - u2) * d1;
        v.max(0.0)
    }
}

/// Kernel estimate and its derivative at `z` from sorted residuals.
fn kde_direct(r: &[f64], h: f64, z: f64) -> (f64, f64) {
    let from = r.partition_point(|&e| e < z - KERNEL_WINDOW * h);
    let to = r.partition_point(|&e| e <= z + KERNEL_WINDOW * h);
    let (mut s, mut ds) = (0.0, 0.0);
    for &e in &r[from..to] {
        let u = (z - e) / h;
        let k = libm::exp(-0.5 * u * u);
        s += k;
        ds -= u * k;
    }
    let c = INV_SQRT_2PI / (h * r.len() as f64);
    (s * c, ds * c / h)
}

impl LocationScaleDensity {
    pub fn fit(
        train: &Dataset,
        cfg: &SplineConfig,
        bandwidth: Bandwidth,
        heteroscedastic: bool,
    ) -> Result<Self> {
        if heteroscedastic {
            return Err(Error::Unsupported(
                "covariate-dependent residual scale is not implemented; only the homoscedastic model is available".into(),
            ));
        }
        if train.n() < MIN_DENSITY_ROWS {
            return Err(Error::arg(alloc::format!(
                "density fit needs at least {MIN_DENSITY_ROWS} rows, got {}",
                train.n()
            )));
        }
        let location = SplineRegression::fit_treatment(train, cfg)?;
        let resid: Vec<f64> = (0..train.n())
            .map(|i| train.a()[i] - location.predict(train.x_row(i), 0.0))
            .collect();
        let (_, scale) = crate::stats::mean_sd(&resid);
        if !(scale > 1e-9 * train.support().width()) {
            return Err(Error::DegenerateTreatment { scale });
        }
        let mut residuals: Vec<f64> = resid.iter().map(|r| r / scale).collect();
        residuals.sort_by(f64::total_cmp);
        let h = match bandwidth {
            Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
            Bandwidth::Fixed(_) => return Err(Error::arg("bandwidth must be positive")),
            Bandwidth::Silverman => silverman(&residuals),
        };
        let table = KdeTable::build(&residuals, h);
        Ok(Self { location, scale, residuals, bandwidth: h, support: train.support(), table })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn location(&self, x: &[f64]) -> f64 {
        self.location.predict(x, 0.0)
    }

    /// Kernel estimate of the standardized residual density at `z`, interpolated from
    /// the table (relative error below 1e-9 of the peak).
    fn kde(&self, z: f64) -> f64 {
        self.table.eval(z)
    }

    /// Kernel mass of the support for a row with location `m`.
    fn mass(&self, m: f64) -> f64 {
        let h = self.bandwidth;
        let lo = (self.support.lo() - m) / self.scale;
        let hi = (self.support.hi() - m) / self.scale;
        let mut s = 0.0;
        for &e in &self.residuals {
            s += normal_interval((lo - e) / h, (hi - e) / h);
        }
        s / self.residuals.len() as f64
    }
}

/// Silverman's rule on sorted data.
pub fn silverman(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    let (_, sd) = crate::stats::mean_sd(sorted);
    let q = |p: f64| {
        let pos = p * (m - 1) as f64;
        let k = libm::floor(pos) as usize;
        let f = pos - k as f64;
        if k + 1 < m {
            sorted[k] * (1.0 - f) + sorted[k + 1] * f
        } else {
            sorted[m - 1]
        }
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * libm::pow(m as f64, -0.2)
}

impl ConditionalDensity for LocationScaleDensity {
    fn support(&self) -> Support {
        self.support
    }

    fn density(&self, a: f64, x: &[f64]) -> f64 {
        if !self.support.contains(a) {
            return 0.0;
        }
        let m = self.location(x);
        let z = self.mass(m);
        if !(z > 0.0) {
            return 0.0;
        }
        self.kde((a - m) / self.scale) / (self.scale * z)
    }

    fn row_cache(&self, x: &[f64]) -> RowCache {
        let m = self.location(x);
        RowCache { values: [m, self.mass(m)], valid: true }
    }

    fn density_cached(&self, a: f64, x: &[f64], cache: &RowCache) -> f64 {
        if !cache.valid {
            return self.density(a, x);
        }
        let [m, z] = cache.values;
        if !self.support.contains(a) || !(z > 0.0) {
            return 0.0;
        }
        self.kde((a - m) / self.scale) / (self.scale * z)
    }

    fn density_many(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        let m = self.location(x);
        let z = self.mass(m);
        for (o, &ai) in out.iter_mut().zip(a) {
            *o = if self.support.contains(ai) && z > 0.0 {
                self.kde((ai - m) / self.scale) / (self.scale * z)
            } else {
                0.0
            };
        }
    }
}
