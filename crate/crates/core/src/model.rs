//! Evaluator traits for the nuisance functions.

use crate::data::Support;
use crate::paths::GaussianTarget;

/// Conditional treatment density pi(a | x) on a declared support.
pub trait ConditionalDensity: Send + Sync {
    fn support(&self) -> Support;

    /// Density at `a`; zero outside the support.
    fn density(&self, a: f64, x: &[f64]) -> f64;

    /// Densities at many exposures for one covariate row.
    fn density_many(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        for (o, &ai) in out.iter_mut().zip(a) {
            *o = self.density(ai, x);
        }
    }

    /// Constants of the row `x` that [`Self::density_cached`] may reuse.
    fn row_cache(&self, _x: &[f64]) -> RowCache {
        RowCache::default()
    }

    /// Density at `a` using constants from [`Self::row_cache`] for the same `x`.
    fn density_cached(&self, a: f64, x: &[f64], _cache: &RowCache) -> f64 {
        self.density(a, x)
    }

    /// Closed-form Bhattacharyya affinity with `target`, if the model has one.
    fn affinity(&self, _x: &[f64], _target: &GaussianTarget) -> Option<f64> {
        None
    }
}

/// Per-row constants of a conditional density, such as its location and normalizer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RowCache {
    pub values: [f64; 2],
    pub valid: bool,
}

/// Outcome regression mu(x, a) = E[Y | X = x, A = a].
pub trait OutcomeRegression: Send + Sync {
    fn mean(&self, x: &[f64], a: f64) -> f64;

    fn mean_many(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        for (o, &ai) in out.iter_mut().zip(a) {
            *o = self.mean(x, ai);
        }
    }
}

/// Density given by a closure `(a, x) -> value`, zeroed outside `support`.
pub struct DensityFn<F> {
    support: Support,
    f: F,
}

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> DensityFn<F> {
    pub fn new(support: Support, f: F) -> Self {
        Self { support, f }
    }
}

impl<F: Fn(f64, &[f64]) -> f64 + Send + Sync> ConditionalDensity for DensityFn<F> {
    fn support(&self) -> Support {
        self.support
    }

    fn density(&self, a: f64, x: &[f64]) -> f64 {
        if self.support.contains(a) {
            (self.f)(a, x)
        } else {
            0.0
        }
    }
}

/// Regression given by a closure `(x, a) -> value`.
pub struct RegressionFn<F>(pub F);

impl<F: Fn(&[f64], f64) -> f64 + Send + Sync> OutcomeRegression for RegressionFn<F> {
    fn mean(&self, x: &[f64], a: f64) -> f64 {
        (self.0)(x, a)
    }
}
