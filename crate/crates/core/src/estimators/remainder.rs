//! Second-order remainder of the one-step expansion.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::eif::RowContext;
use crate::data::{Observation, Support};
use crate::error::{Error, Result};
use crate::model::{ConditionalDensity, OutcomeRegression};
use crate::nuisance::NuisancePair;
use crate::paths::{PathAt, PathSpec, DENSITY_FLOOR};
use crate::quadrature::{Quadrature, QuadratureEngine};
use crate::stats;

/// `normalize(pi (1 + c h))`, with the factor clamped at zero.
pub struct PerturbedDensity<H> {
    base: Arc<dyn ConditionalDensity>,
    c: f64,
    h: H,
    rule: Quadrature,
}

impl<H: Fn(f64, &[f64]) -> f64 + Send + Sync> PerturbedDensity<H> {
    pub fn new(base: Arc<dyn ConditionalDensity>, c: f64, h: H, engine: &QuadratureEngine) -> Self {
        let s = base.support();
        let rule = engine.over(s.lo(), s.hi());
        Self { base, c, h, rule }
    }

    fn factor(&self, a: f64, x: &[f64]) -> f64 {
        (1.0 + self.c * (self.h)(a, x)).max(0.0)
    }

    fn norm(&self, x: &[f64]) -> f64 {
        let mut p = vec![0.0; self.rule.len()];
        self.base.density_many(x, self.rule.nodes(), &mut p);
        let vals: Vec<f64> = self.rule.nodes().iter().zip(&p).map(|(&a, &pa)| pa * self.factor(a, x)).collect();
        self.rule.dot(&vals)
    }
}

impl<H: Fn(f64, &[f64]) -> f64 + Send + Sync> ConditionalDensity for PerturbedDensity<H> {
    fn support(&self) -> Support {
        self.base.support()
    }

    fn density(&self, a: f64, x: &[f64]) -> f64 {
        let p = self.base.density(a, x);
        if p == 0.0 {
            return 0.0;
        }
        p * self.factor(a, x) / self.norm(x)
    }

    fn density_many(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        self.base.density_many(x, a, out);
        let inv = 1.0 / self.norm(x);
        for (o, &ai) in out.iter_mut().zip(a) {
            *o *= self.factor(ai, x) * inv;
        }
    }
}

/// `mu + c g`.
pub struct PerturbedOutcome<G> {
    base: Arc<dyn OutcomeRegression>,
    c: f64,
    g: G,
}

impl<G: Fn(&[f64], f64) -> f64 + Send + Sync> PerturbedOutcome<G> {
    pub fn new(base: Arc<dyn OutcomeRegression>, c: f64, g: G) -> Self {
        Self { base, c, g }
    }
}

impl<G: Fn(&[f64], f64) -> f64 + Send + Sync> OutcomeRegression for PerturbedOutcome<G> {
    fn mean(&self, x: &[f64], a: f64) -> f64 {
        self.base.mean(x, a) + self.c * (self.g)(x, a)
    }
}

/// `R2 = psi(P_hat) - psi(P) + E_P[phi(Z; P_hat)]` over the covariate sample `xs`
/// (row-major, `d` columns).
///
/// The influence function is affine in `Y`, so its conditional mean given `(x, a)`
/// is its value at `Y = mu(x, a)`; the integral over `a` uses the true density.
pub fn remainder_diagnostic(
    truth: &NuisancePair,
    estimate: &NuisancePair,
    spec: &PathSpec,
    t: f64,
    xs: &[f64],
    d: usize,
    engine: &QuadratureEngine,
) -> Result<f64> {
    if d == 0 || xs.len() % d != 0 || xs.is_empty() {
        return Err(Error::Shape("covariate sample must be a nonempty multiple of d".into()));
    }
    let mut per_x = Vec::with_capacity(xs.len() / d);
    for x in xs.chunks(d) {
        let true_path = PathAt::new(spec, &*truth.pi, x, t, engine)?;
        let est_path = PathAt::new(spec, &*estimate.pi, x, t, engine)?;
        let psi_true = true_path.expect(engine, |a, _| truth.mu.mean(x, a));
        let mut breaks = true_path.breaks();
        breaks.extend(est_path.breaks());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let rule = engine.piecewise_fine(&breaks);
        let ctx = RowContext::new(spec, estimate, x, t, engine, None)?;
        let cache = estimate.pi.row_cache(x);
        let mut p = vec![0.0; rule.len()];
        truth.pi.density_many(x, rule.nodes(), &mut p);
        let mut acc = 0.0;
        for ((&a, &w), &pa) in rule.nodes().iter().zip(rule.weights()).zip(&p) {
            if pa > 0.0 {
                let z = Observation { x, a, y: truth.mu.mean(x, a) };
                acc += w * pa * ctx.eif(spec, estimate, t, &z, DENSITY_FLOOR, &cache).value;
            }
        }
        per_x.push(acc - psi_true);
    }
    Ok(stats::mean(&per_x))
}
