//! Simulation designs with closed-form nuisance functions.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{Dataset, Support};
use crate::error::{Error, Result};
use crate::model::{ConditionalDensity, OutcomeRegression};
use crate::paths::{truncated_normal_affinity, GaussianTarget};
use crate::seed::{stream_rng, uniform_open};
use crate::special::{
    normal_interval, normal_pdf, normal_quantile, truncated_normal_inverse,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpName {
    /// X1, X2 ~ Exp(1); A | X ~ N(X1 + X2, 1) on [-1, 5]; Y = A + S e^{-A S} + N(0, 1), S = X1 + X2.
    Sim7,
    /// X ~ U[-3, 3]; A | X ~ N(X, 1) on [-6, 6]; Y = X + A + N(0, 1).
    Msm6,
    /// X, A ~ U[0, 1] independent; Y = 1.
    Constant,
}

impl DgpName {
    pub fn name(self) -> &'static str {
        match self {
            DgpName::Sim7 => "sim7",
            DgpName::Msm6 => "msm6",
            DgpName::Constant => "constant",
        }
    }
}

impl fmt::Display for DgpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DgpName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim7" => Ok(DgpName::Sim7),
            "msm6" => Ok(DgpName::Msm6),
            "constant" => Ok(DgpName::Constant),
            other => Err(Error::arg(alloc::format!("unknown dgp `{other}`"))),
        }
    }
}

/// A data-generating process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dgp {
    name: DgpName,
    support: Support,
}

impl Dgp {
    pub fn new(name: DgpName) -> Self {
        let (lo, hi) = match name {
            DgpName::Sim7 => (-1.0, 5.0),
            DgpName::Msm6 => (-6.0, 6.0),
            DgpName::Constant => (0.0, 1.0),
        };
        Self { name, support: Support::new(lo, hi).expect("static support") }
    }

    pub fn sim7() -> Self {
        Self::new(DgpName::Sim7)
    }

    pub fn msm6() -> Self {
        Self::new(DgpName::Msm6)
    }

    pub fn constant() -> Self {
        Self::new(DgpName::Constant)
    }

    pub fn name(&self) -> DgpName {
        self.name
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// Number of covariates.
    pub fn d(&self) -> usize {
        match self.name {
            DgpName::Sim7 => 2,
            DgpName::Msm6 | DgpName::Constant => 1,
        }
    }

    /// Target exposure used by default.
    pub fn default_a_star(&self) -> f64 {
        match self.name {
            DgpName::Sim7 => 5.0,
            DgpName::Msm6 => 2.0,
            DgpName::Constant => 1.0,
        }
    }

    pub fn outcome_mean(&self, x: &[f64], a: f64) -> f64 {
        match self.name {
            DgpName::Sim7 => {
                let s = x[0] + x[1];
                a + s * libm::exp(-a * s)
            }
            DgpName::Msm6 => x[0] + a,
            DgpName::Constant => 1.0,
        }
    }

    pub fn treatment_density(&self) -> OracleDensity {
        match self.name {
            DgpName::Sim7 => OracleDensity::TruncatedNormal {
                support: self.support,
                sd: 1.0,
                location: sum_location,
            },
            DgpName::Msm6 => OracleDensity::TruncatedNormal {
                support: self.support,
                sd: 1.0,
                location: first_location,
            },
            DgpName::Constant => OracleDensity::Uniform { support: self.support },
        }
    }

    pub fn outcome_regression(&self) -> OracleOutcome {
        OracleOutcome { dgp: *self }
    }

    /// Population dose response E[Y(a)] when known in closed form.
    pub fn dose_response(&self, a: f64) -> Option<f64> {
        match self.name {
            DgpName::Sim7 => Some(true_dose_response_sim7(a)),
            // E[X] = 0
            DgpName::Msm6 => Some(a),
            DgpName::Constant => Some(1.0),
        }
    }

    fn draw_x<R: rand_core::RngCore>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self.name {
            DgpName::Sim7 => {
                out.push(-libm::log(uniform_open(rng)));
                out.push(-libm::log(uniform_open(rng)));
            }
            DgpName::Msm6 => out.push(-3.0 + 6.0 * uniform_open(rng)),
            DgpName::Constant => out.push(uniform_open(rng)),
        }
    }

    /// Covariate rows only, row-major.
    pub fn sample_covariates(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, crate::seed::STREAM_COVARIATES);
        let mut x = Vec::with_capacity(n * self.d());
        for _ in 0..n {
            self.draw_x(&mut rng, &mut x);
        }
        x
    }

    /// Full sample; every row draws its uniforms in a fixed order (x, a, noise).
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::arg("n must be at least 1"));
        }
        let mut rng = stream_rng(seed, 0);
        let d = self.d();
        let (mut x, mut a, mut y) =
            (Vec::with_capacity(n * d), Vec::with_capacity(n), Vec::with_capacity(n));
        let (lo, hi) = (self.support.lo(), self.support.hi());
        for i in 0..n {
            self.draw_x(&mut rng, &mut x);
            let xi = &x[i * d..(i + 1) * d];
            let ai = match self.name {
                DgpName::Sim7 => truncated_normal_inverse(uniform_open(&mut rng), xi[0] + xi[1], 1.0, lo, hi),
                DgpName::Msm6 => truncated_normal_inverse(uniform_open(&mut rng), xi[0], 1.0, lo, hi),
                DgpName::Constant => lo + (hi - lo) * uniform_open(&mut rng),
            };
            let noise = match self.name {
                DgpName::Constant => 0.0,
                _ => normal_quantile(uniform_open(&mut rng)),
            };
            a.push(ai);
            y.push(self.outcome_mean(xi, ai) + noise);
        }
        Dataset::new(d, x, a, y, self.support)
    }
}

/// E[Y(a)] = a + 2 / (1 + a)^3 for the sim7 design (requires a > -1).
pub fn true_dose_response_sim7(a: f64) -> f64 {
    a + 2.0 / ((1.0 + a) * (1.0 + a) * (1.0 + a))
}

fn sum_location(x: &[f64]) -> f64 {
    x[0] + x[1]
}

fn first_location(x: &[f64]) -> f64 {
    x[0]
}

/// Closed-form treatment densities of the designs.
#[derive(Debug, Clone, Copy)]
pub enum OracleDensity {
    TruncatedNormal { support: Support, sd: f64, location: fn(&[f64]) -> f64 },
    Uniform { support: Support },
}

impl OracleDensity {
    /// Truncated normal with a location given by `location(x)`.
    pub fn truncated_normal(support: Support, sd: f64, location: fn(&[f64]) -> f64) -> Self {
        OracleDensity::TruncatedNormal { support, sd, location }
    }

    /// Conditional mean parameter of the untruncated normal, if any.
    pub fn location(&self, x: &[f64]) -> Option<f64> {
        match self {
            OracleDensity::TruncatedNormal { location, .. } => Some(location(x)),
            OracleDensity::Uniform { .. } => None,
        }
    }
}

impl ConditionalDensity for OracleDensity {
    fn support(&self) -> Support {
        match *self {
            OracleDensity::TruncatedNormal { support, .. } | OracleDensity::Uniform { support } => {
                support
            }
        }
    }

    fn density(&self, a: f64, x: &[f64]) -> f64 {
        let s = self.support();
        if !s.contains(a) {
            return 0.0;
        }
        match *self {
            OracleDensity::TruncatedNormal { sd, location, .. } => {
                let m = location(x);
                let mass = normal_interval((s.lo() - m) / sd, (s.hi() - m) / sd);
                normal_pdf((a - m) / sd) / (sd * mass)
            }
            OracleDensity::Uniform { .. } => 1.0 / s.width(),
        }
    }

    fn density_many(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        let s = self.support();
        match *self {
            OracleDensity::TruncatedNormal { sd, location, .. } => {
                let m = location(x);
                let scale = sd * normal_interval((s.lo() - m) / sd, (s.hi() - m) / sd);
                for (o, &ai) in out.iter_mut().zip(a) {
                    *o = if s.contains(ai) { normal_pdf((ai - m) / sd) / scale } else { 0.0 };
                }
            }
            OracleDensity::Uniform { .. } => {
                for (o, &ai) in out.iter_mut().zip(a) {
                    *o = if s.contains(ai) { 1.0 / s.width() } else { 0.0 };
                }
            }
        }
    }

    fn affinity(&self, x: &[f64], target: &GaussianTarget) -> Option<f64> {
        if target.support() != self.support() {
            return None;
        }
        match *self {
            OracleDensity::TruncatedNormal { sd, location, .. } => {
                Some(truncated_normal_affinity(location(x), sd, target))
            }
            OracleDensity::Uniform { support } => {
                // sqrt(q) is a Gaussian kernel of scale sqrt(2) eps
                let eps = target.sd();
                let s2 = core::f64::consts::SQRT_2 * eps;
                let window = normal_interval(
                    (support.lo() - target.center()) / s2,
                    (support.hi() - target.center()) / s2,
                );
                let kernel = libm::sqrt(2.0 * libm::sqrt(2.0 * core::f64::consts::PI) * eps);
                let v = kernel * window / libm::sqrt(support.width() * target.mass());
                Some(v.clamp(0.0, 1.0))
            }
        }
    }
}

/// Closed-form outcome regression of a design.
#[derive(Debug, Clone, Copy)]
pub struct OracleOutcome {
    dgp: Dgp,
}

impl OutcomeRegression for OracleOutcome {
    fn mean(&self, x: &[f64], a: f64) -> f64 {
        self.dgp.outcome_mean(x, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureEngine;
    use crate::special::truncated_normal_mean;

    #[test]
    fn dose_response_examples() {
        assert!((true_dose_response_sim7(5.0) - (5.0 + 2.0 / 216.0)).abs() < 1e-15);
        assert_eq!(true_dose_response_sim7(0.0), 2.0);
    }

    #[test]
    fn sim7_sample_respects_support_and_mean() {
        let dgp = Dgp::sim7();
        let ds = dgp.sample(100_000, 11).unwrap();
        assert!(ds.a().iter().all(|&a| (-1.0..=5.0).contains(&a)));
        // E[A] = E[truncated-normal mean given X]
        let mut cond = 0.0;
        for i in 0..ds.n() {
            let x = ds.x_row(i);
            cond += truncated_normal_mean(x[0] + x[1], 1.0, -1.0, 5.0);
        }
        cond /= ds.n() as f64;
        let (m, sd) = crate::stats::mean_sd(ds.a());
        assert!((m - cond).abs() < 3.0 * sd / (ds.n() as f64).sqrt());
        let resid: Vec<f64> =
            (0..ds.n()).map(|i| ds.y()[i] - dgp.outcome_mean(ds.x_row(i), ds.a()[i])).collect();
        let (rm, rsd) = crate::stats::mean_sd(&resid);
        assert!(rm.abs() < 3.0 * rsd / (ds.n() as f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = Dgp::sim7().sample(50, 3).unwrap();
        let b = Dgp::sim7().sample(50, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Dgp::sim7().sample(50, 4).unwrap());
    }

    #[test]
    fn oracle_formulas_at_points() {
        let dgp = Dgp::sim7();
        let pi = dgp.treatment_density();
        for (x, a) in [([0.1f64, 0.2], 0.0f64), ([1.0, 0.5], 2.0), ([2.0, 2.0], 4.5), ([0.0, 0.0], -1.0), ([3.0, 1.0], 5.0)] {
            let s = x[0] + x[1];
            let mu = a + s * (-a * s).exp();
            assert!((dgp.outcome_mean(&x, a) - mu).abs() < 1e-15);
            let n = statrs::distribution::Normal::new(s, 1.0).unwrap();
            use statrs::distribution::{Continuous, ContinuousCDF};
            let p = n.pdf(a) / (n.cdf(5.0) - n.cdf(-1.0));
            assert!((pi.density(a, &x) - p).abs() < 1e-9 * p.max(1.0));
        }
        let m6 = Dgp::msm6();
        for (x, a) in [(-3.0, 0.0), (-1.0, 1.0), (0.0, 0.0), (1.5, -2.0), (3.0, 6.0)] {
            assert_eq!(m6.outcome_mean(&[x], a), x + a);
        }
        let c = Dgp::constant();
        let pc = c.treatment_density();
        for a in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert_eq!(pc.density(a, &[0.3]), 1.0);
            assert_eq!(c.outcome_mean(&[0.3], a), 1.0);
        }
    }

    #[test]
    fn uniform_affinity_matches_quadrature() {
        let pc = Dgp::constant().treatment_density();
        let s = pc.support();
        let e = QuadratureEngine::default();
        for (c, eps) in [(0.5, 0.05), (1.0, 0.05), (0.2, 0.2)] {
            let t = GaussianTarget::new(c, eps, s).unwrap();
            let closed = pc.affinity(&[0.0], &t).unwrap();
            let q = e.piecewise(&t.breaks());
            let num = q.integrate(|a| (pc.density(a, &[0.0]) * t.density(a)).sqrt());
            assert!((closed - num).abs() < 1e-10, "{closed} {num}");
        }
    }
}
