//! Efficient influence functions of the path functionals.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::model::{ConditionalDensity, OutcomeRegression, RowCache};
use crate::nuisance::NuisancePair;
use crate::paths::{
    delta_for, hellinger_coeff_derivatives_over_sin, hellinger_coeffs, Family, GaussianTarget,
    HellingerAngle, PathSpec,
};
use crate::quadrature::{Quadrature, QuadratureEngine};

/// Influence-function value at one observation with its named parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EifRecord {
    pub value: f64,
    pub components: Vec<(&'static str, f64)>,
    /// A density in a ratio denominator was below the floor.
    pub clipped: bool,
}

impl EifRecord {
    fn from_parts(components: Vec<(&'static str, f64)>, clipped: bool) -> Self {
        let value = components.iter().map(|c| c.1).sum();
        Self { value, components, clipped }
    }

    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.0 == name).map(|c| c.1)
    }
}

/// Integrals of pi, sqrt(pi q) and q against mu for one covariate row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellingerMoments {
    /// Bhattacharyya affinity `integral sqrt(pi q)`.
    pub u: f64,
    /// `integral mu pi`.
    pub m_pi: f64,
    /// `integral mu sqrt(pi q)`.
    pub m_mix: f64,
    /// `integral mu q`.
    pub m_q: f64,
}

impl HellingerMoments {
    /// Moments on the rule split around the target; the affinity uses the closed form
    /// when the density provides one.
    pub fn compute(
        mu: &dyn OutcomeRegression,
        pi: &dyn ConditionalDensity,
        target: &GaussianTarget,
        x: &[f64],
        engine: &QuadratureEngine,
    ) -> Self {
        let rule = engine.piecewise(&target.breaks());
        let (p, m) = pi_mu_at_nodes(mu, pi, x, &rule);
        let (mut u, mut m_pi, mut m_mix, mut m_q) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..rule.len() {
            let (a, w) = (rule.nodes()[k], rule.weights()[k]);
            let q = target.density(a);
            let root = libm::sqrt(p[k].max(0.0) * q);
            u += w * root;
            m_pi += w * m[k] * p[k];
            m_mix += w * m[k] * root;
            m_q += w * m[k] * q;
        }
        let u = pi.affinity(x, target).unwrap_or(u).clamp(0.0, 1.0);
        Self { u, m_pi, m_mix, m_q }
    }

    /// `E_{nu_t}[mu | x] = alpha m_pi + 2 gamma m_mix + beta m_q`.
    pub fn path_mean(&self, angle: &HellingerAngle) -> f64 {
        angle.alpha_t * self.m_pi + 2.0 * angle.gamma_t * self.m_mix + angle.beta_t * self.m_q
    }

    /// `(1 / sin theta) d/dtheta E_{nu_t}[mu | x]`, finite as theta -> 0.
    pub fn dtheta_over_sin(&self, theta: f64, t: f64) -> f64 {
        let (da, dg, db) = hellinger_coeff_derivatives_over_sin(theta, t);
        da * self.m_pi + 2.0 * dg * self.m_mix + db * self.m_q
    }
}

pub(crate) fn pi_mu_at_nodes(
    mu: &dyn OutcomeRegression,
    pi: &dyn ConditionalDensity,
    x: &[f64],
    rule: &Quadrature,
) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; rule.len()];
    let mut m = vec![0.0; rule.len()];
    pi.density_many(x, rule.nodes(), &mut p);
    mu.mean_many(x, rule.nodes(), &mut m);
    (p, m)
}

/// `d/dtheta E_{nu_t}[mu(X, A) | X = x]` from the closed-form coefficient derivatives.
pub fn dtheta_conditional_mean(
    mu: &dyn OutcomeRegression,
    pi: &dyn ConditionalDensity,
    spec: &PathSpec,
    t: f64,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<f64> {
    let target = spec.target()?;
    let mom = HellingerMoments::compute(mu, pi, &target, x, engine);
    let theta = libm::acos(mom.u);
    Ok(mom.dtheta_over_sin(theta, t) * libm::sin(theta))
}

/// Integrals defining a tilted intervention `q = f(a, pi(a)) / integral f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltIntegrals {
    /// `integral f(a, pi(a)) da`.
    pub norm: f64,
    /// `E_q[mu | x]`.
    pub q_mean: f64,
    /// `integral f'(a, pi(a)) pi(a) da / norm`.
    pub fp_pi: f64,
    /// `integral mu f'(a, pi(a)) pi(a) da / norm`.
    pub fp_pi_mu: f64,
}

impl TiltIntegrals {
    pub fn compute<F, FP>(
        mu: &dyn OutcomeRegression,
        pi: &dyn ConditionalDensity,
        x: &[f64],
        rule: &Quadrature,
        f: F,
        f_prime: FP,
    ) -> Self
    where
        F: Fn(f64, f64) -> f64,
        FP: Fn(f64, f64) -> f64,
    {
        let (p, m) = pi_mu_at_nodes(mu, pi, x, rule);
        let (mut norm, mut fm, mut fp, mut fpm) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..rule.len() {
            let (a, w) = (rule.nodes()[k], rule.weights()[k]);
            if p[k] <= 0.0 {
                continue;
            }
            let fv = f(a, p[k]);
            let fpv = f_prime(a, p[k]) * p[k];
            norm += w * fv;
            fm += w * fv * m[k];
            fp += w * fpv;
            fpm += w * fpv * m[k];
        }
        if norm > 0.0 {
            Self { norm, q_mean: fm / norm, fp_pi: fp / norm, fp_pi_mu: fpm / norm }
        } else {
            Self { norm, q_mean: 0.0, fp_pi: 0.0, fp_pi_mu: 0.0 }
        }
    }
}

/// Per-row quantities shared by every observation evaluated at `(x, t)`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum RowContext {
    Wasserstein,
    Hellinger { angle: HellingerAngle, target: GaussianTarget, moments: HellingerMoments },
    ExpTilt { delta: f64, anchor: f64, tilt: TiltIntegrals },
}

impl RowContext {
    pub(crate) fn new(
        spec: &PathSpec,
        pair: &NuisancePair,
        x: &[f64],
        t: f64,
        engine: &QuadratureEngine,
        hellinger: Option<&HellingerMoments>,
    ) -> Result<Self> {
        if t >= 1.0 {
            return Err(Error::ForbiddenEndpoint { t });
        }
        match spec.family {
            Family::Wasserstein => Ok(RowContext::Wasserstein),
            Family::Hellinger => {
                let target = spec.target()?;
                let moments = match hellinger {
                    Some(m) => *m,
                    None => HellingerMoments::compute(&*pair.mu, &*pair.pi, &target, x, engine),
                };
                Ok(RowContext::Hellinger { angle: HellingerAngle::new(moments.u, t), target, moments })
            }
            Family::ExpTilt => {
                let delta = delta_for(t);
                Ok(exp_tilt_context(pair, spec, x, delta, engine))
            }
            Family::ReflectedTilt => Err(Error::Unsupported(
                "no influence function is available for the reflected tilt; use the plug-in estimator".into(),
            )),
        }
    }

    /// Uncentered influence function (psi_ref = 0) at an observation.
    pub(crate) fn eif(
        &self,
        spec: &PathSpec,
        pair: &NuisancePair,
        t: f64,
        z: &Observation<'_>,
        floor: f64,
        cache: &RowCache,
    ) -> EifRecord {
        let (x, a, y) = (z.x, z.a, z.y);
        let pi_a = pair.pi.density_cached(a, x, cache);
        let clipped = pi_a < floor;
        let pi_f = pi_a.max(floor);
        let mu_a = pair.mu.mean(x, a);
        // The path starts at pi, where the ratio is one even if pi is floored.
        let ratio = |nu: f64| if t == 0.0 { 1.0 } else { nu / pi_f };
        match *self {
            RowContext::Wasserstein => {
                let (lo, hi) = spec.shrunken_support(t);
                let nu = if a >= lo && a <= hi {
                    let s = 1.0 - t;
                    let b = ((a - t * spec.a_star) / s).clamp(spec.support.lo(), spec.support.hi());
                    pair.pi.density_cached(b, x, cache) / s
                } else {
                    0.0
                };
                let lambda = (1.0 - t) * a + t * spec.a_star;
                EifRecord::from_parts(
                    vec![("ratio_residual", ratio(nu) * (y - mu_a)), ("shifted_mean", pair.mu.mean(x, lambda))],
                    clipped,
                )
            }
            RowContext::Hellinger { angle, target, moments } => {
                let q_a = target.density(a);
                let nu = angle.density(pi_a, q_a);
                let root = libm::sqrt(q_a / pi_f);
                let d_theta = -0.5 * (root - moments.u) * moments.dtheta_over_sin(angle.theta, t);
                EifRecord::from_parts(
                    vec![
                        ("D_Y", ratio(nu) * (y - mu_a)),
                        ("D_mu", angle.alpha_t * (mu_a - moments.m_pi)),
                        ("D_Q", angle.gamma_t * (mu_a * root - moments.m_mix)),
                        ("D_theta", d_theta),
                        ("D_psi", moments.path_mean(&angle)),
                    ],
                    clipped,
                )
            }
            RowContext::ExpTilt { delta, anchor, tilt } => {
                let f = |a: f64, p: f64| libm::exp(delta * (a - anchor)) * p;
                let fp = |a: f64, _p: f64| libm::exp(delta * (a - anchor));
                tilt_record(&tilt, f(a, pi_a), fp(a, pi_a), pi_a, floor, y, mu_a, clipped)
            }
        }
    }
}

fn exp_tilt_context(
    pair: &NuisancePair,
    spec: &PathSpec,
    x: &[f64],
    delta: f64,
    engine: &QuadratureEngine,
) -> RowContext {
    let support = spec.support;
    let anchor = if delta >= 0.0 { support.hi() } else { support.lo() };
    let rule = engine.piecewise(&crate::paths::tilt_breaks(support.lo(), support.hi(), anchor, delta));
    let mut tilt = TiltIntegrals::compute(
        &*pair.mu,
        &*pair.pi,
        x,
        &rule,
        |a, p| libm::exp(delta * (a - anchor)) * p,
        |a, _| libm::exp(delta * (a - anchor)),
    );
    if delta == 0.0 && tilt.norm > 0.0 {
        // Without tilt q is pi itself, whose mass is one by definition.
        let m = tilt.q_mean * tilt.norm;
        tilt = TiltIntegrals { norm: 1.0, q_mean: m, fp_pi: 1.0, fp_pi_mu: m };
    }
    RowContext::ExpTilt { delta, anchor, tilt }
}

/// Record from `f(A, pi(A))` and `f'(A, pi(A))` at the observation. Stores
/// `-phi_c` so that the parts sum to the value.
#[allow(clippy::too_many_arguments)]
fn tilt_record(
    tilt: &TiltIntegrals,
    f_a: f64,
    fp_a: f64,
    pi_a: f64,
    floor: f64,
    y: f64,
    mu_a: f64,
    clipped: bool,
) -> EifRecord {
    let (phi_y, phi_qmu) = if tilt.norm > 0.0 {
        let q_a = f_a / tilt.norm;
        let ratio = if q_a == pi_a { 1.0 } else { q_a / pi_a.max(floor) };
        (ratio * (y - mu_a), fp_a / tilt.norm * (mu_a - tilt.q_mean))
    } else {
        (0.0, 0.0)
    };
    let phi_c = tilt.fp_pi_mu - tilt.q_mean * tilt.fp_pi;
    EifRecord::from_parts(
        vec![("phi_y", phi_y), ("phi_q_mu", phi_qmu), ("phi_c", -phi_c), ("phi_psi", tilt.q_mean)],
        clipped,
    )
}

fn centered(mut r: EifRecord, psi_ref: f64) -> EifRecord {
    let last = r.components.len() - 1;
    r.components[last].1 -= psi_ref;
    r.value = r.components.iter().map(|c| c.1).sum();
    r
}

/// `phi = (nu_t / pi)(Y - mu(X, A)) + mu(X, (1 - t) A + t a*) - psi_ref`.
pub fn eif_wasserstein(
    z: &Observation<'_>,
    t: f64,
    spec: &PathSpec,
    pair: &NuisancePair,
    psi_ref: f64,
    floor: f64,
) -> Result<EifRecord> {
    let spec = spec.with_family(Family::Wasserstein)?;
    let ctx = RowContext::new(&spec, pair, z.x, t, &QuadratureEngine::default(), None)?;
    Ok(centered(ctx.eif(&spec, pair, t, z, floor, &pair.pi.row_cache(z.x)), psi_ref))
}

/// Five-part Hellinger influence function `D_Y + D_mu + D_Q + D_theta + D_psi`.
pub fn eif_hellinger(
    z: &Observation<'_>,
    t: f64,
    spec: &PathSpec,
    pair: &NuisancePair,
    psi_ref: f64,
    floor: f64,
    engine: &QuadratureEngine,
) -> Result<EifRecord> {
    let spec = spec.with_family(Family::Hellinger)?;
    let ctx = RowContext::new(&spec, pair, z.x, t, engine, None)?;
    Ok(centered(ctx.eif(&spec, pair, t, z, floor, &pair.pi.row_cache(z.x)), psi_ref))
}

/// Influence function of `E[integral mu q]` for `q = f(a, pi) / integral f(a, pi) da`,
/// as `phi_y + phi_{q,mu} - phi_c + phi_psi`; `f_prime` is the derivative in `pi`.
#[allow(clippy::too_many_arguments)]
pub fn eif_general_tilt<F, FP>(
    z: &Observation<'_>,
    f: F,
    f_prime: FP,
    pair: &NuisancePair,
    psi_ref: f64,
    floor: f64,
    rule: &Quadrature,
) -> EifRecord
where
    F: Fn(f64, f64) -> f64,
    FP: Fn(f64, f64) -> f64,
{
    let tilt = TiltIntegrals::compute(&*pair.mu, &*pair.pi, z.x, rule, &f, &f_prime);
    let pi_a = pair.pi.density(z.a, z.x);
    let mu_a = pair.mu.mean(z.x, z.a);
    let rec = tilt_record(&tilt, f(z.a, pi_a), f_prime(z.a, pi_a), pi_a, floor, z.y, mu_a, pi_a < floor);
    centered(rec, psi_ref)
}

/// Value of `(alpha, gamma, beta)` kept for callers that only need the coefficients.
pub fn coefficients(theta: f64, t: f64) -> (f64, f64, f64) {
    hellinger_coeffs(theta, t)
}
