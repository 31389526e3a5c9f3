//! Hellinger-sphere geometry: coefficients, their angle derivatives and affinities.

use crate::data::Support;
use crate::error::{Error, Result};
use crate::special::{normal_interval, normal_pdf, scaled_cot};

/// Angles below this use the series limits of the sine ratios.
pub const SMALL_ANGLE: f64 = 1e-4;

/// N(center, sd^2) truncated to the support and renormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTarget {
    center: f64,
    sd: f64,
    support: Support,
    mass: f64,
}

impl GaussianTarget {
    pub fn new(center: f64, sd: f64, support: Support) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) || !center.is_finite() {
            return Err(Error::arg("target needs a finite center and a positive width"));
        }
        let mass = normal_interval((support.lo() - center) / sd, (support.hi() - center) / sd);
        if !(mass > 0.0) {
            return Err(Error::arg("target width places no mass on the support"));
        }
        Ok(Self { center, sd, support, mass })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// Probability the untruncated Gaussian assigns to the support.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn density(&self, a: f64) -> f64 {
        if !self.support.contains(a) {
            return 0.0;
        }
        normal_pdf((a - self.center) / self.sd) / (self.sd * self.mass)
    }

    /// Break points bracketing the bulk of the target.
    pub fn breaks(&self) -> [f64; 4] {
        let (lo, hi) = (self.support.lo(), self.support.hi());
        let w = 10.0 * self.sd;
        [lo, (self.center - w).clamp(lo, hi), (self.center + w).clamp(lo, hi), hi]
    }
}

/// Angle and sphere coefficients at one `(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellingerAngle {
    pub theta: f64,
    pub u_affinity: f64,
    pub alpha_t: f64,
    pub gamma_t: f64,
    pub beta_t: f64,
    /// sqrt(alpha_t), the weight on sqrt(pi).
    pub w_pi: f64,
    /// sqrt(beta_t), the weight on sqrt(q).
    pub w_q: f64,
}

impl HellingerAngle {
    pub fn new(u_affinity: f64, t: f64) -> Self {
        let u = u_affinity.clamp(0.0, 1.0);
        let theta = libm::acos(u);
        let (w_pi, w_q) = sine_weights(theta, t);
        Self {
            theta,
            u_affinity: u,
            alpha_t: w_pi * w_pi,
            gamma_t: w_pi * w_q,
            beta_t: w_q * w_q,
            w_pi,
            w_q,
        }
    }

    /// nu_t evaluated from pi(a) and q(a).
    #[inline]
    pub fn density(&self, pi_a: f64, q_a: f64) -> f64 {
        let r = self.w_pi * libm::sqrt(pi_a.max(0.0)) + self.w_q * libm::sqrt(q_a.max(0.0));
        r * r
    }
}

/// (sin((1-t)theta)/sin theta, sin(t theta)/sin theta), with series limits at small angles.
fn sine_weights(theta: f64, t: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        (1.0 - t, t)
    } else {
        let s = libm::sin(theta);
        (libm::sin((1.0 - t) * theta) / s, libm::sin(t * theta) / s)
    }
}

/// `(alpha_t, gamma_t, beta_t)` for angle `theta`.
pub fn hellinger_coeffs(theta: f64, t: f64) -> (f64, f64, f64) {
    let (p, q) = sine_weights(theta, t);
    (p * p, p * q, q * q)
}

/// Derivatives of `(alpha_t, gamma_t, beta_t)` in theta, divided by sin(theta).
///
/// Below [`SMALL_ANGLE`] the limits (second derivatives at zero) are returned.
pub fn hellinger_coeff_derivatives_over_sin(theta: f64, t: f64) -> (f64, f64, f64) {
    let s = 1.0 - t;
    if t == 0.0 {
        // alpha = 1 and gamma = beta = 0 for every angle.
        return (0.0, 0.0, 0.0);
    }
    if theta < SMALL_ANGLE {
        let a = s * s * (1.0 - s * s) * 2.0 / 3.0;
        let b = t * t * (1.0 - t * t) * 2.0 / 3.0;
        let g = s * t * (2.0 - s * s - t * t) / 3.0;
        return (a, g, b);
    }
    let (alpha, gamma, beta) = hellinger_coeffs(theta, t);
    let cot = libm::cos(theta) / libm::sin(theta);
    let cs = scaled_cot(s, theta);
    let ct = scaled_cot(t, theta);
    let sin = libm::sin(theta);
    (
        2.0 * alpha * (cs - cot) / sin,
        gamma * (cs + ct - 2.0 * cot) / sin,
        2.0 * beta * (ct - cot) / sin,
    )
}

/// Derivatives of `(alpha_t, gamma_t, beta_t)` in theta.
pub fn hellinger_coeff_derivatives(theta: f64, t: f64) -> (f64, f64, f64) {
    let (a, g, b) = hellinger_coeff_derivatives_over_sin(theta, t);
    let s = libm::sin(theta);
    (a * s, g * s, b * s)
}

/// Affinity between N_[lo,hi](mean, sd^2) and a truncated Gaussian target.
pub fn truncated_normal_affinity(mean: f64, sd: f64, target: &GaussianTarget) -> f64 {
    let support = target.support();
    let (lo, hi) = (support.lo(), support.hi());
    let z = normal_interval((lo - mean) / sd, (hi - mean) / sd);
    if !(z > 0.0) {
        return 0.0;
    }
    let (eps, a_star) = (target.sd(), target.center());
    let prec = 1.0 / (sd * sd) + 1.0 / (eps * eps);
    let c = (mean / (sd * sd) + a_star / (eps * eps)) / prec;
    let s = libm::sqrt(2.0 / prec);
    let gap = (mean - a_star) * (mean - a_star) / (sd * sd + eps * eps);
    let window = normal_interval((lo - c) / s, (hi - c) / s);
    let v = s * libm::exp(-0.25 * gap) * window / libm::sqrt(sd * eps * z * target.mass());
    v.clamp(0.0, 1.0)
}

/// Closed-form affinity for the unit-variance truncated normal N_[lo,hi](mu_x, 1)
/// against N(a_star, epsilon^2) truncated to the same support.
pub fn hellinger_affinity_closed_form(
    mu_x: f64,
    support: Support,
    a_star: f64,
    epsilon: f64,
) -> Result<f64> {
    // A target far outside the support keeps no mass there; the overlap is zero.
    let mass = normal_interval(
        (support.lo() - a_star) / epsilon,
        (support.hi() - a_star) / epsilon,
    );
    if mass <= 0.0 {
        return Ok(0.0);
    }
    let target = GaussianTarget::new(a_star, epsilon, support)?;
    Ok(truncated_normal_affinity(mu_x, 1.0, &target))
}
