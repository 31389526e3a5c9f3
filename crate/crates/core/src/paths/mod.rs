//! Intervention densities along paths from pi(a | x) toward a point mass.

mod divergence;
mod hellinger;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::Support;
use crate::error::{Error, Result};
use crate::model::ConditionalDensity;
use crate::quadrature::{Quadrature, QuadratureEngine};

pub use divergence::{
    chi_square_divergence, chi_square_path_integral, ratio_error_lower_bound_check, ChiSquare,
    RatioCheck,
};
pub use hellinger::{
    hellinger_affinity_closed_form, hellinger_coeff_derivatives,
    hellinger_coeff_derivatives_over_sin, hellinger_coeffs, truncated_normal_affinity,
    GaussianTarget, HellingerAngle, SMALL_ANGLE,
};

/// Default width of the Gaussian stand-in for the point mass.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Densities below this are floored inside ratios.
pub const DENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Wasserstein,
    Hellinger,
    ExpTilt,
    ReflectedTilt,
}

impl Family {
    pub const ALL: [Family; 4] =
        [Family::Wasserstein, Family::Hellinger, Family::ExpTilt, Family::ReflectedTilt];

    /// Lower-case name used on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Family::Wasserstein => "wasserstein",
            Family::Hellinger => "hellinger",
            Family::ExpTilt => "exptilt",
            Family::ReflectedTilt => "reflected",
        }
    }

    /// Capitalized label used in CSV column names.
    pub fn label(self) -> &'static str {
        match self {
            Family::Wasserstein => "Wasserstein",
            Family::Hellinger => "Hellinger",
            Family::ExpTilt => "ExpTilt",
            Family::ReflectedTilt => "ReflectedTilt",
        }
    }

    /// Whether a one-step estimator with influence-function inference exists.
    pub fn has_eif(self) -> bool {
        !matches!(self, Family::ReflectedTilt)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wasserstein" | "w" => Ok(Family::Wasserstein),
            "hellinger" | "h" => Ok(Family::Hellinger),
            "exptilt" | "exp_tilt" | "tilt" | "e" => Ok(Family::ExpTilt),
            "reflected" | "reflectedtilt" | "reflected_tilt" | "r" => Ok(Family::ReflectedTilt),
            other => Err(Error::arg(alloc::format!("unknown path family `{other}`"))),
        }
    }
}

/// Exponential-tilt strength for path point `t`.
pub fn delta_for(t: f64) -> f64 {
    t / (1.0 - t)
}

/// A path family with its target and support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub family: Family,
    pub a_star: f64,
    pub epsilon: f64,
    pub split_point: f64,
    pub support: Support,
}

impl PathSpec {
    /// Spec with the default epsilon. The split point is `a_star` when interior,
    /// otherwise the middle of the support.
    pub fn new(family: Family, support: Support, a_star: f64) -> Result<Self> {
        let split_point = if a_star > support.lo() && a_star < support.hi() {
            a_star
        } else {
            0.5 * (support.lo() + support.hi())
        };
        let spec = Self { family, a_star, epsilon: DEFAULT_EPSILON, split_point, support };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_split_point(mut self, split: f64) -> Result<Self> {
        self.split_point = split;
        self.validate()?;
        Ok(self)
    }

    pub fn with_family(mut self, family: Family) -> Result<Self> {
        self.family = family;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.support.contains(self.a_star) {
            return Err(Error::arg(alloc::format!(
                "a_star = {} lies outside the support [{}, {}]",
                self.a_star,
                self.support.lo(),
                self.support.hi()
            )));
        }
        if self.family == Family::Hellinger && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg("epsilon must be positive for the Hellinger path"));
        }
        if self.family == Family::ReflectedTilt
            && !(self.split_point > self.support.lo() && self.split_point < self.support.hi())
        {
            return Err(Error::arg("split point must lie strictly inside the support"));
        }
        Ok(())
    }

    /// Gaussian stand-in for the point mass at `a_star`.
    pub fn target(&self) -> Result<GaussianTarget> {
        GaussianTarget::new(self.a_star, self.epsilon, self.support)
    }

    /// Ends of the support after shrinking toward `a_star` by `t`.
    pub fn shrunken_support(&self, t: f64) -> (f64, f64) {
        (
            (1.0 - t) * self.support.lo() + t * self.a_star,
            (1.0 - t) * self.support.hi() + t * self.a_star,
        )
    }
}

fn check_t(t: f64) -> Result<()> {
    if t >= 1.0 {
        return Err(Error::ForbiddenEndpoint { t });
    }
    if !(t >= 0.0) {
        return Err(Error::arg("t must lie in [0, 1)"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum State {
    Wasserstein,
    Hellinger { angle: HellingerAngle, target: GaussianTarget },
    Tilt { delta: f64, anchor: f64, inv_norm: f64 },
    Reflected { delta: f64, split: f64, scale_lo: f64, scale_hi: f64 },
}

/// Path density at one `(x, t)`, with per-row normalizers computed once.
pub struct PathAt<'a> {
    spec: PathSpec,
    pi: &'a dyn ConditionalDensity,
    x: &'a [f64],
    t: f64,
    state: State,
}

impl<'a> PathAt<'a> {
    pub fn new(
        spec: &PathSpec,
        pi: &'a dyn ConditionalDensity,
        x: &'a [f64],
        t: f64,
        engine: &QuadratureEngine,
    ) -> Result<Self> {
        check_t(t)?;
        spec.validate()?;
        let state = match spec.family {
            Family::Wasserstein => State::Wasserstein,
            Family::Hellinger => {
                let target = spec.target()?;
                let u = hellinger_affinity(pi, &target, x, engine);
                State::Hellinger { angle: HellingerAngle::new(u, t), target }
            }
            Family::ExpTilt => tilt_state(pi, spec.support, x, delta_for(t), engine),
            Family::ReflectedTilt => {
                reflected_state(pi, spec.support, x, delta_for(t), spec.split_point, engine)
            }
        };
        Ok(Self { spec: *spec, pi, x, t, state })
    }

    /// Hellinger state with a known affinity, skipping its computation.
    pub fn hellinger_with_affinity(
        spec: &PathSpec,
        pi: &'a dyn ConditionalDensity,
        x: &'a [f64],
        t: f64,
        u_affinity: f64,
    ) -> Result<Self> {
        check_t(t)?;
        let target = spec.target()?;
        let state = State::Hellinger { angle: HellingerAngle::new(u_affinity, t), target };
        Ok(Self { spec: *spec, pi, x, t, state })
    }

    /// Exponential tilt with an explicit `delta`, which may be negative.
    pub fn exp_tilt(
        pi: &'a dyn ConditionalDensity,
        x: &'a [f64],
        delta: f64,
        engine: &QuadratureEngine,
    ) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::arg("tilt strength must be finite"));
        }
        let support = pi.support();
        let spec = PathSpec {
            family: Family::ExpTilt,
            a_star: support.hi(),
            epsilon: DEFAULT_EPSILON,
            split_point: 0.5 * (support.lo() + support.hi()),
            support,
        };
        let state = tilt_state(pi, support, x, delta, engine);
        Ok(Self { spec, pi, x, t: delta / (1.0 + delta.abs()), state })
    }

    /// Reflected tilt with an explicit `delta >= 0`.
    pub fn reflected_tilt(
        spec: &PathSpec,
        pi: &'a dyn ConditionalDensity,
        x: &'a [f64],
        delta: f64,
        engine: &QuadratureEngine,
    ) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::arg("reflected tilt needs a finite delta >= 0"));
        }
        let mut spec = *spec;
        spec.family = Family::ReflectedTilt;
        spec.validate()?;
        let state = reflected_state(pi, spec.support, x, delta, spec.split_point, engine);
        Ok(Self { spec, pi, x, t: delta / (1.0 + delta), state })
    }

    pub fn spec(&self) -> &PathSpec {
        &self.spec
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn x(&self) -> &[f64] {
        self.x
    }

    pub fn pi(&self) -> &'a dyn ConditionalDensity {
        self.pi
    }

    pub fn angle(&self) -> Option<HellingerAngle> {
        match self.state {
            State::Hellinger { angle, .. } => Some(angle),
            _ => None,
        }
    }

    pub fn target(&self) -> Option<GaussianTarget> {
        match self.state {
            State::Hellinger { target, .. } => Some(target),
            _ => None,
        }
    }

    /// Density of the path at `a`.
    pub fn density(&self, a: f64) -> f64 {
        if !self.spec.support.contains(a) {
            return 0.0;
        }
        match self.state {
            State::Wasserstein => {
                let (lo, hi) = self.spec.shrunken_support(self.t);
                if a < lo || a > hi {
                    return 0.0;
                }
                let s = 1.0 - self.t;
                let b = ((a - self.t * self.spec.a_star) / s)
                    .clamp(self.spec.support.lo(), self.spec.support.hi());
                self.pi.density(b, self.x) / s
            }
            _ => self.density_given_pi(a, self.pi.density(a, self.x)),
        }
    }

    /// Density at `a` given `pi(a | x)`; not valid for the Wasserstein path.
    #[inline]
    pub fn density_given_pi(&self, a: f64, pi_a: f64) -> f64 {
        match self.state {
            State::Wasserstein => f64::NAN,
            State::Hellinger { angle, target } => angle.density(pi_a, target.density(a)),
            State::Tilt { delta, anchor, inv_norm } => {
                libm::exp(delta * (a - anchor)) * pi_a * inv_norm
            }
            State::Reflected { delta, split, scale_lo, scale_hi } => {
                let w = libm::exp(-delta * (a - split).abs());
                if a < split {
                    w * pi_a * scale_lo
                } else {
                    w * pi_a * scale_hi
                }
            }
        }
    }

    /// Break points where the path density changes scale.
    pub fn breaks(&self) -> Vec<f64> {
        let (lo, hi) = (self.spec.support.lo(), self.spec.support.hi());
        match self.state {
            State::Wasserstein => {
                let (a, b) = self.spec.shrunken_support(self.t);
                vec![lo, a, b, hi]
            }
            State::Hellinger { target, .. } => target.breaks().to_vec(),
            State::Tilt { delta, anchor, .. } => tilt_breaks(lo, hi, anchor, delta),
            State::Reflected { delta, split, .. } => {
                let mut b = tilt_breaks(lo, split, split, delta);
                b.extend(tilt_breaks(split, hi, split, delta));
                b
            }
        }
    }

    /// Composite rule adapted to this path.
    pub fn rule(&self, engine: &QuadratureEngine) -> Quadrature {
        engine.piecewise(&self.breaks())
    }

    /// `E_rho[g(A, rho(A))] = integral of g(a, rho(a)) rho(a) da`.
    ///
    /// The Wasserstein path is integrated by substitution over the support of pi.
    pub fn expect<G: FnMut(f64, f64) -> f64>(&self, engine: &QuadratureEngine, mut g: G) -> f64 {
        let support = self.spec.support;
        match self.state {
            State::Wasserstein => {
                let q = engine.over(support.lo(), support.hi());
                let mut p = vec![0.0; q.len()];
                self.pi.density_many(self.x, q.nodes(), &mut p);
                let s = 1.0 - self.t;
                let mut acc = 0.0;
                for ((&b, &w), &pb) in q.nodes().iter().zip(q.weights()).zip(&p) {
                    if pb > 0.0 {
                        let a = s * b + self.t * self.spec.a_star;
                        acc += w * pb * g(a, pb / s);
                    }
                }
                acc
            }
            _ => {
                let q = self.rule(engine);
                let mut p = vec![0.0; q.len()];
                self.pi.density_many(self.x, q.nodes(), &mut p);
                let mut acc = 0.0;
                for ((&a, &w), &pa) in q.nodes().iter().zip(q.weights()).zip(&p) {
                    let r = self.density_given_pi(a, pa);
                    if r > 0.0 {
                        acc += w * r * g(a, r);
                    }
                }
                acc
            }
        }
    }

    /// Total mass of the path density.
    pub fn mass(&self, engine: &QuadratureEngine) -> f64 {
        self.expect(engine, |_, _| 1.0)
    }
}

/// Geometric break points `anchor -+ {1, 4, 16, 64} / |delta|` inside `[lo, hi]`.
pub(crate) fn tilt_breaks(lo: f64, hi: f64, anchor: f64, delta: f64) -> Vec<f64> {
    let mut b = vec![lo];
    if delta.abs() > 0.0 {
        for k in [64.0, 16.0, 4.0, 1.0] {
            let d = k / delta.abs();
            for p in [anchor - d, anchor + d] {
                if p > lo && p < hi {
                    b.push(p);
                }
            }
        }
    }
    if anchor > lo && anchor < hi {
        b.push(anchor);
    }
    b.push(hi);
    b.sort_by(f64::total_cmp);
    b
}

/// Integral of `w(a) pi(a | x)` over breaks, refined once when resolutions disagree.
pub(crate) fn integrate_against_pi<W: Fn(f64) -> f64>(
    pi: &dyn ConditionalDensity,
    x: &[f64],
    breaks: &[f64],
    engine: &QuadratureEngine,
    w: W,
) -> f64 {
    let run = |q: &Quadrature| {
        let mut p = vec![0.0; q.len()];
        pi.density_many(x, q.nodes(), &mut p);
        let mut acc = 0.0;
        for ((&a, &wt), &pa) in q.nodes().iter().zip(q.weights()).zip(&p) {
            acc += wt * w(a) * pa;
        }
        acc
    };
    let coarse = run(&engine.piecewise(breaks));
    let fine = run(&engine.piecewise_fine(breaks));
    if (coarse - fine).abs() > crate::quadrature::REFINE_TOL * fine.abs().max(f64::MIN_POSITIVE) {
        fine
    } else {
        coarse
    }
}

fn tilt_state(
    pi: &dyn ConditionalDensity,
    support: Support,
    x: &[f64],
    delta: f64,
    engine: &QuadratureEngine,
) -> State {
    let anchor = if delta >= 0.0 { support.hi() } else { support.lo() };
    let breaks = tilt_breaks(support.lo(), support.hi(), anchor, delta);
    let norm = integrate_against_pi(pi, x, &breaks, engine, |a| libm::exp(delta * (a - anchor)));
    let inv_norm = if norm > 0.0 { 1.0 / norm } else { 0.0 };
    State::Tilt { delta, anchor, inv_norm }
}

fn reflected_state(
    pi: &dyn ConditionalDensity,
    support: Support,
    x: &[f64],
    delta: f64,
    split: f64,
    engine: &QuadratureEngine,
) -> State {
    let lo_breaks = tilt_breaks(support.lo(), split, split, delta);
    let hi_breaks = tilt_breaks(split, support.hi(), split, delta);
    let mass_lo = integrate_against_pi(pi, x, &[support.lo(), split], engine, |_| 1.0);
    let mass_hi = integrate_against_pi(pi, x, &[split, support.hi()], engine, |_| 1.0);
    let tilt = |a: f64| libm::exp(-delta * (a - split).abs());
    let norm_lo = integrate_against_pi(pi, x, &lo_breaks, engine, tilt);
    let norm_hi = integrate_against_pi(pi, x, &hi_breaks, engine, tilt);
    let ratio = |m: f64, n: f64| if n > 0.0 { m / n } else { 0.0 };
    State::Reflected {
        delta,
        split,
        scale_lo: ratio(mass_lo, norm_lo),
        scale_hi: ratio(mass_hi, norm_hi),
    }
}

/// Affinity from the closed form when the model provides one, else by quadrature.
pub(crate) fn hellinger_affinity(
    pi: &dyn ConditionalDensity,
    target: &GaussianTarget,
    x: &[f64],
    engine: &QuadratureEngine,
) -> f64 {
    match pi.affinity(x, target) {
        Some(u) => u,
        None => affinity_by_quadrature(pi, target, x, engine),
    }
}

fn affinity_by_quadrature(
    pi: &dyn ConditionalDensity,
    target: &GaussianTarget,
    x: &[f64],
    engine: &QuadratureEngine,
) -> f64 {
    let breaks = target.breaks();
    let run = |q: &Quadrature| {
        let mut p = vec![0.0; q.len()];
        pi.density_many(x, q.nodes(), &mut p);
        let mut acc = 0.0;
        for ((&a, &w), &pa) in q.nodes().iter().zip(q.weights()).zip(&p) {
            acc += w * libm::sqrt(pa.max(0.0) * target.density(a));
        }
        acc
    };
    let coarse = run(&engine.piecewise(&breaks));
    let fine = run(&engine.piecewise_fine(&breaks));
    let v = if (coarse - fine).abs() > crate::quadrature::REFINE_TOL * fine.abs() {
        fine
    } else {
        coarse
    };
    v.clamp(0.0, 1.0)
}

/// Wasserstein geodesic density (push-forward of pi under a -> (1-t) a + t a*).
pub fn wasserstein_density(
    pi: &dyn ConditionalDensity,
    t: f64,
    spec: &PathSpec,
    a: f64,
    x: &[f64],
) -> Result<f64> {
    check_t(t)?;
    let mut s = *spec;
    s.family = Family::Wasserstein;
    let state = State::Wasserstein;
    Ok(PathAt { spec: s, pi, x, t, state }.density(a))
}

/// Exponentially tilted density `e^{delta a} pi / integral`.
pub fn exp_tilt_density(
    pi: &dyn ConditionalDensity,
    delta: f64,
    a: f64,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<f64> {
    Ok(PathAt::exp_tilt(pi, x, delta, engine)?.density(a))
}

/// Reflected tilt around `spec.split_point`, each branch keeping its original mass.
pub fn reflected_tilt_density(
    pi: &dyn ConditionalDensity,
    delta: f64,
    spec: &PathSpec,
    a: f64,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<f64> {
    Ok(PathAt::reflected_tilt(spec, pi, x, delta, engine)?.density(a))
}

/// Bhattacharyya affinity of pi(. | x) with the Gaussian target, by quadrature.
pub fn hellinger_affinity_quadrature(
    pi: &dyn ConditionalDensity,
    spec: &PathSpec,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<f64> {
    let target = GaussianTarget::new(spec.a_star, spec.epsilon, spec.support)?;
    Ok(affinity_by_quadrature(pi, &target, x, engine))
}

/// Hellinger geodesic density at `a`.
pub fn hellinger_density(
    pi: &dyn ConditionalDensity,
    spec: &PathSpec,
    t: f64,
    a: f64,
    x: &[f64],
    engine: &QuadratureEngine,
) -> Result<f64> {
    if t == 1.0 {
        return spec.target().map(|q| q.density(a));
    }
    let mut s = *spec;
    s.family = Family::Hellinger;
    Ok(PathAt::new(&s, pi, x, t, engine)?.density(a))
}
