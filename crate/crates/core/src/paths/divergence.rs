//! Chi-square diagnostics along a path.

use alloc::vec;

use super::{PathAt, PathSpec, State, DENSITY_FLOOR};
use crate::error::Result;
use crate::model::ConditionalDensity;
use crate::quadrature::{Quadrature, QuadratureEngine};

/// Chi-square divergence with the mass placed where the reference density was floored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    /// `+inf` when `floored_mass > 0`.
    pub value: f64,
    pub floored_mass: f64,
}

impl ChiSquare {
    pub fn is_flagged(&self) -> bool {
        self.floored_mass > 0.0
    }
}

/// Accumulates `sum w rho^2 / pi` and the flagged mass.
struct Acc {
    sum: f64,
    floored: f64,
}

impl Acc {
    fn new() -> Self {
        Self { sum: 0.0, floored: 0.0 }
    }

    #[inline]
    fn add(&mut self, w: f64, rho: f64, pi: f64, floor: f64) {
        if rho <= 0.0 {
            return;
        }
        if pi < floor {
            if rho > floor {
                self.floored += w * rho;
            }
            return;
        }
        self.sum += w * rho * rho / pi;
    }

    fn finish(self) -> ChiSquare {
        if self.floored > 0.0 {
            ChiSquare { value: f64::INFINITY, floored_mass: self.floored }
        } else {
            ChiSquare { value: (self.sum - 1.0).max(0.0), floored_mass: 0.0 }
        }
    }
}

/// `integral rho^2 / pi - 1` on a supplied rule.
pub fn chi_square_divergence<R, P>(rho: R, pi: P, quad: &Quadrature, floor: f64) -> ChiSquare
where
    R: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let mut acc = Acc::new();
    for (&a, &w) in quad.nodes().iter().zip(quad.weights()) {
        acc.add(w, rho(a), pi(a), floor);
    }
    acc.finish()
}

impl PathAt<'_> {
    /// Chi-square divergence of the path density from pi at this row.
    pub fn chi_square(&self, engine: &QuadratureEngine, floor: f64) -> ChiSquare {
        let mut acc = Acc::new();
        match self.state {
            State::Wasserstein => {
                // Substitute a = (1 - t) b + t a*, so rho(a) = pi(b) / (1 - t).
                let support = self.spec.support;
                let q = engine.over(support.lo(), support.hi());
                let s = 1.0 - self.t;
                let moved: alloc::vec::Vec<f64> =
                    q.nodes().iter().map(|&b| s * b + self.t * self.spec.a_star).collect();
                let mut pb = vec![0.0; q.len()];
                let mut pa = vec![0.0; q.len()];
                self.pi.density_many(self.x, q.nodes(), &mut pb);
                self.pi.density_many(self.x, &moved, &mut pa);
                for k in 0..q.len() {
                    // integral rho^2/pi da = integral pi(b) * rho(a_b) / pi(a_b) db
                    let rho = pb[k] / s;
                    if rho <= 0.0 {
                        continue;
                    }
                    if pa[k] < floor {
                        if rho > floor {
                            acc.floored += q.weights()[k] * pb[k];
                        }
                        continue;
                    }
                    acc.sum += q.weights()[k] * pb[k] * rho / pa[k];
                }
            }
            _ => {
                let q = self.rule(engine);
                let mut p = vec![0.0; q.len()];
                self.pi.density_many(self.x, q.nodes(), &mut p);
                for ((&a, &w), &pa) in q.nodes().iter().zip(q.weights()).zip(&p) {
                    acc.add(w, self.density_given_pi(a, pa), pa, floor);
                }
            }
        }
        acc.finish()
    }
}

/// `F(s) = integral_0^s (1 + E_X[chi^2(rho_t || pi)]) dt` by the trapezoid rule on
/// `steps` equal intervals, averaging over the covariate rows in `xs` (row-major, `d` columns).
pub fn chi_square_path_integral(
    spec: &PathSpec,
    pi: &dyn ConditionalDensity,
    xs: &[f64],
    d: usize,
    s: f64,
    steps: usize,
    engine: &QuadratureEngine,
) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    super::check_t(s)?;
    let steps = steps.max(1);
    let h = s / steps as f64;
    let rows = xs.len() / d;
    let mut g = alloc::vec::Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * h;
        let mut total = 0.0;
        for i in 0..rows {
            let x = &xs[i * d..(i + 1) * d];
            let c = PathAt::new(spec, pi, x, t, engine)?.chi_square(engine, DENSITY_FLOOR);
            if c.is_flagged() {
                return Ok(f64::INFINITY);
            }
            total += c.value;
        }
        g.push(1.0 + total / rows as f64);
    }
    let mut f = 0.0;
    for w in g.windows(2) {
        f += 0.5 * h * (w[0] + w[1]);
    }
    Ok(f)
}

/// Both sides of the ratio-error lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl RatioCheck {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

/// Checks `||rho_hat/pi_hat - rho/pi||^2 >= E[(1 - sqrt(chi2_hat / chi2))^2 chi2]`, where the
/// norm is `L2(P)`, `chi2 = chi^2(rho || pi)` and `chi2_hat = chi^2(rho_hat || pi_hat)`.
/// Densities are `(a, x) -> value`; the outer expectation averages the rows of `xs`.
pub fn ratio_error_lower_bound_check<P, R, PH, RH>(
    pi: P,
    rho: R,
    pi_hat: PH,
    rho_hat: RH,
    xs: &[f64],
    d: usize,
    quad: &Quadrature,
) -> RatioCheck
where
    P: Fn(f64, &[f64]) -> f64,
    R: Fn(f64, &[f64]) -> f64,
    PH: Fn(f64, &[f64]) -> f64,
    RH: Fn(f64, &[f64]) -> f64,
{
    let rows = xs.len() / d;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 0..rows {
        let x = &xs[i * d..(i + 1) * d];
        let (mut l2, mut c, mut c_hat) = (0.0, 0.0, 0.0);
        for (&a, &w) in quad.nodes().iter().zip(quad.weights()) {
            let p = pi(a, x).max(DENSITY_FLOOR);
            let ph = pi_hat(a, x).max(DENSITY_FLOOR);
            let (r, rh) = (rho(a, x), rho_hat(a, x));
            let diff = rh / ph - r / p;
            l2 += w * diff * diff * p;
            c += w * r * r / p;
            c_hat += w * rh * rh / ph;
        }
        let (c, c_hat) = ((c - 1.0).max(0.0), (c_hat - 1.0).max(0.0));
        lhs += l2;
        if c > 0.0 {
            let g = 1.0 - libm::sqrt(c_hat / c);
            rhs += g * g * c;
        }
    }
    RatioCheck { lhs: lhs / rows as f64, rhs: rhs / rows as f64 }
}
