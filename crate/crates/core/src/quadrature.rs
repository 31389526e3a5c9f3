//! Composite Gauss–Legendre quadrature over the exposure support.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Default number of nodes of the single-piece rule.
pub const DEFAULT_NODES: usize = 201;

/// Relative disagreement between two resolutions that triggers refinement.
pub const REFINE_TOL: f64 = 1e-8;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl LegendreRule {
    /// Computes the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut x = alloc::vec![0.0; n];
        let mut w = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let wi = 2.0 / ((1.0 - z * z) * dp * dp);
            // `z` descends with `i`; mirror into ascending slots.
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = wi;
            w[n - 1 - i] = wi;
        }
        if n % 2 == 1 {
            x[n / 2] = 0.0;
        }
        Self { x, w }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }
}

/// P_n(z) and P_n'(z).
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Nodes and positive weights on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    /// Maps `rule` onto every piece `[breaks[k], breaks[k+1]]`.
    pub fn from_rule(rule: &LegendreRule, breaks: &[f64]) -> Self {
        let mut nodes = Vec::with_capacity(rule.len() * breaks.len().saturating_sub(1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
            for (z, wz) in rule.x.iter().zip(&rule.w) {
                nodes.push(mid + half * z);
                weights.push(half * wz);
            }
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let mut s = 0.0;
        for (&a, &w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a);
        }
        s
    }

    /// Weighted sum of precomputed values at the nodes.
    pub fn dot(&self, values: &[f64]) -> f64 {
        let mut s = 0.0;
        for (&v, &w) in values.iter().zip(&self.weights) {
            s += w * v;
        }
        s
    }
}

/// Shared quadrature settings: a single-piece rule and a per-piece rule, each with
/// a doubled companion for one-step refinement.
#[derive(Debug, Clone)]
pub struct QuadratureEngine {
    base: Arc<LegendreRule>,
    piece: Arc<LegendreRule>,
    base_fine: Arc<LegendreRule>,
    piece_fine: Arc<LegendreRule>,
}

impl Default for QuadratureEngine {
    fn default() -> Self {
        Self::new(DEFAULT_NODES).expect("default node count is valid")
    }
}

impl QuadratureEngine {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 5 {
            return Err(Error::arg("quadrature needs at least 5 nodes"));
        }
        let piece_n = (nodes / 2) | 1;
        Ok(Self {
            base: Arc::new(LegendreRule::new(nodes)),
            piece: Arc::new(LegendreRule::new(piece_n)),
            base_fine: Arc::new(LegendreRule::new(2 * nodes)),
            piece_fine: Arc::new(LegendreRule::new(2 * piece_n)),
        })
    }

    pub fn nodes(&self) -> usize {
        self.base.len()
    }

    /// Single-piece rule on `[lo, hi]`.
    pub fn over(&self, lo: f64, hi: f64) -> Quadrature {
        Quadrature::from_rule(&self.base, &[lo, hi])
    }

    /// Composite rule over sorted, deduplicated `breaks`; falls back to the
    /// single-piece rule when only the endpoints remain.
    pub fn piecewise(&self, breaks: &[f64]) -> Quadrature {
        let b = clean_breaks(breaks);
        if b.len() <= 2 {
            Quadrature::from_rule(&self.base, &b)
        } else {
            Quadrature::from_rule(&self.piece, &b)
        }
    }

    /// The doubled companion of [`Self::piecewise`].
    pub fn piecewise_fine(&self, breaks: &[f64]) -> Quadrature {
        let b = clean_breaks(breaks);
        if b.len() <= 2 {
            Quadrature::from_rule(&self.base_fine, &b)
        } else {
            Quadrature::from_rule(&self.piece_fine, &b)
        }
    }

    /// Integrates over the piecewise rule, switching to the doubled rule when the
    /// two resolutions disagree by more than [`REFINE_TOL`] relative.
    pub fn integrate_adaptive<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        let coarse = self.piecewise(breaks).integrate(&mut f);
        let fine = self.piecewise_fine(breaks).integrate(&mut f);
        if (coarse - fine).abs() > REFINE_TOL * fine.abs().max(f64::MIN_POSITIVE) {
            fine
        } else {
            coarse
        }
    }
}

/// Sorts, drops non-finite values and merges points closer than 1e-12 of the span.
/// The first and last entries are kept as the interval ends.
fn clean_breaks(breaks: &[f64]) -> Vec<f64> {
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    let mut v: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b >= lo && *b <= hi)
        .collect();
    v.sort_by(f64::total_cmp);
    let tol = 1e-12 * (hi - lo).abs().max(f64::MIN_POSITIVE);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for b in v {
        if out.last().map_or(true, |&l| b - l > tol) {
            out.push(b);
        }
    }
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    if out.len() == 1 {
        out.push(hi);
    }
    out
}
