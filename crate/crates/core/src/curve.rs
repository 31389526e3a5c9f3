use alloc::vec::Vec;

/// One point of an estimated effect curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectPoint {
    pub t: f64,
    pub psi_hat: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Mean chi-square divergence of the path density from the treatment density;
    /// `+inf` when mass was placed where the density was floored.
    pub chi_sq: f64,
}

pub const Z_95: f64 = 1.96;

impl EffectPoint {
    pub fn wald(t: f64, psi_hat: f64, se: f64, chi_sq: f64) -> Self {
        Self { t, psi_hat, se, ci_lo: psi_hat - Z_95 * se, ci_hi: psi_hat + Z_95 * se, chi_sq }
    }

    pub fn width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_lo <= truth && truth <= self.ci_hi
    }
}

pub type EffectCurve = Vec<EffectPoint>;
