//! Outcome regression and treatment density: fitting, cross-fitting and oracles.

mod crossfit;
mod density;
mod spline;

use alloc::sync::Arc;

pub use crossfit::{crossfit, make_fold_plan, CrossFit, FoldPlan};
pub use density::{silverman, Bandwidth, LocationScaleDensity, MIN_DENSITY_ROWS};
pub use spline::{default_ridge_grid, BSplineBasis, SplineConfig, SplineRegression};

use crate::data::Dataset;
use crate::error::Result;
use crate::model::{ConditionalDensity, OutcomeRegression};
use crate::simbench::Dgp;

/// Where the nuisance functions came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Fitted,
    Oracle,
    /// True treatment density with a fitted outcome regression.
    OracleDensityFittedOutcome,
}

/// Outcome regression and treatment density used together.
#[derive(Clone)]
pub struct NuisancePair {
    pub mu: Arc<dyn OutcomeRegression>,
    pub pi: Arc<dyn ConditionalDensity>,
    pub provenance: Provenance,
}

impl NuisancePair {
    pub fn new(
        mu: Arc<dyn OutcomeRegression>,
        pi: Arc<dyn ConditionalDensity>,
        provenance: Provenance,
    ) -> Self {
        Self { mu, pi, provenance }
    }
}

/// Settings for fitted nuisances.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceConfig {
    pub spline: SplineConfig,
    pub bandwidth: Bandwidth,
    /// Reserved for a covariate-dependent residual scale; enabling it is rejected.
    pub heteroscedastic: bool,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self { spline: SplineConfig::default(), bandwidth: Bandwidth::Silverman, heteroscedastic: false }
    }
}

/// Produces a nuisance pair from a training set.
pub trait NuisanceFitter: Send + Sync {
    fn fit(&self, train: &Dataset) -> Result<NuisancePair>;
}

pub fn fit_outcome_regression(train: &Dataset, cfg: &NuisanceConfig) -> Result<SplineRegression> {
    SplineRegression::fit_outcome(train, &cfg.spline)
}

pub fn fit_conditional_density(train: &Dataset, cfg: &NuisanceConfig) -> Result<LocationScaleDensity> {
    LocationScaleDensity::fit(train, &cfg.spline, cfg.bandwidth, cfg.heteroscedastic)
}

/// Fits both nuisances.
#[derive(Debug, Clone, Default)]
pub struct SplineFitter {
    pub cfg: NuisanceConfig,
}

impl NuisanceFitter for SplineFitter {
    fn fit(&self, train: &Dataset) -> Result<NuisancePair> {
        let mu = fit_outcome_regression(train, &self.cfg)?;
        let pi = fit_conditional_density(train, &self.cfg)?;
        Ok(NuisancePair::new(Arc::new(mu), Arc::new(pi), Provenance::Fitted))
    }
}

/// Fits the outcome regression and keeps a known treatment density.
#[derive(Clone)]
pub struct OutcomeFitter {
    pub cfg: NuisanceConfig,
    pub pi: Arc<dyn ConditionalDensity>,
}

impl NuisanceFitter for OutcomeFitter {
    fn fit(&self, train: &Dataset) -> Result<NuisancePair> {
        let mu = fit_outcome_regression(train, &self.cfg)?;
        Ok(NuisancePair::new(Arc::new(mu), self.pi.clone(), Provenance::OracleDensityFittedOutcome))
    }
}

/// Returns the same pair for every training set.
#[derive(Clone)]
pub struct OracleFitter(pub NuisancePair);

impl NuisanceFitter for OracleFitter {
    fn fit(&self, _train: &Dataset) -> Result<NuisancePair> {
        Ok(self.0.clone())
    }
}

/// True nuisance functions of a design.
pub fn oracle_nuisances(dgp: &Dgp) -> NuisancePair {
    NuisancePair::new(
        Arc::new(dgp.outcome_regression()),
        Arc::new(dgp.treatment_density()),
        Provenance::Oracle,
    )
}

/// Nuisances used by an estimator: one shared pair or a cross-fit.
#[derive(Clone)]
pub enum Nuisances {
    Shared(NuisancePair),
    CrossFit(CrossFit),
}

impl Nuisances {
    /// Pair used for observation `i`.
    pub fn pair_for(&self, i: usize) -> &NuisancePair {
        match self {
            Nuisances::Shared(p) => p,
            Nuisances::CrossFit(c) => c.pair_for(i),
        }
    }

    pub fn folds(&self) -> usize {
        match self {
            Nuisances::Shared(_) => 1,
            Nuisances::CrossFit(c) => c.plan().k(),
        }
    }
}
