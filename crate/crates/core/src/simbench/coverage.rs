//! Repeated-sampling coverage and interval width of the one-step estimators.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{Dgp, TruePoint};
use crate::curve::EffectCurve;
use crate::error::{Error, Result};
use crate::estimators::{one_step, EstimatorOptions};
use crate::grid::TGrid;
use crate::nuisance::{
    crossfit, make_fold_plan, oracle_nuisances, NuisanceConfig, Nuisances, OutcomeFitter, SplineFitter,
};
use crate::paths::{Family, PathSpec, DEFAULT_EPSILON};
use crate::seed::derive_seed;

/// Which nuisances are estimated in each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceMode {
    /// True treatment density, cross-fitted outcome regression.
    OraclePiFittedMu,
    AllFitted,
    AllOracle,
}

impl NuisanceMode {
    pub fn name(self) -> &'static str {
        match self {
            NuisanceMode::OraclePiFittedMu => "oracle-pi",
            NuisanceMode::AllFitted => "fitted",
            NuisanceMode::AllOracle => "oracle",
        }
    }
}

impl fmt::Display for NuisanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NuisanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle-pi" => Ok(NuisanceMode::OraclePiFittedMu),
            "fitted" => Ok(NuisanceMode::AllFitted),
            "oracle" => Ok(NuisanceMode::AllOracle),
            other => Err(Error::arg(format!("unknown nuisance mode `{other}` (oracle-pi, fitted, oracle)"))),
        }
    }
}

/// Settings of a coverage experiment.
#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub dgp: Dgp,
    pub families: Vec<Family>,
    pub n: usize,
    pub reps: usize,
    pub folds: usize,
    pub mode: NuisanceMode,
    pub a_star: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub nuisance: NuisanceConfig,
    /// Largest tolerated fraction of failed replications.
    pub max_failure_rate: f64,
}

impl CoverageConfig {
    pub fn new(dgp: Dgp, families: Vec<Family>, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            dgp,
            families,
            n,
            reps,
            folds: 5,
            mode: NuisanceMode::OraclePiFittedMu,
            a_star: dgp.default_a_star(),
            epsilon: DEFAULT_EPSILON,
            seed,
            nuisance: NuisanceConfig::default(),
            max_failure_rate: 0.01,
        }
    }

    pub fn spec(&self, family: Family) -> Result<PathSpec> {
        PathSpec::new(family, self.dgp.support(), self.a_star)?.with_epsilon(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::arg("reps must be at least 1"));
        }
        if self.families.is_empty() {
            return Err(Error::arg("at least one family is required"));
        }
        for &f in &self.families {
            if !f.has_eif() {
                return Err(Error::Unsupported(format!("no one-step estimator for the {} family", f.name())));
            }
            self.spec(f)?;
        }
        if self.folds < 2 && self.mode != NuisanceMode::AllOracle {
            return Err(Error::arg("cross-fitting needs at least 2 folds"));
        }
        Ok(())
    }
}

/// One replication's curves, one per family in configuration order.
pub type Replication = Vec<EffectCurve>;

/// Draws a dataset, fits nuisances and estimates every family.
pub fn run_replication(cfg: &CoverageConfig, tgrid: &TGrid, rep: usize) -> Result<Replication> {
    let seed = derive_seed(cfg.seed, rep as u64);
    let data = cfg.dgp.sample(cfg.n, seed)?;
    let truth = oracle_nuisances(&cfg.dgp);
    let nuis = match cfg.mode {
        NuisanceMode::AllOracle => Nuisances::Shared(truth),
        NuisanceMode::OraclePiFittedMu => {
            let plan = make_fold_plan(cfg.n, cfg.folds, seed)?;
            let fitter = OutcomeFitter { cfg: cfg.nuisance.clone(), pi: Arc::clone(&truth.pi) };
            Nuisances::CrossFit(crossfit(&data, plan, &fitter)?)
        }
        NuisanceMode::AllFitted => {
            let plan = make_fold_plan(cfg.n, cfg.folds, seed)?;
            Nuisances::CrossFit(crossfit(&data, plan, &SplineFitter { cfg: cfg.nuisance.clone() })?)
        }
    };
    let opts = EstimatorOptions { chi_square: false, ..EstimatorOptions::default() };
    cfg.families
        .iter()
        .map(|&f| Ok(one_step(&data, &cfg.spec(f)?, tgrid, &nuis, &opts)?.curve))
        .collect()
}

/// Mean estimate, coverage and mean interval width for one family at one t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyStats {
    pub family: Family,
    pub psi_mean: f64,
    pub coverage: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub t: f64,
    pub families: Vec<FamilyStats>,
}

impl CoverageRow {
    pub fn get(&self, family: Family) -> Option<&FamilyStats> {
        self.families.iter().find(|s| s.family == family)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub succeeded: usize,
    pub failed: usize,
}

/// Aggregates replications in index order. `truths[j]` belongs to `cfg.families[j]`.
///
/// Failed replications are excluded; more than `max_failure_rate` of them is an error.
pub fn aggregate_coverage(
    cfg: &CoverageConfig,
    tgrid: &TGrid,
    truths: &[Vec<TruePoint>],
    outcomes: Vec<Result<Replication>>,
) -> Result<CoverageReport> {
    if truths.len() != cfg.families.len() || truths.iter().any(|t| t.len() != tgrid.len()) {
        return Err(Error::Shape("one true curve per family over the grid is required".into()));
    }
    let total = outcomes.len();
    let mut failed = 0usize;
    let mut first: Option<Error> = None;
    let nf = cfg.families.len();
    let nt = tgrid.len();
    let mut psi = vec![0.0; nf * nt];
    let mut covered = vec![0usize; nf * nt];
    let mut width = vec![0.0; nf * nt];
    let mut ok = 0usize;
    for out in outcomes {
        match out {
            Ok(curves) => {
                ok += 1;
                for (j, curve) in curves.iter().enumerate() {
                    for (k, p) in curve.iter().enumerate() {
                        psi[j * nt + k] += p.psi_hat;
                        width[j * nt + k] += p.width();
                        covered[j * nt + k] += p.covers(truths[j][k].psi) as usize;
                    }
                }
            }
            Err(e) => {
                failed += 1;
                first.get_or_insert(e);
            }
        }
    }
    if ok == 0 || failed as f64 > cfg.max_failure_rate * total as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total,
            first: first.map(|e| format!("{e}")).unwrap_or_else(|| "no replications".into()),
        });
    }
    let m = ok as f64;
    let rows = tgrid
        .values()
        .iter()
        .enumerate()
        .map(|(k, &t)| CoverageRow {
            t,
            families: cfg
                .families
                .iter()
                .enumerate()
                .map(|(j, &family)| FamilyStats {
                    family,
                    psi_mean: psi[j * nt + k] / m,
                    coverage: covered[j * nt + k] as f64 / m,
                    width: width[j * nt + k] / m,
                })
                .collect(),
        })
        .collect();
    Ok(CoverageReport { rows, succeeded: ok, failed })
}

/// Sequential coverage experiment.
pub fn run_coverage(cfg: &CoverageConfig, tgrid: &TGrid, truths: &[Vec<TruePoint>]) -> Result<CoverageReport> {
    cfg.validate()?;
    let outcomes = (0..cfg.reps).map(|r| run_replication(cfg, tgrid, r)).collect();
    aggregate_coverage(cfg, tgrid, truths, outcomes)
}
