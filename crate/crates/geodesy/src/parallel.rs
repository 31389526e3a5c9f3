//! Parallel drivers over the sequential building blocks of the core crate.
//!
//! Work is split into independent pieces whose results are collected in index order,
//! so every output matches the sequential computation bit for bit at any thread count.

use rayon::prelude::*;

use geodesy_core::estimators::{eif_rows, summarize, EstimateResult, EstimatorOptions};
use geodesy_core::nuisance::{CrossFit, FoldPlan, NuisanceFitter, Nuisances};
use geodesy_core::simbench::{
    aggregate_coverage, conditional_effects, run_replication, summarize_truth, truth_covariates, CoverageConfig,
    CoverageReport, Dgp, TruePoint,
};
use geodesy_core::{Dataset, Error, PathSpec, QuadratureEngine, Result, TGrid};

/// Rows per task of the influence-function pass.
const ROW_CHUNK: usize = 64;

/// Covariate draws per task of the truth pass.
const TRUTH_CHUNK: usize = 256;

/// Runs `f` on a pool of `threads` workers; 0 means one per core.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> std::result::Result<T, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    Ok(pool.install(f))
}

/// Cross-fitting with the folds fitted concurrently.
pub fn crossfit(data: &Dataset, plan: FoldPlan, fitter: &dyn NuisanceFitter) -> Result<CrossFit> {
    if plan.n() != data.n() {
        return Err(Error::Shape(format!("fold plan has {} rows, data {}", plan.n(), data.n())));
    }
    let pairs = plan
        .training_sets(data)
        .par_iter()
        .enumerate()
        .map(|(j, train)| fitter.fit(train).map_err(|e| Error::Fold { fold: j, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    CrossFit::from_pairs(plan, pairs)
}

/// One-step estimate with rows processed concurrently.
pub fn one_step(
    data: &Dataset,
    spec: &PathSpec,
    tgrid: &TGrid,
    nuis: &Nuisances,
    opts: &EstimatorOptions,
) -> Result<EstimateResult> {
    let n = data.n();
    let starts: Vec<usize> = (0..n).step_by(ROW_CHUNK).collect();
    let chunks = starts
        .par_iter()
        .map(|&s| eif_rows(data, spec, tgrid, nuis, opts, s..(s + ROW_CHUNK).min(n)))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<_> = chunks.into_iter().flatten().collect();
    summarize(tgrid, &rows, nuis.folds())
}

/// True effect curve with covariate draws processed concurrently.
pub fn true_effect_curve(
    dgp: &Dgp,
    spec: &PathSpec,
    tgrid: &TGrid,
    mc_n: usize,
    seed: u64,
    engine: &QuadratureEngine,
) -> Result<Vec<TruePoint>> {
    let d = dgp.d();
    let xs = truth_covariates(dgp, mc_n, seed);
    let chunks = xs
        .par_chunks(TRUTH_CHUNK * d)
        .map(|block| block.chunks(d).map(|x| conditional_effects(dgp, spec, tgrid, x, engine)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let rows: Vec<Vec<f64>> = chunks.into_iter().flatten().collect();
    summarize_truth(tgrid, &rows)
}

/// Coverage experiment with replications run concurrently.
pub fn coverage(cfg: &CoverageConfig, tgrid: &TGrid, truths: &[Vec<TruePoint>]) -> Result<CoverageReport> {
    cfg.validate()?;
    let outcomes: Vec<_> = (0..cfg.reps).into_par_iter().map(|r| run_replication(cfg, tgrid, r)).collect();
    aggregate_coverage(cfg, tgrid, truths, outcomes)
}
