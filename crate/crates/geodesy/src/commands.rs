//! The five subcommands.

use std::sync::Arc;

use rayon::prelude::*;

use geodesy_core::estimators::EstimatorOptions;
use geodesy_core::msm::{estimate_surface, fit_surface, select_from_profile, MsmModel, SurfaceNodes};
use geodesy_core::nuisance::{make_fold_plan, oracle_nuisances, Nuisances, OutcomeFitter, SplineFitter};
use geodesy_core::paths::PathAt;
use geodesy_core::simbench::{CoverageConfig, Dgp, NuisanceMode, TruePoint};
use geodesy_core::{Dataset, Family, PathSpec, QuadratureEngine, TGrid};

use crate::cache;
use crate::config::{
    DataSettings, EstimateJob, Job, MsmJob, Output, PathsJob, Resolved, SimulateJob, TruecurveJob,
};
use crate::error::CliError;
use crate::io::{fmt_f64, read_dataset, CsvOut};
use crate::parallel;

/// Column order of the simulation table.
const SIMULATE_FAMILIES: [Family; 3] = [Family::Wasserstein, Family::ExpTilt, Family::Hellinger];

/// Runs a validated configuration on the current thread pool.
pub fn run(resolved: &Resolved) -> Result<(), CliError> {
    let header = resolved.header();
    let out = &resolved.common.out;
    let seed = resolved.common.seed;
    match &resolved.job {
        Job::Paths(job) => paths(job, out, &header),
        Job::Estimate(job) => estimate(job, seed, out, &header),
        Job::Msm(job) => msm(job, seed, out, &header),
        Job::Simulate(job) => simulate(job, seed, out, &header),
        Job::Truecurve(job) => truecurve(job, seed, out, &header),
    }
}

fn spec_for(family: Family, dgp_support: geodesy_core::Support, a_star: f64, epsilon: f64) -> Result<PathSpec, CliError> {
    Ok(PathSpec::new(family, dgp_support, a_star)?.with_epsilon(epsilon)?)
}

fn paths(job: &PathsJob, out: &Output, header: &str) -> Result<(), CliError> {
    let pi = job.dgp.treatment_density();
    let engine = QuadratureEngine::new(job.nodes)?;
    let support = job.dgp.support();
    let step = support.width() / (job.points - 1) as f64;
    let grid: Vec<f64> = (0..job.points)
        .map(|k| if k + 1 == job.points { support.hi() } else { support.lo() + k as f64 * step })
        .collect();
    let mut w = CsvOut::create(out, Some(header), &["a", "t", "density", "family"])?;
    for &family in &job.families {
        let mut spec = spec_for(family, support, job.a_star, job.epsilon)?;
        if let Some(s) = job.split_point {
            spec = spec.with_split_point(s)?;
        }
        for &t in job.grid.values() {
            let path = PathAt::new(&spec, &pi, &job.x, t, &engine)?;
            for &a in &grid {
                w.fields([fmt_f64(a), fmt_f64(t), fmt_f64(path.density(a)), family.name().to_string()])?;
            }
        }
    }
    w.finish()
}

/// Reads the data and builds the requested nuisances.
fn load(src: &DataSettings, seed: u64) -> Result<(Dataset, Nuisances), CliError> {
    let support = src.support.or(src.oracle.map(|d| d.support()));
    let data = read_dataset(&src.data, support)?;
    if let Some(dgp) = src.oracle {
        if dgp.d() != data.d() {
            return Err(CliError::Usage(format!(
                "{} has {} covariates but the data has {}",
                dgp.name(),
                dgp.d(),
                data.d()
            )));
        }
    }
    let oracle = || src.oracle.map(|d| oracle_nuisances(&d)).expect("validated: modes using the truth name a design");
    let fit = &src.fit;
    let plan = || make_fold_plan(data.n(), fit.folds, seed);
    let nuis = match src.nuisance {
        NuisanceMode::AllOracle => Nuisances::Shared(oracle()),
        NuisanceMode::OraclePiFittedMu => {
            let fitter = OutcomeFitter { cfg: fit.nuisance.clone(), pi: Arc::clone(&oracle().pi) };
            Nuisances::CrossFit(parallel::crossfit(&data, plan()?, &fitter)?)
        }
        NuisanceMode::AllFitted => {
            let fitter = SplineFitter { cfg: fit.nuisance.clone() };
            Nuisances::CrossFit(parallel::crossfit(&data, plan()?, &fitter)?)
        }
    };
    Ok((data, nuis))
}

fn estimate(job: &EstimateJob, seed: u64, out: &Output, header: &str) -> Result<(), CliError> {
    let (data, nuis) = load(&job.source, seed)?;
    let spec = spec_for(job.family, data.support(), job.a_star, job.epsilon)?;
    let opts = EstimatorOptions {
        engine: QuadratureEngine::new(job.source.nodes)?,
        chi_square: job.chi_square,
        ..EstimatorOptions::default()
    };
    let result = parallel::one_step(&data, &spec, &job.grid, &nuis, &opts)?;
    let mut w = CsvOut::create(out, Some(header), &["t", "psi_hat", "se", "ci_lo", "ci_hi", "chi_sq", "clipping_rate"])?;
    for p in result.curve.iter() {
        let chi = if job.chi_square { p.chi_sq } else { f64::NAN };
        w.row(&[p.t, p.psi_hat, p.se, p.ci_lo, p.ci_hi, chi, result.clipping_rate])?;
    }
    w.finish()
}

fn msm(job: &MsmJob, seed: u64, out: &Output, header: &str) -> Result<(), CliError> {
    let (data, nuis) = load(&job.source, seed)?;
    let support = data.support();
    let model = MsmModel::new(job.basis.clone(), support, data.mean_y())?;
    let opts = EstimatorOptions {
        engine: QuadratureEngine::new(job.source.nodes)?,
        chi_square: false,
        ..EstimatorOptions::default()
    };
    let fits = job
        .t_cuts
        .par_iter()
        .map(|&t_cut| {
            let nodes = SurfaceNodes::default_for(support, t_cut)?;
            let est = estimate_surface(&data, &nuis, &nodes, &opts)?;
            let fit = fit_surface(&model, &est)?;
            let psi = fit.psi_star(job.a_star)?;
            Ok((fit, psi))
        })
        .collect::<Result<Vec<_>, geodesy_core::Error>>()?;
    let mut w = CsvOut::create(out, Some(header), &["t_cut", "psi_star", "trace_vt"])?;
    for (fit, psi) in &fits {
        w.row(&[fit.t_cut, *psi, fit.trace_vt().unwrap_or(f64::NAN)])?;
    }
    w.finish()?;
    let mut b = CsvOut::create(&Output::File(job.beta_out.clone()), Some(header), &["t_cut", "basis", "term", "beta"])?;
    for (fit, _) in &fits {
        for (j, beta) in fit.beta_t.iter().enumerate() {
            b.fields([fmt_f64(fit.t_cut), fit.basis(), (j + 1).to_string(), fmt_f64(*beta)])?;
        }
    }
    b.finish()?;
    if fits.len() > 1 {
        let profile = fits.iter().map(|(f, _)| (f.t_cut, f.trace_vt().unwrap_or(f64::INFINITY))).collect();
        let sel = select_from_profile(profile)?;
        eprintln!("smallest trace(V_t) at t_cut = {}", sel.t_star);
    }
    Ok(())
}

/// Key of a cached true curve.
fn truth_key(dgp: &Dgp, spec: &PathSpec, grid: &TGrid, mc_n: usize, seed: u64) -> String {
    let grid_text: Vec<String> = grid.values().iter().map(|&t| fmt_f64(t)).collect();
    cache::key_text(&[
        ("dgp", dgp.name().to_string()),
        ("family", spec.family.name().to_string()),
        ("a_star", fmt_f64(spec.a_star)),
        ("epsilon", fmt_f64(spec.epsilon)),
        ("split_point", fmt_f64(spec.split_point)),
        ("grid", grid_text.join(";")),
        ("mc_n", mc_n.to_string()),
        ("seed", seed.to_string()),
        ("nodes", QuadratureEngine::default().nodes().to_string()),
    ])
}

/// True curve from the cache when present, computed and stored otherwise.
pub fn cached_truth(
    dgp: &Dgp,
    spec: &PathSpec,
    grid: &TGrid,
    mc_n: usize,
    seed: u64,
    dir: Option<&std::path::Path>,
) -> Result<Vec<TruePoint>, CliError> {
    let key = truth_key(dgp, spec, grid, mc_n, seed);
    if let Some(hit) = dir.and_then(|d| cache::load(d, &key)) {
        return Ok(hit);
    }
    let curve = parallel::true_effect_curve(dgp, spec, grid, mc_n, seed, &QuadratureEngine::default())?;
    if let Some(d) = dir {
        if let Err(e) = cache::store(d, &key, &curve) {
            eprintln!("warning: could not cache the true curve in {}: {e}", d.display());
        }
    }
    Ok(curve)
}

fn simulate(job: &SimulateJob, seed: u64, out: &Output, header: &str) -> Result<(), CliError> {
    let mut cfg = CoverageConfig::new(job.dgp, job.families.clone(), job.n, job.reps, seed);
    cfg.folds = job.fit.folds;
    cfg.mode = job.mode;
    cfg.a_star = job.a_star;
    cfg.epsilon = job.epsilon;
    cfg.nuisance = job.fit.nuisance.clone();
    cfg.validate()?;
    let truths = job
        .families
        .iter()
        .map(|&f| cached_truth(&job.dgp, &cfg.spec(f)?, &job.grid, job.truth_mc, job.truth_seed, job.cache_dir.as_deref()))
        .collect::<Result<Vec<_>, _>>()?;
    let report = parallel::coverage(&cfg, &job.grid, &truths)?;
    if report.failed > 0 {
        eprintln!("warning: {} of {} replications failed and were excluded", report.failed, job.reps);
    }
    let mut columns = vec!["t".to_string()];
    for stat in ["psi", "coverage", "width"] {
        columns.extend(SIMULATE_FAMILIES.iter().map(|f| format!("{}_{stat}", f.label())));
    }
    let mut w = CsvOut::create(out, Some(header), &columns)?;
    for row in &report.rows {
        let mut fields = vec![fmt_f64(row.t)];
        for k in 0..3 {
            for f in SIMULATE_FAMILIES {
                fields.push(row.get(f).map_or(String::new(), |s| fmt_f64([s.psi_mean, s.coverage, s.width][k])));
            }
        }
        w.fields(fields)?;
    }
    w.finish()
}

fn truecurve(job: &TruecurveJob, seed: u64, out: &Output, header: &str) -> Result<(), CliError> {
    let spec = spec_for(job.family, job.dgp.support(), job.a_star, job.epsilon)?;
    let engine = QuadratureEngine::new(job.nodes)?;
    let curve = parallel::true_effect_curve(&job.dgp, &spec, &job.grid, job.mc_n, seed, &engine)?;
    let mut w = CsvOut::create(out, Some(header), &["t", "psi", "mc_se"])?;
    for p in &curve {
        w.row(&[p.t, p.psi, p.mc_se])?;
    }
    w.finish()
}
