//! Simulation designs, true effect curves and coverage experiments.

mod coverage;
mod dgp;
mod truth;

pub use coverage::{
    aggregate_coverage, run_coverage, run_replication, CoverageConfig, CoverageReport, CoverageRow,
    FamilyStats, NuisanceMode, Replication,
};
pub use dgp::{true_dose_response_sim7, Dgp, DgpName, OracleDensity, OracleOutcome};
pub use truth::{
    chi_sq_profile, conditional_chi_square, conditional_effects, summarize_truth, true_effect_curve,
    truth_covariates, TruePoint,
};
