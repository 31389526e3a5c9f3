//! Influence functions, one-step and plug-in estimators, remainder diagnostic.

mod eif;
mod onestep;
mod remainder;

pub use eif::{
    coefficients, dtheta_conditional_mean, eif_general_tilt, eif_hellinger, eif_wasserstein,
    EifRecord, HellingerMoments, TiltIntegrals,
};
pub use onestep::{
    eif_rows, one_step, one_step_exp_tilt, one_step_hellinger, one_step_wasserstein, plug_in,
    plug_in_curve, plug_in_rows, summarize, EstimateResult, EstimatorOptions, RowEif,
};
pub use remainder::{remainder_diagnostic, PerturbedDensity, PerturbedOutcome};
