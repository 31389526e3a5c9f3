//! Intervention paths from an observed treatment density toward a point mass, with
//! one-step efficient estimators of the resulting effect curves.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod curve;
pub mod data;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod msm;
pub mod nuisance;
pub mod paths;
pub mod quadrature;
pub mod seed;
pub mod simbench;
pub mod special;
pub mod stats;

pub use curve::{EffectCurve, EffectPoint};
pub use data::{Dataset, Observation, Support};
pub use error::{Error, Result};
pub use grid::{make_tgrid, TGrid};
pub use model::{ConditionalDensity, OutcomeRegression, RowCache};
pub use paths::{Family, PathSpec};
pub use quadrature::{Quadrature, QuadratureEngine};
pub use seed::derive_seed;
