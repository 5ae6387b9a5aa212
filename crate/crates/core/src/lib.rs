//! Gaussian disordered systems at desk scale: models, exact Gibbs engines,
//! samplers, environment flows and localization diagnostics.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomicity;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod flows;
pub mod harness;
pub mod model;
pub mod models;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use exact::{ExactBudget, ExactGibbs, GibbsSummary, PolymerMarginals};
pub use model::{Environment, ModelKind, ModelSpec, Site, StateId};
pub use models::{build_model, MixedPSpin, MixedXi, ModelParams, Polymer, Rem, WalkKernel};
