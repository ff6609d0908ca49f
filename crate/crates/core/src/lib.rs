//! Truncated stochastic-approximation learning for contaminated,
//! non-stationary streams.
//!
//! The core recursion lives in [`sa`]; [`learners`] instantiates it as
//! online EM for Gaussian mixtures ([`gmm`]) and as truncated SGD.
//! [`streamgen`] draws seeded test streams, [`metrics`] implements the
//! MSE and detection-AUC protocols, and [`bounds`] evaluates the
//! convergence bounds.

pub mod bounds;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod gmm;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod sa;
pub mod serde_float;
pub mod special;
pub mod streamgen;

pub use error::{Error, Result};
pub use gmm::{GmmParams, SuffStats};
pub use learners::{Algorithm, EmLearner, InitMode, StepReport};
pub use sa::{corollary1_rho, SaState, SraConfig, StepSchedule};
pub use streamgen::{LabeledSample, StreamSpec};
