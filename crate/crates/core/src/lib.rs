//! Streaming community detection for timestamped interactions on a directed
//! network, using block Poisson and Hawkes point-process models.
//!
//! The crate provides:
//!
//! * [`model`]: events, edge lists, windows and the four intensity families;
//! * [`likelihood`]: direct log-likelihood evaluation;
//! * [`simulate`]: ground-truth generators;
//! * [`online`]: the one-pass windowed variational estimator;
//! * [`batch`]: full-data variational EM and a brute-force marginal likelihood;
//! * [`metrics`]: NMI, parameter recovery, link prediction, regret and a
//!   spectral count-matrix baseline.

pub mod batch;
pub mod error;
pub mod likelihood;
pub mod metrics;
pub mod model;
pub mod online;
pub mod simulate;
mod sufficient;
pub mod window;

pub use error::{Error, Result};
pub use model::{intensity, EdgeList, Event, LatentState, ModelKind, ModelParams, StepBasis, WindowConfig};
pub use sufficient::ParamGradient;
