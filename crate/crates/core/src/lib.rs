//! Interval-valued survey responses.
//!
//! Responses are closed intervals drawn on a continuous scale. This crate
//! extracts them from pen strokes, stores them in an append-only log,
//! aggregates them into agreement functions and runs the statistical battery
//! used to analyse them: bootstrap t-tests, repeated-measures ANOVA with
//! sphericity correction, permutation checks and REML fits of a linear
//! mixed model with crossed participant/item intercepts.

pub mod anova;
pub mod error;
pub mod iaa;
pub mod interval;
mod linalg;
pub mod mixed;
pub mod optim;
pub mod plot;
pub mod rng;
pub mod special;
pub mod stats;
pub mod survey;

pub use error::{Error, Result};
pub use iaa::AgreementFunction;
pub use interval::{Interval, IntervalSummary, ScaleSpec, Stroke};
