//! Evaluation of human-annotated natural-language explanations by their
//! helpfulness to model prediction.
//!
//! Datasets are parsed into [`dataset::CanonicalInstance`]s, rendered into a
//! unified multiple-choice generation format ([`format`]), run through any
//! model runner speaking the file-based [`protocol`], scored
//! ([`scoring`]) and summarized as Simulatability and TREU scores
//! ([`metrics`]). [`experiments`] drives the run matrices.

pub mod dataset;
pub mod error;
pub mod format;
pub mod hash;
pub mod metrics;
pub mod scoring;

#[cfg(feature = "orchestration")]
pub mod cli;
#[cfg(feature = "orchestration")]
pub mod events;
#[cfg(feature = "orchestration")]
pub mod experiments;
#[cfg(feature = "orchestration")]
pub mod protocol;
#[cfg(feature = "orchestration")]
pub mod toy_runner;

pub use error::{Error, Result};
