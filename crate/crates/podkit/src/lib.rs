//! Probability-of-detection (POD) estimation from tables of simulated
//! non-destructive-testing responses.
//!
//! The crate covers the full workflow used in model-assisted POD studies:
//!
//! 1. [`doe`] — quasi-Monte Carlo designs of experiments (Sobol' sequences
//!    mapped through the input distributions);
//! 2. [`transform`] — Box-Cox linearization of the response by maximum
//!    likelihood;
//! 3. [`berens`] — linear-regression POD with exact posterior confidence
//!    bands, the binomial (empirical-residual) variant and residual
//!    diagnostics;
//! 4. [`chaos`] / [`kriging`] — polynomial-chaos and Gaussian-process
//!    surrogates with Monte Carlo POD curves and uncertainty bands;
//! 5. [`sensitivity`] — variance-based (Sobol') sensitivity indices for
//!    scalar outputs, for the whole POD curve, at a fixed defect size and
//!    for the inverse detectable-size function.
//!
//! [`data`] holds the dataset model and CSV persistence, [`pod`] the shared
//! curve/band containers and detectability summaries, [`synthetic`] the
//! forward-model generators used for end-to-end validation, and [`pipeline`]
//! the batch runner behind the `podkit` command-line tool.

pub mod berens;
pub mod chaos;
pub mod config;
pub mod data;
pub mod doe;
pub mod error;
pub mod kriging;
pub mod math;
pub mod pipeline;
pub mod pod;
pub mod sensitivity;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
