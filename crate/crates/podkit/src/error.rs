//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by dataset handling, fitting and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A declared CSV column is missing from the file header.
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    /// A cell could not be parsed as a number.
    #[error("parse error at row {row}, column `{column}`: `{value}`")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    /// Dataset content violates an invariant (non-finite value, absent
    /// required cell, inconsistent row length, ...).
    #[error("data error: {0}")]
    Data(String),

    /// An input-distribution specification is invalid, or a conditional
    /// interval realized as empty.
    #[error("input spec error: {0}")]
    Spec(String),

    /// A caller-supplied argument is out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested Sobol' dimension exceeds the direction-number table.
    #[error("unsupported dimension {dim}: direction numbers available up to {max}")]
    UnsupportedDimension { dim: usize, max: usize },

    /// Regression design matrix is singular or rank deficient.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// Not enough observations for the requested operation.
    #[error("insufficient data: {op} requires at least {needed} rows, got {got}")]
    InsufficientData {
        op: &'static str,
        needed: usize,
        got: usize,
    },

    /// The least-squares problem has more parameters than observations.
    #[error("underdetermined fit: {n} observations for {p} coefficients")]
    Underdetermined { n: usize, p: usize },

    /// A leave-one-out leverage reached one; the shortcut is undefined.
    #[error("leverage error: observation {index} has leverage ~1")]
    Leverage { index: usize },

    /// Covariance factorization failed even after the jitter ladder.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Hyper-parameter search failed to produce a usable optimum.
    #[error("fit error: {0}")]
    Fit(String),

    /// A POD curve never attains the requested probability level.
    #[error("level {level} not attained: maximum POD reached is {max_pod}")]
    NotAttained { level: f64, max_pod: f64 },

    /// The output variance is (numerically) zero; indices are undefined.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    /// The POD-curve dispersion D is (numerically) zero.
    #[error("degenerate dispersion: {0}")]
    DegenerateDispersion(String),

    /// Too many Monte Carlo rows were rejected during inverse-POD sampling.
    #[error("coverage error: {rejected} of {total} sampled rows never attain the level")]
    Coverage { rejected: usize, total: usize },

    /// Run-configuration validation failure; `field` names the culprit.
    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
