//! Error type shared by every module.
//!
//! Variants split into three families that the command-line driver maps to
//! exit codes: configuration/domain problems, numerical breakdown, and I/O.

use thiserror::Error;

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The zero vector was passed where `TM \ 0` is required.
    #[error("zero tangent/cotangent vector: the norm is not smooth at the origin")]
    ZeroVector,

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The fundamental tensor failed to be positive definite.
    #[error("strong convexity violated at x = {x:?}, y = {y:?} (min eigenvalue {min_eigenvalue:e})")]
    StrongConvexity {
        x: [f64; 2],
        y: [f64; 2],
        min_eigenvalue: f64,
    },

    /// A sampled fiber value was not strictly positive.
    #[error("invalid norm: F^2 = {value:e} at x = {x:?}, theta = {theta}")]
    InvalidNorm { x: [f64; 2], theta: f64, value: f64 },

    /// Newton iteration for the Legendre transform did not converge.
    #[error("Legendre Newton iteration did not converge in {iterations} steps (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Flag spanned by nearly parallel vectors.
    #[error("degenerate flag: denominator {denominator:e}")]
    DegenerateFlag { denominator: f64 },

    /// A field-backed norm was queried away from the lattice sites.
    #[error("point {x:?} is not a lattice site of the field")]
    OffGrid { x: [f64; 2] },

    /// A pointwise quantity was requested outside the gradient mask.
    #[error("site {site} lies outside the gradient mask")]
    Masked { site: usize },

    /// Strong convexity lost during the flow.
    #[error("flow degeneration at t = {time}: site {site}, theta index {theta_index} ({detail})")]
    FlowDegeneration {
        time: f64,
        site: usize,
        theta_index: usize,
        detail: String,
    },

    /// The heat solution lost positivity.
    #[error("positivity lost at t = {time}, site {site} (u = {value:e}); reduce dt")]
    Positivity { time: f64, site: usize, value: f64 },

    /// Geodesic integration produced a non-finite state.
    #[error("geodesic integration failed: {0}")]
    Integration(String),

    /// The initial norm violates the vanishing S-curvature hypothesis.
    #[error("S-curvature gate: max |S| = {max_s:e} exceeds tolerance {tolerance:e}")]
    SCurvatureGate { max_s: f64, tolerance: f64 },

    /// Invalid configuration or unknown catalog entry.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StrongConvexity { .. }
                | Error::InvalidNorm { .. }
                | Error::NoConvergence { .. }
                | Error::DegenerateFlag { .. }
                | Error::FlowDegeneration { .. }
                | Error::Positivity { .. }
                | Error::Integration(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}
