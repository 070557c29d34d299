//! Numerical laboratory for Finsler geometry on the flat 2-torus.
//!
//! The crate computes the tensor calculus of a Finsler norm (fundamental and
//! Cartan tensors, Legendre transform, spray, Chern connection, flag and
//! Ricci curvature, Busemann-Hausdorff measure, S-curvature, weighted Ricci
//! curvature), evolves sampled norms by the Finsler-Ricci flow
//! `d/dt F^2 = -2 Ric`, solves the nonlinear heat equation along the flow, and
//! checks differential and integrated Harnack estimates as residuals.
//!
//! Modules, bottom-up:
//!
//! * [`jet`]: truncated Taylor arithmetic used for exact fiber derivatives
//! * [`norm`]: the [`norm::FinslerNorm`] interface, catalog and registry
//! * [`bundle`]: sphere-bundle sampling and the field-backed norm
//! * [`geometry`]: spray, connection, curvature
//! * [`measure`]: measure density, S-curvature, `Ric_inf`
//! * [`analysis`]: gradient, Hessian, Laplacians, Bochner residual
//! * [`evolution`]: flow and heat stepping, trajectories, lemma residuals
//! * [`harnack`]: Harnack bounds and checks

pub mod analysis;
pub mod bundle;
pub mod config;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod harnack;
pub mod jet;
pub mod measure;
pub mod norm;
pub mod presets;
pub mod tensor;

pub use error::{Error, Result};

/// Tool version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
