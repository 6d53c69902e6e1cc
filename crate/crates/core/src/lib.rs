//! Functional linear regression with functional inputs and outputs.
//!
//! The model is `Y = S X + ε` with `X`, `Y` random curves on `[0, 1]` and `S`
//! an integral operator. The operator is estimated by `Ŝ = Δ_n Γ_n†`, where
//! `Γ_n†` inverts the empirical covariance on its top `k` principal
//! directions. Around that estimator the crate provides dimension selection,
//! asymptotic confidence intervals for the predictor, and a simulation lab.

pub mod curves;
pub mod error;
pub mod linalg;
pub mod estimator;
pub mod inference;
pub mod io;
pub mod operators;
pub mod profiles;
pub mod selection;
pub mod simlab;

pub use error::{Error, Result};
