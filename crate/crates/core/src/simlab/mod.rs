//! Simulation lab: Karhunen-Loève inputs, diagonal operators, functional
//! noise, and Monte Carlo experiments against the known truth.

pub mod basis;
pub mod experiments;
pub mod scenario;

pub use basis::Basis;
pub use experiments::{
    mc_coverage, mc_estimation_vs_prediction, mc_grid_refinement, mc_prediction_risk,
    mc_prediction_risk_with, rate_regression, replication_rng, CoverageReport, CoverageResult,
    Draw, EstimationVsPrediction, Functional, RateFit, RiskCell, RiskReport, STREAM_CV, STREAM_NEW,
    STREAM_NOISE, STREAM_X,
};
pub use scenario::{
    diagonal_operator, kl_draw, kl_sample, GridSpec, InputSpec, NoiseSpec, OperatorSpec, Scenario,
    SelectionRule, Truth,
};
