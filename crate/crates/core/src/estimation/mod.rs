//! Target state filtering, short-horizon prediction, path fitting and the
//! interception standoff point.

mod ekf;
mod lemniscate;
mod predict;

pub use ekf::{ekf_predict, ekf_step, ekf_step_position, ekf_update, measurement_covariance, EkfState};
pub use lemniscate::{arc_between, fit_curve, standoff_point, CurveFit, StandoffParams};
pub use predict::{predict_ahead, Prediction};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("target at the curvature centre (radius {0} m)")]
    SingularDynamics(f64),
    #[error("not enough history ({have} of {need})")]
    NotReady { have: usize, need: usize },
    #[error("curve fit failed after {iterations} iterations (residual {residual_rms} m): {reason}")]
    FitFailed { residual_rms: f64, iterations: usize, reason: String },
    #[error("no standoff point inside the fence")]
    InfeasibleStandoff,
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// One exported estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub trace_p: f64,
}
