//! Numerical kernels: least squares on the comparison group, logistic
//! maximum likelihood, and the exact-balance propensity solver.

mod cbps;
mod link;
mod logistic;
mod ls;
mod qr;

pub use cbps::{cbps_balance, cbps_jacobian, cbps_solve, CBPS_MAX_HALVINGS, CBPS_MAX_ITER, CBPS_TOL};
pub use link::{LogisticLink, ETA_CLAMP};
pub use logistic::{
    logistic_hessian, logistic_loglik, logistic_mle, logistic_score, MLE_MAX_ITER, MLE_STEP_TOL, MLE_TOL,
};
pub use ls::{ols_control, weighted_least_squares, wls_cbps_gamma};
pub use qr::{first_dependent_column, PivotedQr};

use nalgebra::DVector;
use serde::Serialize;

use crate::panel::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropensityMethod {
    #[serde(rename = "ML")]
    MaximumLikelihood,
    #[serde(rename = "CBPS")]
    CovariateBalancing,
}

/// First-step propensity parameters and how they were obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub beta: DVector<f64>,
    pub method: PropensityMethod,
    pub converged: bool,
    pub iterations: usize,
    /// Max-abs of the estimating equations at `beta`.
    pub residual_norm: f64,
    /// Whether any linear predictor hit the `ETA_CLAMP` bound at the solution.
    pub clamped: bool,
}

impl PropensityFit {
    pub fn linear_predictor(&self, x: &DesignMatrix) -> DVector<f64> {
        x.matrix() * &self.beta
    }

    pub fn fitted(&self, x: &DesignMatrix) -> Vec<f64> {
        self.linear_predictor(x).iter().map(|&v| LogisticLink::prob(v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeKind {
    #[serde(rename = "OLS_control")]
    OlsControl,
    #[serde(rename = "WLS_cbps")]
    WlsCbps,
}

/// Linear model for outcome evolution fitted on the comparison group.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeFit {
    pub gamma: DVector<f64>,
    pub kind: OutcomeKind,
    /// Max-abs of `X'W(y - X gamma)` relative to the magnitude of the
    /// cross-moment terms.
    pub normal_residual: f64,
}

pub(crate) fn max_abs<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}
