//! The four DID ATT estimators and their variance estimators.

mod efficient;
mod sandwich;

pub use efficient::{efficient_influence, EfficientInfluence};
pub use sandwich::{sandwich, sandwich_variance, DidMoments, MomentStack, PropensityMoment, Sandwich};

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{DidError, Result};
use crate::numopt::{cbps_solve, logistic_mle, ols_control, wls_cbps_gamma, LogisticLink, OutcomeFit, PropensityFit};
use crate::panel::{check_groups, DesignMatrix};

/// Normal critical value for the reported 95% intervals.
pub const CRITICAL_VALUE: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "IPW")]
    Ipw,
    #[serde(rename = "OR")]
    Or,
    #[serde(rename = "AIPW")]
    Aipw,
    #[serde(rename = "CBPS")]
    Cbps,
}

impl Method {
    /// Row order used in the simulation tables.
    pub const ALL: [Method; 4] = [Method::Ipw, Method::Or, Method::Aipw, Method::Cbps];

    pub fn label(self) -> &'static str {
        match self {
            Method::Ipw => "IPW",
            Method::Or => "OR",
            Method::Aipw => "AIPW",
            Method::Cbps => "CBPS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = DidError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Method::Or),
            "ipw" => Ok(Method::Ipw),
            "aipw" => Ok(Method::Aipw),
            "cbps" => Ok(Method::Cbps),
            other => Err(DidError::OutOfDomain(format!("unknown method `{other}`"))),
        }
    }
}

/// Point estimate, variance and interval for one estimator.
#[derive(Debug, Clone)]
pub struct AttResult {
    pub method: Method,
    pub tau: f64,
    /// Estimated variance of `sqrt(n)(tau_hat - tau)`.
    pub asy_var: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Estimated per-unit influence values; `asy_var` is their mean square.
    pub influence: Vec<f64>,
    pub propensity: Option<PropensityFit>,
    pub outcome: Option<OutcomeFit>,
}

impl AttResult {
    fn new(
        method: Method,
        tau: f64,
        influence: Vec<f64>,
        propensity: Option<PropensityFit>,
        outcome: Option<OutcomeFit>,
    ) -> Self {
        let n = influence.len() as f64;
        let asy_var = influence.iter().map(|v| v * v).sum::<f64>() / n;
        let se = (asy_var / n).sqrt();
        AttResult {
            method,
            tau,
            asy_var,
            se,
            ci_low: tau - CRITICAL_VALUE * se,
            ci_high: tau + CRITICAL_VALUE * se,
            influence,
            propensity,
            outcome,
        }
    }

    pub fn n(&self) -> usize {
        self.influence.len()
    }

    pub fn ci_length(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// Runs one estimator.
pub fn estimate(method: Method, x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<AttResult> {
    match method {
        Method::Or => att_or(x, dy, d),
        Method::Ipw => att_ipw(x, dy, d),
        Method::Aipw => att_aipw(x, dy, d),
        Method::Cbps => att_cbps(x, dy, d),
    }
}

/// Outcome regression: treated mean of `dy - x'gamma_ols`, with a sandwich
/// variance over the control normal equations, `d - p` and the ATT moment.
pub fn att_or(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<AttResult> {
    validate(x, dy, d)?;
    let ols = ols_control(x, dy, d)?;
    let fitted = x.matrix() * &ols.gamma;
    let (mut sum, mut n1) = (0.0, 0usize);
    for i in (0..d.len()).filter(|&i| d[i]) {
        sum += dy[i] - fitted[i];
        n1 += 1;
    }
    let tau = sum / n1 as f64;
    let stack = DidMoments { x, dy, d, propensity: PropensityMoment::None, outcome: true };
    let theta = stack.theta(None, Some(&ols.gamma), treated_share(d), tau);
    let influence = sandwich(&stack, &theta)?.influence(&stack, &theta, stack.tau_index());
    Ok(AttResult::new(Method::Or, tau, influence, None, Some(ols)))
}

/// Abadie's IPW estimator with logistic ML propensity scores; sandwich
/// variance over the logistic score, `d - p` and the ATT moment.
pub fn att_ipw(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<AttResult> {
    validate(x, dy, d)?;
    let ml = logistic_mle(x, d)?;
    let tau = weighted_att(x, dy, d, &ml.beta, None);
    let stack = DidMoments { x, dy, d, propensity: PropensityMoment::MaximumLikelihood, outcome: false };
    let theta = stack.theta(Some(&ml.beta), None, treated_share(d), tau);
    let influence = sandwich(&stack, &theta)?.influence(&stack, &theta, stack.tau_index());
    Ok(AttResult::new(Method::Ipw, tau, influence, Some(ml), None))
}

/// Doubly robust AIPW: ML propensity weights applied to OLS residuals, with
/// the plug-in influence-function variance.
pub fn att_aipw(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<AttResult> {
    validate(x, dy, d)?;
    let ml = logistic_mle(x, d)?;
    let ols = ols_control(x, dy, d)?;
    let tau = weighted_att(x, dy, d, &ml.beta, Some(&ols.gamma));
    let influence = plug_in_influence(x, dy, d, &ml.beta, &ols.gamma, tau);
    Ok(AttResult::new(Method::Aipw, tau, influence, Some(ml), Some(ols)))
}

/// Covariate balancing estimator: exact-balance propensity weights applied to
/// `dy`. The variance plugs in the odds-weighted control regression, which
/// does not affect the point estimate.
pub fn att_cbps(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<AttResult> {
    validate(x, dy, d)?;
    let fit = cbps_solve(x, d)?;
    let tau = weighted_att(x, dy, d, &fit.beta, None);
    let wls = wls_cbps_gamma(x, dy, d, &fit.beta)?;
    let influence = plug_in_influence(x, dy, d, &fit.beta, &wls.gamma, tau);
    Ok(AttResult::new(Method::Cbps, tau, influence, Some(fit), Some(wls)))
}

/// `(1/n) sum (d_i - pi_i) / (dbar (1 - pi_i)) (dy_i - x_i'gamma)` with
/// `pi_i = pi(x_i'beta)` and `gamma = 0` when absent.
pub fn weighted_att(x: &DesignMatrix, dy: &[f64], d: &[bool], beta: &DVector<f64>, gamma: Option<&DVector<f64>>) -> f64 {
    let eta = x.matrix() * beta;
    let fitted = gamma.map(|g| x.matrix() * g);
    let dbar = treated_share(d);
    let n = d.len() as f64;
    (0..d.len())
        .map(|i| {
            let resid = dy[i] - fitted.as_ref().map_or(0.0, |f| f[i]);
            ipw_weight(eta[i], d[i]) * resid
        })
        .sum::<f64>()
        / (n * dbar)
}

/// Plug-in influence values
/// `(d - pi)/(dbar (1 - pi)) (dy - x'gamma) - d tau / dbar`.
pub fn plug_in_influence(
    x: &DesignMatrix,
    dy: &[f64],
    d: &[bool],
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
    tau: f64,
) -> Vec<f64> {
    let eta = x.matrix() * beta;
    let fitted = x.matrix() * gamma;
    let dbar = treated_share(d);
    (0..d.len())
        .map(|i| {
            let di = if d[i] { 1.0 } else { 0.0 };
            (ipw_weight(eta[i], d[i]) * (dy[i] - fitted[i]) - di * tau) / dbar
        })
        .collect()
}

/// Sandwich variance of the AIPW estimator over the logistic score, control
/// normal equations, `d - p` and the ATT moment. Reported as a diagnostic
/// next to the plug-in variance of [`att_aipw`].
pub fn aipw_sandwich_variance(x: &DesignMatrix, dy: &[f64], d: &[bool], fit: &AttResult) -> Result<f64> {
    let (Some(ps), Some(or)) = (&fit.propensity, &fit.outcome) else {
        return Err(DidError::OutOfDomain("AIPW result without nuisance fits".into()));
    };
    let stack = DidMoments { x, dy, d, propensity: PropensityMoment::MaximumLikelihood, outcome: true };
    let theta = stack.theta(Some(&ps.beta), Some(&or.gamma), treated_share(d), fit.tau);
    sandwich_variance(&stack, &theta, stack.tau_index())
}

/// `(d - pi)/(1 - pi)`: 1 for treated units, minus the odds for controls.
#[inline]
fn ipw_weight(eta: f64, treated: bool) -> f64 {
    if treated { 1.0 } else { -LogisticLink::odds(eta) }
}

pub(crate) fn treated_share(d: &[bool]) -> f64 {
    d.iter().filter(|&&t| t).count() as f64 / d.len() as f64
}

fn validate(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<()> {
    if dy.len() != x.nrows() || d.len() != x.nrows() {
        return Err(DidError::OutOfDomain(format!(
            "design has {} rows but dy has {} and d has {}",
            x.nrows(),
            dy.len(),
            d.len()
        )));
    }
    if let Some(v) = dy.iter().find(|v| !v.is_finite()) {
        return Err(DidError::OutOfDomain(format!("non-finite outcome change {v}")));
    }
    check_groups(d)
}
