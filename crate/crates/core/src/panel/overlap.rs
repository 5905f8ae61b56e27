use serde::Serialize;

use crate::error::{DidError, Result};

/// Controls with fitted propensity above this are counted as extreme.
pub const EXTREME_PROPENSITY: f64 = 0.99;

/// Advisory overlap diagnostics for a fitted propensity score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub min_pi: f64,
    pub max_pi: f64,
    pub extreme_controls: usize,
    pub max_odds_weight: f64,
}

pub fn overlap_report(pi_hat: &[f64], d: &[bool]) -> Result<OverlapReport> {
    if pi_hat.len() != d.len() {
        return Err(DidError::OutOfDomain(format!(
            "{} propensities for {} units",
            pi_hat.len(),
            d.len()
        )));
    }
    if let Some(p) = pi_hat.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(DidError::OutOfDomain(format!("propensity {p} outside (0, 1)")));
    }
    let min_pi = pi_hat.iter().copied().fold(f64::INFINITY, f64::min);
    let max_pi = pi_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let extreme_controls = pi_hat
        .iter()
        .zip(d)
        .filter(|(p, t)| !**t && **p > EXTREME_PROPENSITY)
        .count();
    let max_odds_weight = pi_hat.iter().map(|p| p / (1.0 - p)).fold(0.0, f64::max);
    Ok(OverlapReport { min_pi, max_pi, extreme_controls, max_odds_weight })
}
