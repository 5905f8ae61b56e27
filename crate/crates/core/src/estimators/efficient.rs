use crate::error::{DidError, Result};

/// Per-unit efficient influence values for the ATT under known nuisances.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficientInfluence {
    pub eta_e: Vec<f64>,
}

impl EfficientInfluence {
    pub fn mean(&self) -> f64 {
        self.eta_e.iter().sum::<f64>() / self.eta_e.len() as f64
    }

    /// Sample second moment, the Monte Carlo estimate of the efficiency bound.
    pub fn second_moment(&self) -> f64 {
        self.eta_e.iter().map(|v| v * v).sum::<f64>() / self.eta_e.len() as f64
    }
}

/// `eta_i = (d_i - pi_i) / (p (1 - pi_i)) (dy_i - m_i) - d_i tau / p` with
/// oracle propensity `pi` and oracle control outcome evolution `m`.
pub fn efficient_influence(
    oracle_pi: &[f64],
    oracle_m: &[f64],
    dy: &[f64],
    d: &[bool],
    tau: f64,
    p: f64,
) -> Result<EfficientInfluence> {
    let n = d.len();
    if oracle_pi.len() != n || oracle_m.len() != n || dy.len() != n {
        return Err(DidError::OutOfDomain("oracle inputs differ in length".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(DidError::OutOfDomain(format!("treated share {p} outside (0, 1)")));
    }
    if let Some(pi) = oracle_pi.iter().find(|pi| !(**pi > 0.0 && **pi < 1.0)) {
        return Err(DidError::OutOfDomain(format!("propensity {pi} outside (0, 1)")));
    }
    let eta_e = (0..n)
        .map(|i| {
            let di = if d[i] { 1.0 } else { 0.0 };
            let pi = oracle_pi[i];
            (di - pi) / (p * (1.0 - pi)) * (dy[i] - oracle_m[i]) - di * tau / p
        })
        .collect();
    Ok(EfficientInfluence { eta_e })
}
