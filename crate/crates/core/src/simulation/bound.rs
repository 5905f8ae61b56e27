use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DidError, Result};
use crate::estimators::efficient_influence;

use super::{draw_unit, replication_rng, DgpConfig, SimulatedUnit, StandardizationConstants};

const CHUNK: usize = 1 << 15;
/// Stream offset separating bound draws from study replications that share a seed.
const BOUND_STREAM_BASE: u64 = 1 << 48;

/// Monte Carlo estimate of the semiparametric efficiency bound `E[eta_e^2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub value: f64,
    /// Standard error of `value` across oracle draws.
    pub mc_se: f64,
    pub draws: usize,
    pub seed: u64,
}

/// Draws `oracle_draws` units from the design and averages the squared
/// efficient influence function evaluated at the true propensity, the true
/// control outcome evolution, `tau = 0` and the in-sample treated share.
///
/// The local misspecification of DGP5 vanishes as `n` grows, so its bound is
/// evaluated at the limiting design with `xi = delta = 0`.
pub fn efficiency_bound(
    cfg: &DgpConfig,
    oracle_draws: usize,
    seed: u64,
    consts: &StandardizationConstants,
) -> Result<BoundEstimate> {
    if oracle_draws < 2 {
        return Err(DidError::OutOfDomain(format!("need at least 2 oracle draws, got {oracle_draws}")));
    }
    let limit = DgpConfig::with_misspecification(cfg.dgp_id, cfg.n, 0.0, 0.0)?;
    let cfg = &limit;
    let chunks = oracle_draws.div_ceil(CHUNK);
    let units: Vec<SimulatedUnit> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = replication_rng(seed, BOUND_STREAM_BASE + c as u64);
            let len = CHUNK.min(oracle_draws - c * CHUNK);
            (0..len).map(move |_| draw_unit(cfg, consts, &mut rng)).collect::<Vec<_>>()
        })
        .collect();

    let d: Vec<bool> = units.iter().map(|u| u.d).collect();
    let p = d.iter().filter(|&&t| t).count() as f64 / d.len() as f64;
    let pi: Vec<f64> = units.iter().map(|u| u.pi).collect();
    let m: Vec<f64> = units.iter().map(|u| u.m_delta).collect();
    let dy: Vec<f64> = units.iter().map(|u| u.y1 - u.y0).collect();
    let eta = efficient_influence(&pi, &m, &dy, &d, 0.0, p)?;

    let value = eta.second_moment();
    let n = eta.eta_e.len() as f64;
    let var = eta.eta_e.iter().map(|e| (e * e - value).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BoundEstimate { value, mc_se: (var / n).sqrt(), draws: oracle_draws, seed })
}
