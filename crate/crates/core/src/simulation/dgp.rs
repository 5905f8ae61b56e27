use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{DidError, Result};
use crate::numopt::LogisticLink;
use crate::panel::PanelDataset;

use super::StandardizationConstants;

/// Bounds applied to the locally misspecified propensity, which can leave
/// (0, 1) once multiplied by `exp(xi u)`.
pub const PROPENSITY_FLOOR: f64 = 1e-6;
pub const PROPENSITY_CEIL: f64 = 1.0 - 1e-6;

/// Names of the standardized covariate columns in a simulated dataset.
pub const COVARIATE_NAMES: [&str; 4] = ["z1", "z2", "z3", "z4"];

/// Outcome index `210 + 27.4 w1 + 13.7 (w2 + w3 + w4)`.
#[inline]
pub fn f_or(w: &[f64; 4]) -> f64 {
    210.0 + 27.4 * w[0] + 13.7 * (w[1] + w[2] + w[3])
}

/// Propensity index `0.75 (-w1 + 0.5 w2 - 0.25 w3 - 0.1 w4)`.
#[inline]
pub fn f_ps(w: &[f64; 4]) -> f64 {
    0.75 * (-w[0] + 0.5 * w[1] - 0.25 * w[2] - 0.1 * w[3])
}

/// Direction of propensity misspecification, `-z1^2 + z2^2`.
#[inline]
pub fn u_direction(z: &[f64; 4]) -> f64 {
    -z[0] * z[0] + z[1] * z[1]
}

/// Direction of outcome misspecification, `2 z1^2 + 4 z2^2 + 3 z3^2 + z4^2`.
#[inline]
pub fn r_direction(z: &[f64; 4]) -> f64 {
    2.0 * z[0] * z[0] + 4.0 * z[1] * z[1] + 3.0 * z[2] * z[2] + z[3] * z[3]
}

/// Which of the two working models sees the raw normals `x` instead of the
/// standardized covariates `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Argument {
    Z,
    X,
}

/// One of the five simulation designs at a given sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DgpConfig {
    pub dgp_id: u8,
    pub n: usize,
    /// Propensity misspecification magnitude (DGP5 only).
    pub xi: f64,
    /// Outcome misspecification magnitude (DGP5 only).
    pub delta: f64,
}

impl DgpConfig {
    /// Design `dgp_id` with `xi = delta = n^-1/2` for DGP5 and zero otherwise.
    pub fn new(dgp_id: u8, n: usize) -> Result<Self> {
        let m = if dgp_id == 5 { (n as f64).powf(-0.5) } else { 0.0 };
        Self::with_misspecification(dgp_id, n, m, m)
    }

    pub fn with_misspecification(dgp_id: u8, n: usize, xi: f64, delta: f64) -> Result<Self> {
        if !(1..=5).contains(&dgp_id) {
            return Err(DidError::OutOfDomain(format!("DGP id must be 1..=5, got {dgp_id}")));
        }
        if n < 2 {
            return Err(DidError::OutOfDomain(format!("n must be at least 2, got {n}")));
        }
        if !xi.is_finite() || !delta.is_finite() {
            return Err(DidError::OutOfDomain("misspecification magnitudes must be finite".into()));
        }
        if dgp_id != 5 && (xi != 0.0 || delta != 0.0) {
            return Err(DidError::OutOfDomain("xi and delta apply to DGP5 only".into()));
        }
        Ok(DgpConfig { dgp_id, n, xi, delta })
    }

    fn outcome_argument(&self) -> Argument {
        if matches!(self.dgp_id, 3 | 4) { Argument::X } else { Argument::Z }
    }

    fn propensity_argument(&self) -> Argument {
        if matches!(self.dgp_id, 2 | 4) { Argument::X } else { Argument::Z }
    }

    pub fn description(&self) -> &'static str {
        match self.dgp_id {
            1 => "both working models correctly specified",
            2 => "outcome model correct, propensity model misspecified",
            3 => "propensity model correct, outcome model misspecified",
            4 => "both working models misspecified",
            _ => "both working models locally misspecified",
        }
    }
}

/// A simulated unit together with its true nuisance values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedUnit {
    pub z: [f64; 4],
    pub y0: f64,
    pub y1: f64,
    pub d: bool,
    /// True propensity after clamping.
    pub pi: f64,
    /// True `E[dy | covariates, d = 0]`.
    pub m_delta: f64,
    pub clamped: bool,
}

/// Draws one unit. Stream order: `x` (4 normals), `U`, the heterogeneity
/// noise, `eps0`, `eps1(0)`, `eps1(1)`.
pub fn draw_unit<R: RngCore + ?Sized>(cfg: &DgpConfig, consts: &StandardizationConstants, rng: &mut R) -> SimulatedUnit {
    let x: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let z = consts.covariates(x);
    let pick = |a: Argument| if a == Argument::X { &x } else { &z };

    let index = f_or(pick(cfg.outcome_argument()));
    let raw_pi = LogisticLink::prob(f_ps(pick(cfg.propensity_argument()))) * (cfg.xi * u_direction(&z)).exp();
    let pi = raw_pi.clamp(PROPENSITY_FLOOR, PROPENSITY_CEIL);
    let clamped = pi != raw_pi;

    let u: f64 = rng.random();
    let d = pi >= u;
    let heterogeneity = (if d { index } else { 0.0 }) + rng.sample::<f64, _>(StandardNormal);
    let eps0: f64 = rng.sample(StandardNormal);
    let eps1_untreated: f64 = rng.sample(StandardNormal);
    let eps1_treated: f64 = rng.sample(StandardNormal);

    let drift = cfg.delta * r_direction(&z);
    let y0 = index + heterogeneity + eps0 + drift;
    let y1_untreated = 2.0 * index + heterogeneity + eps1_untreated + 2.0 * drift;
    let y1_treated = 2.0 * index + heterogeneity + eps1_treated + 2.0 * drift;
    SimulatedUnit {
        z,
        y0,
        y1: if d { y1_treated } else { y1_untreated },
        d,
        pi,
        m_delta: index + drift,
        clamped,
    }
}

/// One simulated dataset. The true ATT is zero in every design.
#[derive(Debug, Clone)]
pub struct Replication {
    pub dataset: PanelDataset,
    pub true_att: f64,
    pub oracle_pi: Vec<f64>,
    pub oracle_m: Vec<f64>,
    /// Units whose propensity hit the clamp.
    pub clamped: usize,
}

pub fn draw_replication<R: RngCore + ?Sized>(
    cfg: &DgpConfig,
    consts: &StandardizationConstants,
    rng: &mut R,
) -> Replication {
    let n = cfg.n;
    let (mut y0, mut y1, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut zs: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n));
    let (mut oracle_pi, mut oracle_m) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut clamped = 0;
    for _ in 0..n {
        let u = draw_unit(cfg, consts, rng);
        y0.push(u.y0);
        y1.push(u.y1);
        d.push(u.d);
        for j in 0..4 {
            zs[j].push(u.z[j]);
        }
        oracle_pi.push(u.pi);
        oracle_m.push(u.m_delta);
        clamped += usize::from(u.clamped);
    }
    let covariates = COVARIATE_NAMES.iter().map(|s| s.to_string()).zip(zs).collect();
    let dataset = PanelDataset::new(y0, y1, d, covariates).expect("simulated data are finite");
    Replication { dataset, true_att: 0.0, oracle_pi, oracle_m, clamped }
}
