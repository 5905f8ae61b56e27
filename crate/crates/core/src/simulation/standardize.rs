use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DidError, Result};

/// Shipped constants, estimated from 10^7 draws.
pub const DEFAULT_CONSTANTS_TOML: &str = include_str!("../../data/standardization.toml");
/// Shipped constants for [`Z4Form::X1X4`], estimated from 10^7 draws.
pub const X1X4_CONSTANTS_TOML: &str = include_str!("../../data/standardization_x1x4.toml");

/// Smallest accepted number of oracle draws.
pub const MIN_ORACLE_DRAWS: u64 = 1_000_000;

const CHUNK: u64 = 1 << 16;

/// Which normals enter the fourth raw covariate `(20 + x_a + x4)^2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Z4Form {
    /// `(20 + x2 + x4)^2`.
    #[default]
    #[serde(rename = "x2+x4")]
    X2X4,
    /// `(20 + x1 + x4)^2`, the form found in widely used reference
    /// simulation code for this design.
    #[serde(rename = "x1+x4")]
    X1X4,
}

/// Population mean and standard deviation of the four raw covariates
/// `exp(x1/2)`, `10 + x2/(1 + exp(x1))`, `(0.6 + x1 x3/25)^3` and
/// `(20 + x2 + x4)^2` under `x ~ N(0, I_4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationConstants {
    pub mean: [f64; 4],
    pub sd: [f64; 4],
    pub seed: u64,
    pub draws: u64,
    #[serde(default)]
    pub z4_form: Z4Form,
}

impl StandardizationConstants {
    pub fn shipped() -> Self {
        Self::from_toml(DEFAULT_CONSTANTS_TOML).expect("shipped constants parse")
    }

    pub fn shipped_for(form: Z4Form) -> Self {
        let text = match form {
            Z4Form::X2X4 => DEFAULT_CONSTANTS_TOML,
            Z4Form::X1X4 => X1X4_CONSTANTS_TOML,
        };
        Self::from_toml(text).expect("shipped constants parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: StandardizationConstants = toml::from_str(text).map_err(|e| DidError::Format {
            path: "<constants>".into(),
            message: e.to_string(),
        })?;
        if c.sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) || c.mean.iter().any(|m| !m.is_finite()) {
            return Err(DidError::Format { path: "<constants>".into(), message: "invalid mean/sd".into() });
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("constants serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DidError::io(path, e))?;
        let c = Self::from_toml(&text).map_err(|e| match e {
            DidError::Format { message, .. } => DidError::Format { path: path.to_path_buf(), message },
            other => other,
        })?;
        Ok((c, text))
    }

    /// Maps raw covariates to standardized ones.
    #[inline]
    pub fn standardize(&self, raw: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|j| (raw[j] - self.mean[j]) / self.sd[j])
    }

    /// Standardized covariates `z` for normals `x`.
    #[inline]
    pub fn covariates(&self, x: [f64; 4]) -> [f64; 4] {
        self.standardize(raw_covariates_with(x, self.z4_form))
    }
}

/// Hex SHA-256 of a constants file's text.
pub fn constants_checksum(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[inline]
pub fn raw_covariates(x: [f64; 4]) -> [f64; 4] {
    raw_covariates_with(x, Z4Form::X2X4)
}

#[inline]
pub fn raw_covariates_with(x: [f64; 4], form: Z4Form) -> [f64; 4] {
    let a = match form {
        Z4Form::X2X4 => x[1],
        Z4Form::X1X4 => x[0],
    };
    [
        (0.5 * x[0]).exp(),
        10.0 + x[1] / (1.0 + x[0].exp()),
        (0.6 + x[0] * x[2] / 25.0).powi(3),
        (20.0 + a + x[3]).powi(2),
    ]
}

/// Running count/mean/M2 per coordinate, merged with Chan's formula.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: [f64; 4],
    m2: [f64; 4],
}

impl Moments {
    fn push(&mut self, z: [f64; 4]) {
        self.n += 1.0;
        for j in 0..4 {
            let delta = z[j] - self.mean[j];
            self.mean[j] += delta / self.n;
            self.m2[j] += delta * (z[j] - self.mean[j]);
        }
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let mut out = Moments { n, ..Default::default() };
        for j in 0..4 {
            let delta = other.mean[j] - self.mean[j];
            out.mean[j] = self.mean[j] + delta * other.n / n;
            out.m2[j] = self.m2[j] + other.m2[j] + delta * delta * self.n * other.n / n;
        }
        out
    }
}

/// Monte Carlo estimates of the raw-covariate means and standard deviations.
/// Draws are split into fixed-size chunks with independent streams, so the
/// result does not depend on the number of threads.
pub fn compute_standardization(oracle_draws: u64, seed: u64, form: Z4Form) -> Result<StandardizationConstants> {
    if oracle_draws < MIN_ORACLE_DRAWS {
        return Err(DidError::OutOfDomain(format!(
            "need at least {MIN_ORACLE_DRAWS} oracle draws, got {oracle_draws}"
        )));
    }
    let chunks = oracle_draws.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = CHUNK.min(oracle_draws - c * CHUNK);
            let mut m = Moments::default();
            for _ in 0..len {
                let x: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
                m.push(raw_covariates_with(x, form));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    Ok(StandardizationConstants {
        mean: total.mean,
        sd: std::array::from_fn(|j| (total.m2[j] / total.n).sqrt()),
        seed,
        draws: oracle_draws,
        z4_form: form,
    })
}
