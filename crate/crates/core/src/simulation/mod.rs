//! Monte Carlo designs DGP1 to DGP5, the study driver and the efficiency-bound
//! oracle.
//!
//! Every design draws `x ~ N(0, I_4)`, maps it to four nonlinear raw
//! covariates and standardizes those with population constants to obtain
//! the observed covariates `z`. Designs differ in whether the outcome and
//! propensity indices are evaluated at `z` (the working models are then
//! correct) or at `x` (misspecified); DGP5 perturbs both models by small
//! amounts `xi` and `delta`. The true ATT is zero throughout.

mod bound;
mod dgp;
mod standardize;
mod study;

pub use bound::{efficiency_bound, BoundEstimate};
pub use dgp::{
    draw_replication, draw_unit, f_or, f_ps, r_direction, u_direction, DgpConfig, Replication, SimulatedUnit,
    COVARIATE_NAMES, PROPENSITY_CEIL, PROPENSITY_FLOOR,
};
pub use standardize::{
    compute_standardization, constants_checksum, raw_covariates, raw_covariates_with, StandardizationConstants,
    Z4Form, DEFAULT_CONSTANTS_TOML, MIN_ORACLE_DRAWS, X1X4_CONSTANTS_TOML,
};
pub use study::{replication_rng, run_study, run_study_with_threads, MetricsRow, StudyConfig, StudyReport};
