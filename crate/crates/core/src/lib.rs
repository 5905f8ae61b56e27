//! Difference-in-differences estimators of the average treatment effect on
//! the treated (ATT) for two-period panel data.
//!
//! Four estimators are provided: outcome regression ([`estimators::att_or`]),
//! inverse probability weighting ([`estimators::att_ipw`]), augmented IPW
//! ([`estimators::att_aipw`]) and the covariate balancing propensity score
//! estimator ([`estimators::att_cbps`]), whose propensity parameters are
//! chosen so that odds-weighted comparison units exactly reproduce the
//! treated covariate totals. Each returns an [`estimators::AttResult`] with
//! an influence-function based variance and a 95% normal interval.
//!
//! [`simulation`] holds the five Monte Carlo designs and the study driver;
//! [`cli`] the command implementations behind the `did-cbps` binary.

pub mod error;
pub mod estimators;
pub mod numopt;
pub mod panel;
pub mod simulation;
pub mod cli;

pub use error::{DidError, Result};
