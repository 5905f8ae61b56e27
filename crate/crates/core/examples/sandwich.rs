//! Stacked estimating equations and sandwich variances. Compares the
//! sandwich and plug-in influence-function variances of the AIPW estimator
//! and shows the stacked covariance for the OR estimator.
//!
//! ```text
//! cargo run --release --example sandwich -- [dgp] [n] [seed]
//! ```

use did_cbps::estimators::{aipw_sandwich_variance, att_aipw, att_or, sandwich, DidMoments, PropensityMoment};
use did_cbps::panel::{build_design, CovariateSpec};
use did_cbps::simulation::{draw_replication, replication_rng, DgpConfig, StandardizationConstants, COVARIATE_NAMES};

fn main() -> did_cbps::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().expect("integer argument")).collect();
    let cfg = DgpConfig::new(*args.first().unwrap_or(&1) as u8, *args.get(1).unwrap_or(&1000) as usize)?;
    let seed = *args.get(2).unwrap_or(&1);
    let sim = draw_replication(&cfg, &StandardizationConstants::shipped(), &mut replication_rng(seed, 0));
    let ds = &sim.dataset;
    let x = build_design(ds, &CovariateSpec::linear(&COVARIATE_NAMES)?)?;
    let dy = ds.delta_y();
    let p = ds.n_treated() as f64 / ds.n() as f64;

    let or = att_or(&x, &dy, ds.d())?;
    let stack = DidMoments { x: &x, dy: &dy, d: ds.d(), propensity: PropensityMoment::None, outcome: true };
    let theta = stack.theta(None, Some(&or.outcome.as_ref().expect("OR fits an outcome model").gamma), p, or.tau);
    let s = sandwich(&stack, &theta)?;
    let t = stack.tau_index();
    println!("OR: tau = {:.4}, Asy.V = {:.4}", or.tau, or.asy_var);
    println!("    stacked parameters (gamma, p, tau) = {}", theta.len());
    println!("    sandwich diagonal for p and tau: {:.4} {:.4}", s.cov[(t - 1, t - 1)], s.cov[(t, t)]);

    let aipw = att_aipw(&x, &dy, ds.d())?;
    println!(
        "AIPW: tau = {:.4}, plug-in Asy.V = {:.4}, full sandwich Asy.V = {:.4}",
        aipw.tau,
        aipw.asy_var,
        aipw_sandwich_variance(&x, &dy, ds.d(), &aipw)?
    );
    Ok(())
}
