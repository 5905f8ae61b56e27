//! Covariate balancing versus maximum likelihood propensity scores on one
//! simulated dataset: balance residuals, the control weight mass and the
//! invariance of the CBPS estimate to the outcome-model coefficients.
//!
//! ```text
//! cargo run --release --example cbps_balance -- [dgp] [n] [seed]
//! ```

use did_cbps::estimators::{att_aipw, att_cbps, weighted_att};
use did_cbps::numopt::{cbps_balance, cbps_solve, logistic_mle, LogisticLink};
use did_cbps::panel::{build_design, CovariateSpec};
use did_cbps::simulation::{draw_replication, replication_rng, DgpConfig, StandardizationConstants, COVARIATE_NAMES};
use nalgebra::DVector;

fn main() -> did_cbps::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().expect("integer argument")).collect();
    let cfg = DgpConfig::new(*args.first().unwrap_or(&4) as u8, *args.get(1).unwrap_or(&1000) as usize)?;
    let seed = *args.get(2).unwrap_or(&1);
    let sim = draw_replication(&cfg, &StandardizationConstants::shipped(), &mut replication_rng(seed, 0));
    let ds = &sim.dataset;
    let x = build_design(ds, &CovariateSpec::linear(&COVARIATE_NAMES)?)?;
    let dy = ds.delta_y();
    println!("DGP{} ({}), n = {}, {} treated", cfg.dgp_id, cfg.description(), ds.n(), ds.n_treated());

    for (label, fit) in [("ML", logistic_mle(&x, ds.d())?), ("CBPS", cbps_solve(&x, ds.d())?)] {
        let g = cbps_balance(&x, ds.d(), &fit.beta);
        let mass: f64 = (0..ds.n())
            .filter(|&i| !ds.d()[i])
            .map(|i| LogisticLink::odds((x.matrix().row(i) * &fit.beta)[0]))
            .sum();
        println!(
            "{label:<5} iterations {:>2}  max balance residual {:.3e}  control odds mass {:.4} (treated {})",
            fit.iterations,
            g.amax(),
            mass,
            ds.n_treated()
        );
    }

    let cbps = att_cbps(&x, &dy, ds.d())?;
    let aipw = att_aipw(&x, &dy, ds.d())?;
    println!("CBPS tau = {:.4}, AIPW tau = {:.4} (true ATT 0)", cbps.tau, aipw.tau);

    // Balancing weights make the weighted contrast blind to any linear
    // outcome adjustment.
    let beta = &cbps.propensity.as_ref().expect("CBPS fits a propensity").beta;
    for scale in [0.0, 1.0, -250.0] {
        let gamma = DVector::from_fn(x.ncols(), |j, _| scale * (j as f64 + 1.0));
        println!("gamma = {scale:>7} * (1..k): tau = {:.10}", weighted_att(&x, &dy, ds.d(), beta, Some(&gamma)));
    }
    Ok(())
}
