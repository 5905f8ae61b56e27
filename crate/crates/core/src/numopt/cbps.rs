use nalgebra::{DMatrix, DVector};

use crate::error::{DidError, Result};
use crate::panel::{check_groups, DesignMatrix, RANK_TOLERANCE};

use super::logistic::{rank_error, weighted_gram, POLISH_STEPS};
use super::{logistic_mle, max_abs, first_dependent_column, LogisticLink, PropensityFit, PropensityMethod, ETA_CLAMP};

/// Balance tolerance, multiplied by [`DesignMatrix::scale`].
pub const CBPS_TOL: f64 = 1e-9;
pub const CBPS_MAX_ITER: usize = 200;
pub const CBPS_MAX_HALVINGS: usize = 30;

/// Balance conditions `g(b) = (1/n) sum (d_i - pi_i) / (1 - pi_i) x_i`.
///
/// For the logistic link `(d - pi)/(1 - pi)` is `1` for treated units and
/// `-exp(x'b)` for controls, so `g` is treated covariate totals minus
/// odds-weighted control totals.
pub fn cbps_balance(x: &DesignMatrix, d: &[bool], beta: &DVector<f64>) -> DVector<f64> {
    let eta = x.matrix() * beta;
    let c = DVector::from_iterator(
        d.len(),
        eta.iter().zip(d).map(|(&v, &t)| if t { 1.0 } else { -LogisticLink::odds(v) }),
    );
    x.matrix().tr_mul(&c) / d.len() as f64
}

/// Jacobian of [`cbps_balance`]:
/// `-(1/n) sum (1 - d_i) pi'_i / (1 - pi_i)^2 x_i x_i'`, i.e. minus the
/// odds-weighted control Gram matrix.
pub fn cbps_jacobian(x: &DesignMatrix, d: &[bool], beta: &DVector<f64>) -> DMatrix<f64> {
    let eta = x.matrix() * beta;
    let w: Vec<f64> = eta
        .iter()
        .zip(d)
        .map(|(&v, &t)| if t || v.abs() > ETA_CLAMP { 0.0 } else { LogisticLink::odds(v) })
        .collect();
    -weighted_gram(x, &w) / d.len() as f64
}

/// Solves the just-identified balance system `g(b) = 0` by damped Newton,
/// starting from the logistic ML fit and falling back to `b = 0`.
pub fn cbps_solve(x: &DesignMatrix, d: &[bool]) -> Result<PropensityFit> {
    cbps_traced(x, d, &mut Vec::new())
}

pub(crate) fn cbps_traced(x: &DesignMatrix, d: &[bool], trace: &mut Vec<f64>) -> Result<PropensityFit> {
    check_groups(d)?;
    if d.len() != x.nrows() {
        return Err(DidError::OutOfDomain(format!("{} treatment values for {} design rows", d.len(), x.nrows())));
    }
    check_control_rank(x, d)?;

    let zero = DVector::zeros(x.ncols());
    match logistic_mle(x, d) {
        Ok(ml) => {
            let mut first = Vec::new();
            match newton(x, d, ml.beta, &mut first) {
                Ok(fit) => {
                    trace.extend(first);
                    Ok(fit)
                }
                Err(_) => newton(x, d, zero, trace),
            }
        }
        Err(_) => newton(x, d, zero, trace),
    }
}

fn newton(x: &DesignMatrix, d: &[bool], mut beta: DVector<f64>, trace: &mut Vec<f64>) -> Result<PropensityFit> {
    let tol = CBPS_TOL * x.scale();
    let mut g = cbps_balance(x, d, &beta);
    let mut merit = g.norm();
    trace.push(merit);

    for iter in 0..CBPS_MAX_ITER {
        let resid = max_abs(g.iter());
        if resid <= tol {
            let (beta, resid, polished) = polish(x, d, beta, resid, merit, trace);
            let iter = iter + polished;
            let clamped = max_abs((x.matrix() * &beta).iter()) > ETA_CLAMP;
            return Ok(PropensityFit {
                beta,
                method: PropensityMethod::CovariateBalancing,
                converged: true,
                iterations: iter,
                residual_norm: resid,
                clamped,
            });
        }
        let neg_jac = -cbps_jacobian(x, d, &beta);
        let step = match neg_jac.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => neg_jac.lu().solve(&g).ok_or_else(|| rank_error(x))?,
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=CBPS_MAX_HALVINGS {
            let candidate = &beta + &step * t;
            let cand_g = cbps_balance(x, d, &candidate);
            let cand_merit = cand_g.norm();
            if cand_merit < merit {
                accepted = Some((candidate, cand_g, cand_merit));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_g, next_merit)) = accepted else {
            return Err(DidError::NoConvergence { solver: "CBPS balance", iterations: iter + 1, residual: resid });
        };
        beta = next;
        g = next_g;
        merit = next_merit;
        trace.push(merit);
    }
    Err(DidError::NoConvergence {
        solver: "CBPS balance",
        iterations: CBPS_MAX_ITER,
        residual: max_abs(g.iter()),
    })
}

fn check_control_rank(x: &DesignMatrix, d: &[bool]) -> Result<()> {
    let rows: Vec<usize> = (0..d.len()).filter(|&i| !d[i]).collect();
    if rows.len() < x.ncols() {
        return Err(DidError::TooFewControls { needed: x.ncols(), found: rows.len() });
    }
    if let Some(col) = first_dependent_column(&x.matrix().select_rows(&rows), RANK_TOLERANCE) {
        return Err(DidError::RankDeficient { column: x.column_names()[col].clone() });
    }
    Ok(())
}

/// Full Newton steps after convergence, kept while the merit strictly
/// decreases; drives the balance residual to rounding level.
fn polish(
    x: &DesignMatrix,
    d: &[bool],
    mut beta: DVector<f64>,
    mut resid: f64,
    mut merit: f64,
    trace: &mut Vec<f64>,
) -> (DVector<f64>, f64, usize) {
    let mut steps = 0;
    for _ in 0..POLISH_STEPS {
        let g = cbps_balance(x, d, &beta);
        let Some(step) = (-cbps_jacobian(x, d, &beta)).cholesky().map(|c| c.solve(&g)) else { break };
        let candidate = &beta + step;
        let cand_g = cbps_balance(x, d, &candidate);
        let cand_merit = cand_g.norm();
        if !(cand_merit < merit) {
            break;
        }
        beta = candidate;
        merit = cand_merit;
        resid = max_abs(cand_g.iter());
        trace.push(merit);
        steps += 1;
    }
    (beta, resid, steps)
}
