use nalgebra::{DMatrix, DVector};

use crate::error::{DidError, Result};
use crate::panel::{check_groups, DesignMatrix};

use super::{max_abs, LogisticLink, PropensityFit, PropensityMethod, ETA_CLAMP};

/// Score tolerance, multiplied by [`DesignMatrix::scale`].
pub const MLE_TOL: f64 = 1e-8;
/// Relative step size below which Newton stops.
pub const MLE_STEP_TOL: f64 = 1e-12;
pub const MLE_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
/// Full Newton steps taken after the tolerance is met, each kept only if it
/// lowers the score; brings the score to rounding level.
pub(crate) const POLISH_STEPS: usize = 3;

/// Mean log-likelihood `(1/n) sum d_i eta_i - log(1 + exp(eta_i))`.
pub fn logistic_loglik(x: &DesignMatrix, d: &[bool], beta: &DVector<f64>) -> f64 {
    let eta = x.matrix() * beta;
    let n = d.len() as f64;
    eta.iter()
        .zip(d)
        .map(|(&v, &t)| {
            let v = LogisticLink::clamp(v);
            (if t { v } else { 0.0 }) - LogisticLink::softplus(v)
        })
        .sum::<f64>()
        / n
}

/// Mean score `(1/n) sum (d_i - pi_i) x_i`.
pub fn logistic_score(x: &DesignMatrix, d: &[bool], beta: &DVector<f64>) -> DVector<f64> {
    let eta = x.matrix() * beta;
    let resid = DVector::from_iterator(
        d.len(),
        eta.iter().zip(d).map(|(&v, &t)| f64::from(u8::from(t)) - LogisticLink::prob(v)),
    );
    x.matrix().tr_mul(&resid) / d.len() as f64
}

/// Derivative of [`logistic_score`]: `-(1/n) sum pi_i (1 - pi_i) x_i x_i'`.
pub fn logistic_hessian(x: &DesignMatrix, beta: &DVector<f64>) -> DMatrix<f64> {
    let eta = x.matrix() * beta;
    let w: Vec<f64> = eta.iter().map(|&v| LogisticLink::deriv(v)).collect();
    -weighted_gram(x, &w) / x.nrows() as f64
}

pub(crate) fn weighted_gram(x: &DesignMatrix, w: &[f64]) -> DMatrix<f64> {
    let xm = x.matrix();
    let mut scaled = xm.clone();
    for (mut row, &wi) in scaled.row_iter_mut().zip(w) {
        row *= wi;
    }
    xm.tr_mul(&scaled)
}

/// Logistic maximum likelihood by Newton-Raphson with step halving on the
/// log-likelihood, started at zero.
pub fn logistic_mle(x: &DesignMatrix, d: &[bool]) -> Result<PropensityFit> {
    mle_traced(x, d, &mut Vec::new())
}

/// As [`logistic_mle`], recording the log-likelihood of every iterate
/// accepted by the line search.
pub(crate) fn mle_traced(x: &DesignMatrix, d: &[bool], trace: &mut Vec<f64>) -> Result<PropensityFit> {
    check_groups(d)?;
    if d.len() != x.nrows() {
        return Err(DidError::OutOfDomain(format!("{} treatment values for {} design rows", d.len(), x.nrows())));
    }
    let tol = MLE_TOL * x.scale();
    let k = x.ncols();
    let mut beta = DVector::zeros(k);
    let mut ll = logistic_loglik(x, d, &beta);
    trace.push(ll);

    for iter in 0..MLE_MAX_ITER {
        let score = logistic_score(x, d, &beta);
        let score_norm = max_abs(score.iter());
        if score_norm <= tol {
            return Ok(finish(x, d, beta, iter, score_norm));
        }
        let info = -logistic_hessian(x, &beta);
        let step = info
            .cholesky()
            .map(|c| c.solve(&score))
            .ok_or_else(|| rank_error(x))?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &beta + &step * t;
            let cand_ll = logistic_loglik(x, d, &candidate);
            if cand_ll >= ll {
                accepted = Some((candidate, cand_ll));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_ll)) = accepted else {
            return Err(DidError::NoConvergence { solver: "logistic ML", iterations: iter + 1, residual: score_norm });
        };
        let rel_step = max_abs((&next - &beta).iter()) / (1.0 + max_abs(beta.iter()));
        beta = next;
        ll = next_ll;
        trace.push(ll);

        let max_eta = max_abs((x.matrix() * &beta).iter());
        let score_norm = max_abs(logistic_score(x, d, &beta).iter());
        if score_norm <= tol {
            return Ok(finish(x, d, beta, iter + 1, score_norm));
        }
        if max_eta > ETA_CLAMP {
            return Err(DidError::Separation { max_index: max_eta });
        }
        if rel_step <= MLE_STEP_TOL {
            return Err(DidError::NoConvergence { solver: "logistic ML", iterations: iter + 1, residual: score_norm });
        }
    }
    let residual = max_abs(logistic_score(x, d, &beta).iter());
    Err(DidError::NoConvergence { solver: "logistic ML", iterations: MLE_MAX_ITER, residual })
}

fn finish(x: &DesignMatrix, d: &[bool], mut beta: DVector<f64>, mut iterations: usize, mut residual_norm: f64) -> PropensityFit {
    for _ in 0..POLISH_STEPS {
        let score = logistic_score(x, d, &beta);
        let Some(step) = (-logistic_hessian(x, &beta)).cholesky().map(|c| c.solve(&score)) else { break };
        let candidate = &beta + step;
        let cand_norm = max_abs(logistic_score(x, d, &candidate).iter());
        if !(cand_norm < residual_norm) {
            break;
        }
        beta = candidate;
        residual_norm = cand_norm;
        iterations += 1;
    }
    let clamped = max_abs((x.matrix() * &beta).iter()) > ETA_CLAMP;
    PropensityFit {
        beta,
        method: PropensityMethod::MaximumLikelihood,
        converged: true,
        iterations,
        residual_norm,
        clamped,
    }
}

pub(crate) fn rank_error(x: &DesignMatrix) -> DidError {
    let col = super::first_dependent_column(x.matrix(), crate::panel::RANK_TOLERANCE).unwrap_or(x.ncols() - 1);
    DidError::RankDeficient { column: x.column_names()[col].clone() }
}
