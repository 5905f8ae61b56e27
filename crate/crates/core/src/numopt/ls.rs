use nalgebra::{DMatrix, DVector};

use crate::error::{DidError, Result};
use crate::panel::{DesignMatrix, RANK_TOLERANCE};

use super::{first_dependent_column, max_abs, LogisticLink, OutcomeFit, OutcomeKind, PivotedQr};

/// OLS of `dy` on `x` over the comparison group (`d == false`).
pub fn ols_control(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<OutcomeFit> {
    check_lengths(x, dy, d)?;
    let k = x.ncols();
    let controls = d.iter().filter(|&&t| !t).count();
    if controls < k {
        return Err(DidError::TooFewControls { needed: k, found: controls });
    }
    let w: Vec<f64> = d.iter().map(|&t| if t { 0.0 } else { 1.0 }).collect();
    let (gamma, normal_residual) = weighted_least_squares(x, dy, &w)?;
    Ok(OutcomeFit { gamma, kind: OutcomeKind::OlsControl, normal_residual })
}

/// Weighted control regression with weights `pi'(x'b) / (1 - pi(x'b))^2`,
/// which for the logistic link equals the odds `exp(x'b)`.
pub fn wls_cbps_gamma(x: &DesignMatrix, dy: &[f64], d: &[bool], beta: &DVector<f64>) -> Result<OutcomeFit> {
    check_lengths(x, dy, d)?;
    if beta.len() != x.ncols() {
        return Err(DidError::OutOfDomain(format!("beta has {} entries, design has {} columns", beta.len(), x.ncols())));
    }
    let eta = x.matrix() * beta;
    let w: Vec<f64> = d
        .iter()
        .zip(eta.iter())
        .map(|(&t, &v)| if t { 0.0 } else { LogisticLink::odds(v) })
        .collect();
    let (gamma, normal_residual) = weighted_least_squares(x, dy, &w)?;
    Ok(OutcomeFit { gamma, kind: OutcomeKind::WlsCbps, normal_residual })
}

/// Minimizes `sum_i w_i (y_i - x_i' g)^2` by a pivoted QR of `sqrt(W) X`.
/// Rows with zero weight are dropped. Returns the solution and the relative
/// normal-equation residual.
pub fn weighted_least_squares(x: &DesignMatrix, y: &[f64], w: &[f64]) -> Result<(DVector<f64>, f64)> {
    let rows: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
    let k = x.ncols();
    if rows.len() < k {
        return Err(DidError::TooFewControls { needed: k, found: rows.len() });
    }
    let xm = x.matrix();
    let mut a = DMatrix::zeros(rows.len(), k);
    let mut b = DVector::zeros(rows.len());
    for (r, &i) in rows.iter().enumerate() {
        let s = w[i].sqrt();
        for j in 0..k {
            a[(r, j)] = s * xm[(i, j)];
        }
        b[r] = s * y[i];
    }
    let qr = PivotedQr::new(a.clone());
    if qr.rank(RANK_TOLERANCE) < k {
        let col = first_dependent_column(&a, RANK_TOLERANCE).unwrap_or(k - 1);
        return Err(DidError::RankDeficient { column: x.column_names()[col].clone() });
    }
    let gamma = qr.solve_least_squares(&b);

    let resid = &b - &a * &gamma;
    let normal = a.transpose() * resid;
    let cross = a.transpose() * &a;
    let rhs = a.transpose() * &b;
    let magnitude = max_abs(cross.iter()) * max_abs(gamma.iter()).max(1.0) + max_abs(rhs.iter());
    let rel = if magnitude > 0.0 { max_abs(normal.iter()) / magnitude } else { 0.0 };
    Ok((gamma, rel))
}

fn check_lengths(x: &DesignMatrix, dy: &[f64], d: &[bool]) -> Result<()> {
    if dy.len() != x.nrows() || d.len() != x.nrows() {
        return Err(DidError::OutOfDomain(format!(
            "design has {} rows but dy has {} and d has {}",
            x.nrows(),
            dy.len(),
            d.len()
        )));
    }
    Ok(())
}
