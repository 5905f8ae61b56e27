//! Sandwich variance `G^-1 Omega G^-T` for just-identified stacks of
//! estimating equations, plus the stacked moments used by the DID estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{DidError, Result};
use crate::numopt::LogisticLink;
use crate::panel::DesignMatrix;

/// A just-identified system of per-unit estimating equations with an
/// analytic Jacobian.
pub trait MomentStack {
    fn n_units(&self) -> usize;
    fn n_params(&self) -> usize;
    /// Writes `m_i(theta)` into `m` and `d m_i / d theta'` into `jac`.
    fn unit(&self, i: usize, theta: &DVector<f64>, m: &mut DVector<f64>, jac: &mut DMatrix<f64>);
}

#[derive(Debug, Clone)]
pub struct Sandwich {
    /// Sample mean of the moment Jacobians.
    pub bread: DMatrix<f64>,
    /// Sample mean of moment outer products.
    pub meat: DMatrix<f64>,
    /// `G^-1 Omega G^-T`, the asymptotic covariance of `sqrt(n)(theta_hat - theta)`.
    pub cov: DMatrix<f64>,
    bread_inv: DMatrix<f64>,
}

impl Sandwich {
    /// Per-unit influence values `-(G^-1 m_i)[index]`; their mean square is
    /// `cov[(index, index)]`.
    pub fn influence<S: MomentStack + ?Sized>(&self, stack: &S, theta: &DVector<f64>, index: usize) -> Vec<f64> {
        let p = stack.n_params();
        let row = self.bread_inv.row(index).into_owned();
        let mut m = DVector::zeros(p);
        let mut jac = DMatrix::zeros(p, p);
        (0..stack.n_units())
            .map(|i| {
                stack.unit(i, theta, &mut m, &mut jac);
                -(row.dot(&m.transpose()))
            })
            .collect()
    }
}

pub fn sandwich<S: MomentStack + ?Sized>(stack: &S, theta: &DVector<f64>) -> Result<Sandwich> {
    let p = stack.n_params();
    if theta.len() != p {
        return Err(DidError::OutOfDomain(format!("theta has {} entries, stack has {p} moments", theta.len())));
    }
    let n = stack.n_units();
    let mut bread = DMatrix::zeros(p, p);
    let mut meat = DMatrix::zeros(p, p);
    let mut m = DVector::zeros(p);
    let mut jac = DMatrix::zeros(p, p);
    for i in 0..n {
        stack.unit(i, theta, &mut m, &mut jac);
        bread += &jac;
        meat.ger(1.0, &m, &m, 1.0);
    }
    bread /= n as f64;
    meat /= n as f64;
    let bread_inv = bread.clone().try_inverse().ok_or(DidError::SingularJacobian)?;
    if bread_inv.iter().any(|v| !v.is_finite()) {
        return Err(DidError::SingularJacobian);
    }
    let cov = &bread_inv * &meat * bread_inv.transpose();
    Ok(Sandwich { bread, meat, cov, bread_inv })
}

/// The `(index, index)` entry of the sandwich covariance.
pub fn sandwich_variance<S: MomentStack + ?Sized>(stack: &S, theta: &DVector<f64>, index: usize) -> Result<f64> {
    Ok(sandwich(stack, theta)?.cov[(index, index)])
}

/// How the first-step propensity parameters enter the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropensityMoment {
    None,
    /// Logistic score `(d - pi) x`.
    MaximumLikelihood,
    /// Balance conditions `(d - pi)/(1 - pi) x`.
    Balancing,
}

/// Moments for the DID ATT estimators. Parameters are stacked as
/// `[beta (if propensity), gamma (if outcome), p, tau]` with moments
///
/// * propensity: logistic score or balance conditions;
/// * outcome: control normal equations `(1 - d) x (dy - x'gamma)`;
/// * `d - p`;
/// * `(w (dy - x'gamma) - d tau) / p`, where `w = (d - pi)/(1 - pi)` when a
///   propensity model is present and `w = d` otherwise.
#[derive(Debug, Clone)]
pub struct DidMoments<'a> {
    pub x: &'a DesignMatrix,
    pub dy: &'a [f64],
    pub d: &'a [bool],
    pub propensity: PropensityMoment,
    pub outcome: bool,
}

impl DidMoments<'_> {
    fn k(&self) -> usize {
        self.x.ncols()
    }

    fn beta_len(&self) -> usize {
        if self.propensity == PropensityMoment::None { 0 } else { self.k() }
    }

    fn gamma_len(&self) -> usize {
        if self.outcome { self.k() } else { 0 }
    }

    pub fn p_index(&self) -> usize {
        self.beta_len() + self.gamma_len()
    }

    pub fn tau_index(&self) -> usize {
        self.p_index() + 1
    }

    /// Assembles `theta` from its blocks. Missing blocks must be `None`
    /// exactly when the stack has no such block.
    pub fn theta(&self, beta: Option<&DVector<f64>>, gamma: Option<&DVector<f64>>, p: f64, tau: f64) -> DVector<f64> {
        let mut v: Vec<f64> = Vec::with_capacity(self.n_params());
        if self.beta_len() > 0 {
            v.extend(beta.expect("stack has a propensity block").iter());
        }
        if self.gamma_len() > 0 {
            v.extend(gamma.expect("stack has an outcome block").iter());
        }
        v.push(p);
        v.push(tau);
        DVector::from_vec(v)
    }
}

impl MomentStack for DidMoments<'_> {
    fn n_units(&self) -> usize {
        self.d.len()
    }

    fn n_params(&self) -> usize {
        self.beta_len() + self.gamma_len() + 2
    }

    fn unit(&self, i: usize, theta: &DVector<f64>, m: &mut DVector<f64>, jac: &mut DMatrix<f64>) {
        let k = self.k();
        let (nb, ng) = (self.beta_len(), self.gamma_len());
        let (ip, it) = (self.p_index(), self.tau_index());
        let xi = self.x.matrix().row(i);
        let treated = self.d[i];
        let di = if treated { 1.0 } else { 0.0 };
        let p = theta[ip];
        let tau = theta[it];
        m.fill(0.0);
        jac.fill(0.0);

        let fitted_gamma = if ng > 0 { (xi * theta.rows(nb, ng))[0] } else { 0.0 };
        let resid = self.dy[i] - fitted_gamma;

        // w = (d - pi)/(1 - pi) and its derivative in eta.
        let (w, dw_deta) = match self.propensity {
            PropensityMoment::None => (di, 0.0),
            _ => {
                let eta = (xi * theta.rows(0, nb))[0];
                let odds = LogisticLink::odds(eta);
                let dodds = if eta.abs() > crate::numopt::ETA_CLAMP { 0.0 } else { odds };
                if treated { (1.0, 0.0) } else { (-odds, -dodds) }
            }
        };

        match self.propensity {
            PropensityMoment::None => {}
            PropensityMoment::MaximumLikelihood => {
                let eta = (xi * theta.rows(0, nb))[0];
                let pi = LogisticLink::prob(eta);
                let dpi = if eta.abs() > crate::numopt::ETA_CLAMP { 0.0 } else { LogisticLink::deriv(eta) };
                for a in 0..k {
                    m[a] = (di - pi) * xi[a];
                    for b in 0..k {
                        jac[(a, b)] = -dpi * xi[a] * xi[b];
                    }
                }
            }
            PropensityMoment::Balancing => {
                for a in 0..k {
                    m[a] = w * xi[a];
                    for b in 0..k {
                        jac[(a, b)] = dw_deta * xi[a] * xi[b];
                    }
                }
            }
        }

        if ng > 0 && !treated {
            for a in 0..k {
                m[nb + a] = xi[a] * resid;
                for b in 0..k {
                    jac[(nb + a, nb + b)] = -xi[a] * xi[b];
                }
            }
        }

        m[ip] = di - p;
        jac[(ip, ip)] = -1.0;

        let m_tau = (w * resid - di * tau) / p;
        m[it] = m_tau;
        for b in 0..nb {
            jac[(it, b)] = dw_deta * xi[b] * resid / p;
        }
        for b in 0..ng {
            jac[(it, nb + b)] = -w * xi[b] / p;
        }
        jac[(it, ip)] = -m_tau / p;
        jac[(it, it)] = -di / p;
    }
}
