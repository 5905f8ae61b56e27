//! Random instances and invariant checks shared by the property, oracle and
//! acceptance targets.

#![allow(dead_code)]

use did_cbps::estimators::{att_aipw, att_cbps, att_ipw, estimate, weighted_att, Method};
use did_cbps::numopt::{
    cbps_balance, cbps_jacobian, cbps_solve, logistic_hessian, logistic_score, ols_control,
    wls_cbps_gamma, LogisticLink,
};
use did_cbps::panel::DesignMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A random panel: standard normal covariates, logistic treatment with
/// moderate overlap and a linear-plus-noise outcome change.
pub struct Instance {
    pub x: DesignMatrix,
    pub dy: Vec<f64>,
    pub d: Vec<bool>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `n` rows, intercept plus `k - 1` covariates. Redraws until each group
/// has at least `k + 2` units.
pub fn random_instance(seed: u64, n: usize, k: usize) -> Instance {
    let mut rng = rng(seed);
    loop {
        let mut x = DMatrix::from_element(n, k, 1.0);
        for i in 0..n {
            for j in 1..k {
                x[(i, j)] = normal(&mut rng);
            }
        }
        let ps: Vec<f64> = (0..k).map(|_| 0.5 * normal(&mut rng)).collect();
        let os: Vec<f64> = (0..k).map(|_| 3.0 * normal(&mut rng)).collect();
        let mut d = Vec::with_capacity(n);
        let mut dy = Vec::with_capacity(n);
        for i in 0..n {
            let eta: f64 = (0..k).map(|j| x[(i, j)] * ps[j]).sum();
            let u: f64 = rng.random();
            d.push(LogisticLink::prob(eta) >= u);
            let m: f64 = (0..k).map(|j| x[(i, j)] * os[j]).sum();
            dy.push(m + normal(&mut rng));
        }
        let treated = d.iter().filter(|&&t| t).count();
        if treated >= k + 2 && n - treated >= k + 2 {
            let names = (0..k).map(|j| if j == 0 { "(intercept)".to_string() } else { format!("x{j}") }).collect();
            return Instance { x: DesignMatrix::from_matrix(x, names).expect("full rank"), dy, d };
        }
    }
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Exact balance and the weight-mass identity for a converged CBPS fit.
/// Returns `Ok(None)` when the solver did not converge.
pub fn check_balance(inst: &Instance) -> Result<Option<()>, String> {
    let Ok(fit) = cbps_solve(&inst.x, &inst.d) else { return Ok(None) };
    let tol = 1e-9 * inst.x.scale();
    let g = cbps_balance(&inst.x, &inst.d, &fit.beta);
    if g.amax() > tol {
        return Err(format!("balance residual {:.3e} > {tol:.3e}", g.amax()));
    }
    let eta = inst.x.matrix() * &fit.beta;
    let n_treat = inst.d.iter().filter(|&&t| t).count() as f64;
    let mass: f64 = (0..inst.d.len()).filter(|&i| !inst.d[i]).map(|i| {
        let p = LogisticLink::prob(eta[i]);
        p / (1.0 - p)
    }).sum();
    let mass_err = (mass - n_treat).abs() / inst.d.len() as f64;
    if mass_err > tol {
        return Err(format!("weight mass {mass} vs {n_treat} treated (per-unit error {mass_err:.3e})"));
    }
    Ok(Some(()))
}

/// The weighted contrast at the CBPS propensity is unchanged by any
/// outcome-model coefficients.
pub fn check_gamma_invariance(inst: &Instance, draws: usize, seed: u64) -> Result<Option<()>, String> {
    let Ok(r) = att_cbps(&inst.x, &inst.dy, &inst.d) else { return Ok(None) };
    let beta = &r.propensity.as_ref().expect("propensity").beta;
    let mut rng = rng(seed);
    for _ in 0..draws {
        let gamma = DVector::from_fn(inst.x.ncols(), |_, _| 100.0 * normal(&mut rng));
        let tau = weighted_att(&inst.x, &inst.dy, &inst.d, beta, Some(&gamma));
        if (tau - r.tau).abs() > 1e-8 {
            return Err(format!("tau with gamma {tau} vs {}", r.tau));
        }
    }
    Ok(Some(()))
}

/// Adding `X'a` to the outcome change leaves the CBPS estimate unchanged.
pub fn check_regression_invariance(inst: &Instance, seed: u64) -> Result<Option<()>, String> {
    let Ok(base) = att_cbps(&inst.x, &inst.dy, &inst.d) else { return Ok(None) };
    let mut rng = rng(seed);
    let a = DVector::from_fn(inst.x.ncols(), |_, _| 10.0 * normal(&mut rng));
    let shift = inst.x.matrix() * &a;
    let dy2: Vec<f64> = inst.dy.iter().zip(shift.iter()).map(|(y, s)| y + s).collect();
    let moved = att_cbps(&inst.x, &dy2, &inst.d).map_err(|e| e.to_string())?;
    if (moved.tau - base.tau).abs() > 1e-8 {
        return Err(format!("CBPS tau moved from {} to {}", base.tau, moved.tau));
    }
    Ok(Some(()))
}

/// Constructed instance where the ML propensity weights do not balance the
/// covariate, so the same perturbation moves the IPW estimate.
pub fn ipw_contrast() -> Result<f64, String> {
    let xs = [-1.5, -0.5, 0.0, 0.5, 1.0, 2.0, -1.0, 0.2, 1.5, -0.3];
    let d = [false, false, true, false, true, true, false, true, false, true];
    let x = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let x = DesignMatrix::from_matrix(x, vec!["(intercept)".into(), "x1".into()]).map_err(|e| e.to_string())?;
    let dy = vec![0.0; xs.len()];
    let shifted: Vec<f64> = xs.iter().map(|v| 5.0 + 3.0 * v).collect();
    let a = att_ipw(&x, &dy, &d).map_err(|e| e.to_string())?.tau;
    let b = att_ipw(&x, &shifted, &d).map_err(|e| e.to_string())?.tau;
    let c0 = att_cbps(&x, &dy, &d).map_err(|e| e.to_string())?.tau;
    let c1 = att_cbps(&x, &shifted, &d).map_err(|e| e.to_string())?.tau;
    if (c1 - c0).abs() > 1e-8 {
        return Err(format!("CBPS moved by {}", c1 - c0));
    }
    Ok((b - a).abs())
}

/// Central-difference Jacobian of `f` at `b`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, b: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = f(b).len();
    let mut j = DMatrix::zeros(m, b.len());
    for c in 0..b.len() {
        let mut up = b.clone();
        let mut dn = b.clone();
        up[c] += h;
        dn[c] -= h;
        let diff = (f(&up) - f(&dn)) / (2.0 * h);
        j.set_column(c, &diff);
    }
    j
}

fn jac_rel_err(analytic: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    let scale = analytic.amax().max(1e-12);
    (analytic - fd).amax() / scale
}

/// Analytic CBPS Jacobian and logistic score derivative against central
/// differences at a random parameter.
pub fn check_jacobians(inst: &Instance, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let beta = DVector::from_fn(inst.x.ncols(), |_, _| 0.3 * normal(&mut rng));
    let fd = fd_jacobian(|b| cbps_balance(&inst.x, &inst.d, b), &beta, 1e-6);
    let err = jac_rel_err(&cbps_jacobian(&inst.x, &inst.d, &beta), &fd);
    if err > 1e-5 {
        return Err(format!("CBPS Jacobian relative error {err:.3e}"));
    }
    let fd = fd_jacobian(|b| logistic_score(&inst.x, &inst.d, b), &beta, 1e-6);
    let err = jac_rel_err(&logistic_hessian(&inst.x, &beta), &fd);
    if err > 1e-5 {
        return Err(format!("logistic score derivative relative error {err:.3e}"));
    }
    Ok(())
}

/// With an intercept-only design every estimator equals the difference in
/// mean outcome changes.
pub fn check_intercept_collapse(dy: &[f64], d: &[bool]) -> Result<(), String> {
    let x = DesignMatrix::intercept(d.len());
    let mean = |t: bool| {
        let v: Vec<f64> = dy.iter().zip(d).filter(|(_, &di)| di == t).map(|(y, _)| *y).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let target = mean(true) - mean(false);
    for m in Method::ALL {
        let tau = estimate(m, &x, dy, d).map_err(|e| e.to_string())?.tau;
        if (tau - target).abs() > 1e-12 * target.abs().max(1.0) {
            return Err(format!("{m}: {tau} vs difference in means {target}"));
        }
    }
    Ok(())
}

/// Least squares by explicit inversion of the weighted normal equations.
pub fn dense_wls(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> DVector<f64> {
    let k = x.ncols();
    let mut xtwx = DMatrix::<f64>::zeros(k, k);
    let mut xtwy = DVector::<f64>::zeros(k);
    for i in 0..x.nrows() {
        for a in 0..k {
            xtwy[a] += w[i] * x[(i, a)] * y[i];
            for b in 0..k {
                xtwx[(a, b)] += w[i] * x[(i, a)] * x[(i, b)];
            }
        }
    }
    xtwx.try_inverse().expect("invertible normal matrix") * xtwy
}

/// OLS on controls and the odds-weighted control WLS against the dense
/// normal-equations solve.
pub fn check_kernels(inst: &Instance, seed: u64) -> Result<(), String> {
    let ctrl: Vec<f64> = inst.d.iter().map(|&t| if t { 0.0 } else { 1.0 }).collect();
    let ols = ols_control(&inst.x, &inst.dy, &inst.d).map_err(|e| e.to_string())?;
    let oracle = dense_wls(inst.x.matrix(), &inst.dy, &ctrl);
    let err = max_abs(ols.gamma.iter().zip(oracle.iter()).map(|(a, b)| rel_err(*a, *b)));
    if err > 1e-9 {
        return Err(format!("OLS relative error {err:.3e}"));
    }
    let mut rng = rng(seed);
    let beta = DVector::from_fn(inst.x.ncols(), |_, _| 0.5 * normal(&mut rng));
    let eta = inst.x.matrix() * &beta;
    let w: Vec<f64> = (0..inst.d.len()).map(|i| if inst.d[i] { 0.0 } else { eta[i].exp() }).collect();
    let wls = wls_cbps_gamma(&inst.x, &inst.dy, &inst.d, &beta).map_err(|e| e.to_string())?;
    let oracle = dense_wls(inst.x.matrix(), &inst.dy, &w);
    let err = max_abs(wls.gamma.iter().zip(oracle.iter()).map(|(a, b)| rel_err(*a, *b)));
    if err > 1e-9 {
        return Err(format!("WLS relative error {err:.3e}"));
    }
    Ok(())
}

/// Row permutation leaves every estimate unchanged up to rounding.
pub fn check_permutation(inst: &Instance, seed: u64) -> Result<(), String> {
    let mut order: Vec<usize> = (0..inst.d.len()).collect();
    let mut rng = rng(seed);
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let x2 = inst.x.select_rows(&order);
    let dy2: Vec<f64> = order.iter().map(|&i| inst.dy[i]).collect();
    let d2: Vec<bool> = order.iter().map(|&i| inst.d[i]).collect();
    for m in Method::ALL {
        let (Ok(a), Ok(b)) = (estimate(m, &inst.x, &inst.dy, &inst.d), estimate(m, &x2, &dy2, &d2)) else { continue };
        if rel_err(a.tau, b.tau) > 1e-9 || rel_err(a.asy_var, b.asy_var) > 1e-8 {
            return Err(format!("{m}: ({}, {}) vs ({}, {})", a.tau, a.asy_var, b.tau, b.asy_var));
        }
    }
    Ok(())
}

/// AIPW equals IPW minus the weighted contrast of the fitted outcome model.
pub fn check_aipw_identity(inst: &Instance) -> Result<(), String> {
    let (Ok(ipw), Ok(aipw)) = (att_ipw(&inst.x, &inst.dy, &inst.d), att_aipw(&inst.x, &inst.dy, &inst.d)) else {
        return Ok(());
    };
    let beta = &ipw.propensity.as_ref().expect("propensity").beta;
    let gamma = &aipw.outcome.as_ref().expect("outcome").gamma;
    let fitted = inst.x.matrix() * gamma;
    let adj = weighted_att(&inst.x, fitted.as_slice(), &inst.d, beta, None);
    if (aipw.tau - (ipw.tau - adj)).abs() > 1e-9 * ipw.tau.abs().max(1.0) {
        return Err(format!("AIPW {} vs IPW - adjustment {}", aipw.tau, ipw.tau - adj));
    }
    Ok(())
}
