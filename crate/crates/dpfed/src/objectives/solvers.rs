//! Deterministic solvers used to pin down ground truth: the global optimum
//! a run's suboptimality is measured against, per-client minima for
//! heterogeneity profiles, and extremal Hessian eigenvalues for smoothness
//! bounds. All iterations are sequential with fixed evaluation order.

use crate::error::{Error, Result};
use crate::stream::StreamKey;
use crate::vector;

/// Conjugate gradient on `A x = b` for a symmetric positive definite
/// operator given as a closure. Stops when the residual norm falls to
/// `tol`; errors with [`Error::SingularSystem`] if the operator annihilates
/// a search direction, or [`Error::NoConvergence`] at the iteration cap.
pub fn cg_solve<F>(apply: F, b: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r = vector::sub(b, &ax);
    let mut p = r.clone();
    let mut rs_old = vector::dot(&r, &r);
    if rs_old.sqrt() <= tol {
        return Ok(x);
    }
    for iter in 0..max_iter {
        let ap = apply(&p);
        let p_ap = vector::dot(&p, &ap);
        if p_ap <= 0.0 || !p_ap.is_finite() {
            return Err(Error::SingularSystem {
                residual: rs_old.sqrt(),
                iterations: iter,
            });
        }
        let alpha = rs_old / p_ap;
        vector::add_scaled(&mut x, alpha, &p);
        vector::add_scaled(&mut r, -alpha, &ap);
        let rs_new = vector::dot(&r, &r);
        if rs_new.sqrt() <= tol {
            return Ok(x);
        }
        let beta = rs_new / rs_old;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
    }
    Err(Error::NoConvergence {
        grad_norm: rs_old.sqrt(),
        iterations: max_iter,
        tolerance: tol,
    })
}

/// Gradient descent with backtracking (Armijo) line search, run until the
/// gradient norm reaches `grad_tol`.
///
/// The step starts from the last accepted value and is allowed to grow by
/// a factor of two between iterations, so the method adapts to the local
/// curvature without a smoothness estimate.
pub fn gd_minimize<F>(
    value_grad: F,
    x0: &[f64],
    grad_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut value, mut grad) = value_grad(&x);
    let mut step = 1.0;
    let mut stalled = 0usize;
    for _ in 0..max_iter {
        let grad_norm_sq = vector::dot(&grad, &grad);
        if grad_norm_sq.sqrt() <= grad_tol {
            return Ok(x);
        }
        // Near machine precision the objective can no longer represent the
        // Armijo decrease; stop once progress is exhausted.
        if stalled >= 50 {
            break;
        }
        step *= 2.0;
        loop {
            let mut candidate = x.clone();
            vector::add_scaled(&mut candidate, -step, &grad);
            let (cand_value, cand_grad) = value_grad(&candidate);
            if cand_value.is_finite() && cand_value <= value - 0.25 * step * grad_norm_sq {
                stalled = if cand_value < value { 0 } else { stalled + 1 };
                x = candidate;
                value = cand_value;
                grad = cand_grad;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(Error::SingularSystem {
                    residual: grad_norm_sq.sqrt(),
                    iterations: 0,
                });
            }
        }
    }
    let grad_norm = vector::norm(&grad);
    if grad_norm <= grad_tol {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            grad_norm,
            iterations: max_iter,
            tolerance: grad_tol,
        })
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by
/// power iteration, started from a Gaussian vector drawn from `key`.
/// Returns the final Rayleigh quotient.
pub fn power_iteration<F>(apply: F, dimension: usize, rel_tol: f64, max_iter: usize, key: &StreamKey) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut v = vector::zeros(dimension);
    key.stream().fill_gaussian(&mut v, 1.0);
    let n = vector::norm(&v);
    if n == 0.0 {
        v[0] = 1.0;
    } else {
        vector::scale_in_place(&mut v, 1.0 / n);
    }
    let mut eigenvalue = 0.0;
    for _ in 0..max_iter {
        let av = apply(&v);
        let new_eigenvalue = vector::dot(&v, &av);
        let norm = vector::norm(&av);
        if norm == 0.0 {
            return 0.0;
        }
        v = vector::scaled(&av, 1.0 / norm);
        let change = (new_eigenvalue - eigenvalue).abs();
        eigenvalue = new_eigenvalue;
        if change <= rel_tol * eigenvalue.abs().max(1e-300) {
            break;
        }
    }
    eigenvalue
}
