//! Synthetic low-rank quadratic client objectives.
//!
//! Client `i` holds `f_i(w) = 1/2 (w - w_i*)^T Q_i (w - w_i*)` with
//! `Q_i = A_i A_i^T` for a `d x k` factor `A_i`, so each objective is a
//! convex quadratic of rank at most `k` whose minimum value is exactly 0
//! at `w_i*`. Heterogeneity across clients comes from both the factors
//! and the per-client optima.

use crate::error::{Error, Result};
use crate::stream::StreamKey;
use crate::vector;

/// One client's quadratic objective, stored as the factor's columns.
#[derive(Debug, Clone)]
pub struct QuadraticClient {
    /// `k` columns of length `d`, column `j` at `columns[j*d .. (j+1)*d]`.
    columns: Vec<f64>,
    optimum: Vec<f64>,
    d: usize,
    k: usize,
}

impl QuadraticClient {
    /// Build from explicit factor columns and the client optimum.
    pub fn new(columns: Vec<f64>, d: usize, k: usize, optimum: Vec<f64>) -> Result<Self> {
        if columns.len() != d * k {
            return Err(Error::DimensionMismatch {
                expected: d * k,
                got: columns.len(),
            });
        }
        if optimum.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: optimum.len(),
            });
        }
        Ok(QuadraticClient {
            columns,
            optimum,
            d,
            k,
        })
    }

    /// One-dimensional `f(w) = 1/2 a^2 (w - w_star)^2`, handy in tests.
    pub fn scalar(a: f64, w_star: f64) -> Self {
        QuadraticClient {
            columns: vec![a],
            optimum: vec![w_star],
            d: 1,
            k: 1,
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn optimum(&self) -> &[f64] {
        &self.optimum
    }

    /// Objective value and gradient in one pass over the factor columns.
    pub fn value_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(w.len(), self.d);
        let x: Vec<f64> = vector::sub(w, &self.optimum);
        let mut grad = vector::zeros(self.d);
        let mut value = 0.0;
        for j in 0..self.k {
            let col = &self.columns[j * self.d..(j + 1) * self.d];
            let y = vector::dot(col, &x);
            value += y * y;
            vector::add_scaled(&mut grad, y, col);
        }
        (0.5 * value, grad)
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.d);
        let x: Vec<f64> = vector::sub(w, &self.optimum);
        let mut value = 0.0;
        for j in 0..self.k {
            let col = &self.columns[j * self.d..(j + 1) * self.d];
            let y = vector::dot(col, &x);
            value += y * y;
        }
        0.5 * value
    }

    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        self.value_grad(w).1
    }

    /// Hessian-vector product `Q v = A (A^T v)`; the Hessian is constant.
    pub fn hessian_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.d);
        let mut out = vector::zeros(self.d);
        self.hessian_vec_accumulate(v, &mut out);
        out
    }

    /// `out += Q v`, used to apply sums of client Hessians without temporaries.
    pub fn hessian_vec_accumulate(&self, v: &[f64], out: &mut [f64]) {
        for j in 0..self.k {
            let col = &self.columns[j * self.d..(j + 1) * self.d];
            let y = vector::dot(col, v);
            vector::add_scaled(out, y, col);
        }
    }
}

/// Draw the factor and optimum of one client from `key`.
///
/// The fill order (optimum first, then factor columns in column-major
/// order) is part of the reproducibility contract.
pub fn generate_quadratic_client(
    key: &StreamKey,
    d: usize,
    factor_rank: usize,
    factor_std: f64,
) -> QuadraticClient {
    let mut optimum = vector::zeros(d);
    key.child("optimum", 0)
        .stream()
        .fill_gaussian(&mut optimum, 1.0);
    let mut columns = vector::zeros(d * factor_rank);
    key.child("factor", 0)
        .stream()
        .fill_gaussian(&mut columns, factor_std);
    QuadraticClient {
        columns,
        optimum,
        d,
        k: factor_rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_client_matches_hand_values() {
        // f(w) = 1/2 (w - 2)^2: f(3) = 0.5, f'(3) = 1.
        let c = QuadraticClient::scalar(1.0, 2.0);
        let (v, g) = c.value_grad(&[3.0]);
        assert_eq!(v, 0.5);
        assert_eq!(g, vec![1.0]);
        assert_eq!(c.value(&[2.0]), 0.0);
    }

    #[test]
    fn two_dim_rank_one_matches_hand_values() {
        // A = [1, 2]^T, w* = 0: f(w) = 1/2 (w1 + 2 w2)^2, grad = (w1+2w2)[1,2].
        let c = QuadraticClient::new(vec![1.0, 2.0], 2, 1, vec![0.0, 0.0]).unwrap();
        let (v, g) = c.value_grad(&[1.0, 1.0]);
        assert_eq!(v, 4.5);
        assert_eq!(g, vec![3.0, 6.0]);
    }

    #[test]
    fn hessian_vec_matches_gradient_difference() {
        let key = StreamKey::new(21).child("client", 0);
        let c = generate_quadratic_client(&key, 8, 3, 0.5);
        let w: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let v: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        // Quadratic: grad(w + v) - grad(w) = Q v exactly up to rounding.
        let wv: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + b).collect();
        let diff = vector::sub(&c.grad(&wv), &c.grad(&w));
        let hv = c.hessian_vec(&v);
        assert!(vector::max_abs_diff(&diff, &hv) < 1e-12);
    }

    #[test]
    fn generation_is_reproducible_per_key() {
        let key = StreamKey::new(77).child("client", 4);
        let a = generate_quadratic_client(&key, 10, 2, 0.1);
        let b = generate_quadratic_client(&key, 10, 2, 0.1);
        assert_eq!(a.optimum, b.optimum);
        assert_eq!(a.columns, b.columns);
        let c = generate_quadratic_client(&StreamKey::new(77).child("client", 5), 10, 2, 0.1);
        assert_ne!(a.columns, c.columns);
    }

    #[test]
    fn dimension_checks_are_enforced() {
        assert!(matches!(
            QuadraticClient::new(vec![1.0; 5], 2, 2, vec![0.0; 2]),
            Err(Error::DimensionMismatch { expected: 4, got: 5 })
        ));
        assert!(matches!(
            QuadraticClient::new(vec![1.0; 4], 2, 2, vec![0.0; 3]),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }
}
