//! Multiclass logistic regression client objectives.
//!
//! A client holds a row-major `m x p` feature block and integer labels in
//! `0..num_classes`. The model is one weight row per class, flattened
//! class-major into a single vector of dimension `p * num_classes`, and
//! the objective is the mean cross-entropy over the client's samples plus
//! an `l2/2 ||w||^2` ridge term that keeps the problem strictly convex.

use crate::error::{Error, Result};
use crate::stream::StreamKey;
use crate::vector;

#[derive(Debug, Clone)]
pub struct LogisticClient {
    features: Vec<f64>,
    labels: Vec<usize>,
    samples: usize,
    num_features: usize,
    num_classes: usize,
    l2: f64,
}

impl LogisticClient {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        num_features: usize,
        num_classes: usize,
        l2: f64,
    ) -> Result<Self> {
        if num_features == 0 || num_classes < 2 {
            return Err(Error::InvalidConfig(
                "logistic client needs num_features >= 1 and num_classes >= 2".into(),
            ));
        }
        if labels.is_empty() || features.len() != labels.len() * num_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * num_features,
                got: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "l2 must be non-negative and finite, got {l2}"
            )));
        }
        let samples = labels.len();
        Ok(LogisticClient {
            features,
            labels,
            samples,
            num_features,
            num_classes,
            l2,
        })
    }

    /// Model dimension `p * num_classes`.
    pub fn dimension(&self) -> usize {
        self.num_features * self.num_classes
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Distinct labels present in this client's block.
    pub fn distinct_classes(&self) -> usize {
        let mut seen = vec![false; self.num_classes];
        for &y in &self.labels {
            seen[y] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    fn sample_row(&self, idx: usize) -> &[f64] {
        &self.features[idx * self.num_features..(idx + 1) * self.num_features]
    }

    /// Class scores `w_c . x` for one sample, written into `scores`.
    fn scores_into(&self, w: &[f64], x: &[f64], scores: &mut [f64]) {
        for c in 0..self.num_classes {
            let row = &w[c * self.num_features..(c + 1) * self.num_features];
            scores[c] = vector::dot(row, x);
        }
    }

    /// Mean cross-entropy plus the ridge term, with its gradient.
    pub fn value_grad(&self, w: &[f64]) -> (f64, Vec<f64>) {
        debug_assert_eq!(w.len(), self.dimension());
        let mut grad = vector::zeros(self.dimension());
        let mut scores = vec![0.0; self.num_classes];
        let inv_m = 1.0 / self.samples as f64;
        let mut value = 0.0;
        for idx in 0..self.samples {
            let x = self.sample_row(idx);
            self.scores_into(w, x, &mut scores);
            let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut sum_exp = 0.0;
            for c in 0..self.num_classes {
                scores[c] = (scores[c] - max).exp();
                sum_exp += scores[c];
            }
            let lse = max + sum_exp.ln();
            value += lse - (max + scores[self.labels[idx]].ln());
            for c in 0..self.num_classes {
                let prob = scores[c] / sum_exp;
                let residual = prob - if c == self.labels[idx] { 1.0 } else { 0.0 };
                let row = &mut grad[c * self.num_features..(c + 1) * self.num_features];
                vector::add_scaled(row, residual * inv_m, x);
            }
        }
        value *= inv_m;
        if self.l2 > 0.0 {
            value += 0.5 * self.l2 * vector::dot(w, w);
            vector::add_scaled(&mut grad, self.l2, w);
        }
        (value, grad)
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        self.value_grad(w).0
    }

    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        self.value_grad(w).1
    }

    /// Fraction of samples whose highest score matches the label; score
    /// ties resolve to the lowest class index.
    pub fn accuracy(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dimension());
        let mut scores = vec![0.0; self.num_classes];
        let mut correct = 0usize;
        for idx in 0..self.samples {
            self.scores_into(w, self.sample_row(idx), &mut scores);
            let mut best = 0;
            for c in 1..self.num_classes {
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            if best == self.labels[idx] {
                correct += 1;
            }
        }
        correct as f64 / self.samples as f64
    }

    /// Gram operator `v -> (1/m) X^T X v` on feature space, used to bound
    /// smoothness: the softmax Hessian block norm is at most 1/2, so
    /// `L <= lambda_max(Gram)/2 + l2`.
    pub fn gram_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.num_features);
        let mut out = vector::zeros(self.num_features);
        let inv_m = 1.0 / self.samples as f64;
        for idx in 0..self.samples {
            let x = self.sample_row(idx);
            let y = vector::dot(x, v);
            vector::add_scaled(&mut out, y * inv_m, x);
        }
        out
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    /// Borrow the raw sample block, for pooling clients into one problem.
    pub fn raw_data(&self) -> (&[f64], &[usize]) {
        (&self.features, &self.labels)
    }
}

/// Synthetic Gaussian-blob classification data.
///
/// Class `c` gets a mean `separation * N(0, I_p)` drawn from
/// `key.child("class_mean", c)`, and sample `s` of that class is the mean
/// plus unit Gaussian noise from `key.child("sample", c*per_class + s)`.
/// Rows come out class-major: all of class 0 first, then class 1, and so
/// on. Returns `(features, labels)` with `features` row-major `m x p`.
pub fn generate_classification_data(
    key: &StreamKey,
    num_classes: usize,
    samples_per_class: usize,
    num_features: usize,
    separation: f64,
) -> (Vec<f64>, Vec<usize>) {
    let mut features = Vec::with_capacity(num_classes * samples_per_class * num_features);
    let mut labels = Vec::with_capacity(num_classes * samples_per_class);
    let mut mean = vector::zeros(num_features);
    let mut noise = vector::zeros(num_features);
    for c in 0..num_classes {
        key.child("class_mean", c as u64)
            .stream()
            .fill_gaussian(&mut mean, separation);
        for s in 0..samples_per_class {
            let idx = (c * samples_per_class + s) as u64;
            key.child("sample", idx).stream().fill_gaussian(&mut noise, 1.0);
            features.extend(mean.iter().zip(&noise).map(|(m, z)| m + z));
            labels.push(c);
        }
    }
    (features, labels)
}
