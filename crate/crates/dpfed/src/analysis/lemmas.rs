//! Numerical verification of the descent inequalities behind the bounds.
//!
//! Each inequality relates quantities along one client's local gradient
//! descent trajectory: iterate distances to the global optimum, drift from
//! the round start, gradient norms, and the client's optimality gap. The
//! suite recomputes both sides on sampled trajectories and reports any
//! violation beyond slack `1e-9 * max(1, |lhs|, |rhs|)`.
//!
//! Step-size-gated inequalities are only evaluated where their hypothesis
//! holds; the gradient-norm descent check applies at every step size.

use crate::error::{Error, Result};
use crate::fedopt::ops::local_trajectory;
use crate::objectives::ProblemSuite;
use crate::stream::StreamKey;
use crate::vector;

/// One sampled local trajectory: the round-start iterate followed by each
/// local step's result.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub client: usize,
    pub points: Vec<Vec<f64>>,
}

/// A single inequality failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub trajectory: usize,
    pub step: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Results for one inequality across all trajectories.
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub checks: usize,
    pub violations: Vec<Violation>,
}

/// Results of the whole suite.
#[derive(Debug, Clone)]
pub struct LemmaReport {
    pub eta: f64,
    pub trajectories: usize,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn total_checks(&self) -> usize {
        self.checks.iter().map(|c| c.checks).sum()
    }

    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations.len()).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total_violations() == 0
    }

    /// One line per inequality, e.g. `iterate_contraction: 100 checks, 0 violations`.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{}: {} checks, {} violations\n",
                c.name,
                c.checks,
                c.violations.len()
            ));
        }
        out
    }
}

fn slack(lhs: f64, rhs: f64) -> f64 {
    1e-9 * lhs.abs().max(rhs.abs()).max(1.0)
}

struct Recorder {
    check: LemmaCheck,
}

impl Recorder {
    fn new(name: &'static str) -> Self {
        Recorder {
            check: LemmaCheck {
                name,
                checks: 0,
                violations: Vec::new(),
            },
        }
    }

    fn record(&mut self, trajectory: usize, step: usize, lhs: f64, rhs: f64) {
        self.check.checks += 1;
        if lhs > rhs + slack(lhs, rhs) {
            self.check.violations.push(Violation {
                trajectory,
                step,
                lhs,
                rhs,
            });
        }
    }
}

/// Evaluate every inequality on the given trajectories.
///
/// Requires the suite's heterogeneity profile (the per-client minimum is
/// recovered as `f_i(w_star) - gap_i`). `eta` must be the step size the
/// trajectories were generated with.
pub fn lemma_suite(
    suite: &ProblemSuite,
    w_star: &[f64],
    trajectories: &[TrajectorySample],
    eta: f64,
) -> Result<LemmaReport> {
    if w_star.len() != suite.dimension {
        return Err(Error::DimensionMismatch {
            expected: suite.dimension,
            got: w_star.len(),
        });
    }
    let gaps = suite.heterogeneity.as_ref().ok_or_else(|| {
        Error::InvalidConfig("lemma suite needs the suite's heterogeneity profile".into())
    })?;
    if trajectories.is_empty() {
        return Err(Error::InvalidConfig("no trajectories to check".into()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "eta must be positive and finite, got {eta}"
        )));
    }
    let l = suite.smoothness_bound;

    let mut iterate_contraction = Recorder::new("iterate_contraction");
    let mut drift_energy = Recorder::new("drift_energy");
    let mut update_energy = Recorder::new("update_energy");
    let mut gradient_norm_descent = Recorder::new("gradient_norm_descent");
    let mut short_horizon_drift = Recorder::new("short_horizon_drift");
    let mut gradient_dominated_by_gap = Recorder::new("gradient_dominated_by_gap");
    let mut sum_square_inequality = Recorder::new("sum_square_inequality");

    for (t, sample) in trajectories.iter().enumerate() {
        if sample.client >= suite.n_clients() {
            return Err(Error::InvalidConfig(format!(
                "trajectory {t} names client {} of {}",
                sample.client,
                suite.n_clients()
            )));
        }
        let steps = sample.points.len().saturating_sub(1);
        if steps == 0 {
            return Err(Error::InvalidConfig(format!(
                "trajectory {t} has fewer than two points"
            )));
        }
        let client = &suite.clients[sample.client];
        let f_min = client.value(w_star)? - gaps[sample.client];

        let mut values = Vec::with_capacity(steps + 1);
        let mut grads = Vec::with_capacity(steps + 1);
        for point in &sample.points {
            let (v, g) = client.value_grad(point)?;
            values.push(v);
            grads.push(g);
        }
        let start = &sample.points[0];
        let start_gap = values[0] - f_min;

        // Last-iterate contraction toward the global optimum, for
        // eta <= 1/(2L): ||w_E - w*||^2 <= ||w_0 - w*||^2
        //   - (eta/2L) sum of gradient energies + 2 eta E gap.
        if eta <= 1.0 / (2.0 * l) {
            let grad_energy: f64 = grads[..steps].iter().map(|g| vector::dot(g, g)).sum();
            let lhs = {
                let d = vector::distance(&sample.points[steps], w_star);
                d * d
            };
            let d0 = vector::distance(start, w_star);
            let rhs =
                d0 * d0 - eta / (2.0 * l) * grad_energy + 2.0 * eta * steps as f64 * gaps[sample.client];
            iterate_contraction.record(t, steps, lhs, rhs);
        }

        // Drift and update energy against the start gap, for eta <= 1/L:
        // ||w_0 - w_tau||^2 <= 2 eta^2 L tau^2 (f(w_0) - f_min) and
        // ||u||^2 <= 2 L E^2 (f(w_0) - f_min).
        if eta <= 1.0 / l {
            for tau in 1..=steps {
                let drift = vector::distance(start, &sample.points[tau]);
                let rhs = 2.0 * eta * eta * l * (tau * tau) as f64 * start_gap;
                drift_energy.record(t, tau, drift * drift, rhs);
            }
            let mut u = vector::zeros(suite.dimension);
            for g in &grads[..steps] {
                vector::add_assign(&mut u, g);
            }
            let u_sq = vector::dot(&u, &u);
            update_energy.record(t, steps, u_sq, 2.0 * l * (steps * steps) as f64 * start_gap);
        }

        // Gradient norms decrease along the trajectory at any step size:
        // ||g_{tau+1}||^2 <= ||g_tau||^2 - (2/(eta L) - 1) ||g_{tau+1} - g_tau||^2.
        for tau in 0..steps {
            let g_next_sq = vector::dot(&grads[tau + 1], &grads[tau + 1]);
            let g_sq = vector::dot(&grads[tau], &grads[tau]);
            let diff = vector::sub(&grads[tau + 1], &grads[tau]);
            let rhs = g_sq - (2.0 / (eta * l) - 1.0) * vector::dot(&diff, &diff);
            gradient_norm_descent.record(t, tau, g_next_sq, rhs);
        }

        // Short-horizon drift bound, for eta <= 1/(2 L E):
        // ||w_0 - w_tau|| <= 2 eta tau ||g_0||.
        if eta <= 1.0 / (2.0 * l * steps as f64) {
            let g0_norm = vector::norm(&grads[0]);
            for tau in 1..=steps {
                let drift = vector::distance(start, &sample.points[tau]);
                short_horizon_drift.record(t, tau, drift, 2.0 * eta * tau as f64 * g0_norm);
            }
        }

        // Smoothness consequence at every point:
        // ||g(w)||^2 <= 2 L (f(w) - f_min).
        for tau in 0..=steps {
            let g_sq = vector::dot(&grads[tau], &grads[tau]);
            gradient_dominated_by_gap.record(t, tau, g_sq, 2.0 * l * (values[tau] - f_min));
        }

        // Cauchy-Schwarz consequence on the gradient sum:
        // ||sum_tau g_tau||^2 <= E sum_tau ||g_tau||^2.
        {
            let mut sum = vector::zeros(suite.dimension);
            let mut energy = 0.0;
            for g in &grads[..steps] {
                vector::add_assign(&mut sum, g);
                energy += vector::dot(g, g);
            }
            sum_square_inequality.record(
                t,
                steps,
                vector::dot(&sum, &sum),
                steps as f64 * energy,
            );
        }
    }

    Ok(LemmaReport {
        eta,
        trajectories: trajectories.len(),
        checks: vec![
            iterate_contraction.check,
            drift_energy.check,
            update_energy.check,
            gradient_norm_descent.check,
            short_horizon_drift.check,
            gradient_dominated_by_gap.check,
            sum_square_inequality.check,
        ],
    })
}

/// Sample `count` local trajectories of `steps` steps at rate `eta`.
///
/// Start points are `w_star + scale * z` with unit Gaussian directions
/// `z` and scales cycling through {1/2, 1, 2, 4}; the client is drawn
/// uniformly. All draws come from `key`.
pub fn sample_trajectories(
    suite: &ProblemSuite,
    w_star: &[f64],
    count: usize,
    eta: f64,
    steps: usize,
    key: &StreamKey,
) -> Result<Vec<TrajectorySample>> {
    const SCALES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let mut stream = key.child("trajectory", s as u64).stream();
        let client = stream.uniform_index(suite.n_clients());
        let mut start = vector::zeros(suite.dimension);
        stream.fill_gaussian(&mut start, SCALES[s % SCALES.len()]);
        vector::add_assign(&mut start, w_star);
        let points = local_trajectory(&suite.clients[client], &start, eta, steps)?;
        out.push(TrajectorySample { client, points });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ClientObjective, QuadraticClient};

    fn scalar_suite_with_profile() -> (ProblemSuite, Vec<f64>) {
        // f_1 = 1/2 w^2, f_2 = 3/2 (w+2)^2, w* = -1.5, gaps {1.125, 0.375}.
        let clients = vec![
            ClientObjective::Quadratic(QuadraticClient::scalar(1.0, 0.0)),
            ClientObjective::Quadratic(QuadraticClient::scalar(3f64.sqrt(), -2.0)),
        ];
        let mut suite = ProblemSuite::new(clients).unwrap();
        suite.global_optimum = Some(vec![-1.5]);
        suite.heterogeneity = Some(vec![1.125, 0.375]);
        (suite, vec![-1.5])
    }

    #[test]
    fn scalar_short_horizon_drift_matches_hand_values() {
        // f(w) = 1/2 w^2 from w_0 = 1 at eta = 0.25, E = 4:
        // iterates 0.75, 0.5625, 0.421875, 0.31640625 and g_0 = 1, so the
        // drift bound 2 eta tau reads 0.5, 1.0, 1.5, 2.0 while the actual
        // drifts are 0.25, 0.4375, 0.578125, 0.68359375. The inequality
        // itself holds here even though eta exceeds 1/(2LE) = 0.125.
        let client = ClientObjective::Quadratic(QuadraticClient::scalar(1.0, 0.0));
        let points = local_trajectory(&client, &[1.0], 0.25, 4).unwrap();
        let drifts: Vec<f64> = (1..=4).map(|t| (1.0 - points[t][0]).abs()).collect();
        assert_eq!(drifts, vec![0.25, 0.4375, 0.578125, 0.68359375]);
        for (tau, drift) in drifts.iter().enumerate() {
            assert!(*drift <= 2.0 * 0.25 * (tau + 1) as f64);
        }
    }

    #[test]
    fn suite_is_clean_on_conforming_step_sizes() {
        let (suite, w_star) = scalar_suite_with_profile();
        let l = suite.smoothness_bound;
        let eta = 1.0 / (2.0 * l * 4.0); // activates every gated inequality at E = 4
        let key = StreamKey::new(31).child("lemmas", 0);
        let trajectories = sample_trajectories(&suite, &w_star, 24, eta, 4, &key).unwrap();
        let report = lemma_suite(&suite, &w_star, &trajectories, eta).unwrap();
        assert!(report.is_clean(), "{}", report.summary());
        // Every inequality family must actually have been exercised.
        for check in &report.checks {
            assert!(check.checks > 0, "{} never ran", check.name);
        }
    }

    #[test]
    fn gated_inequalities_are_skipped_at_large_step_sizes() {
        let (suite, w_star) = scalar_suite_with_profile();
        let l = suite.smoothness_bound;
        let eta = 1.9 / l; // below the divergence threshold, above every gate
        let key = StreamKey::new(32).child("lemmas", 0);
        let trajectories = sample_trajectories(&suite, &w_star, 8, eta, 3, &key).unwrap();
        let report = lemma_suite(&suite, &w_star, &trajectories, eta).unwrap();
        let by_name = |name: &str| {
            report
                .checks
                .iter()
                .find(|c| c.name == name)
                .unwrap()
                .checks
        };
        assert_eq!(by_name("iterate_contraction"), 0);
        assert_eq!(by_name("drift_energy"), 0);
        assert_eq!(by_name("short_horizon_drift"), 0);
        assert!(by_name("gradient_norm_descent") > 0);
        assert!(by_name("sum_square_inequality") > 0);
    }

    #[test]
    fn missing_profile_is_an_error() {
        let (mut suite, w_star) = scalar_suite_with_profile();
        suite.heterogeneity = None;
        let client = ClientObjective::Quadratic(QuadraticClient::scalar(1.0, 0.0));
        let points = local_trajectory(&client, &[1.0], 0.1, 2).unwrap();
        let trajectories = vec![TrajectorySample { client: 0, points }];
        assert!(matches!(
            lemma_suite(&suite, &w_star, &trajectories, 0.1),
            Err(Error::InvalidConfig(m)) if m.contains("heterogeneity")
        ));
    }

    #[test]
    fn a_planted_violation_is_caught() {
        // Corrupting the profile (gap too small) must break the
        // contraction inequality for some trajectory.
        let (mut suite, w_star) = scalar_suite_with_profile();
        suite.heterogeneity = Some(vec![-1.0, -1.0]);
        let l = suite.smoothness_bound;
        let eta = 1.0 / (2.0 * l * 4.0);
        let key = StreamKey::new(33).child("lemmas", 0);
        let trajectories = sample_trajectories(&suite, &w_star, 16, eta, 4, &key).unwrap();
        let report = lemma_suite(&suite, &w_star, &trajectories, eta).unwrap();
        let contraction = report
            .checks
            .iter()
            .find(|c| c.name == "iterate_contraction")
            .unwrap();
        assert!(!contraction.violations.is_empty());
    }
}
