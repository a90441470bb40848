//! The federated simulation loop.
//!
//! One engine runs all three algorithm variants; the only difference is
//! the sensitivity policy applied to local updates (clip, normalize, or
//! pass-through) and whether calibrated Gaussian noise is added. Noise is
//! drawn from streams named by `(round, client)`, so two variants run
//! with the same master seed consume identical noise, which is what makes
//! clip-versus-normalize comparisons paired rather than merely averaged.
//!
//! Client work inside a round runs on the rayon pool; results are
//! collected in cohort order and reduced sequentially, so the outcome is
//! independent of thread count.

use rayon::prelude::*;

use crate::analysis::metrics::{snr, RoundRecord};
use crate::error::{Error, Result};
use crate::objectives::ProblemSuite;
use crate::privacy::{
    calibrate_noise_variance, gaussian_vector, warn_epsilon_regime, NoiseScale, PrivacyBudget,
};
use crate::stream::StreamKey;
use crate::vector;

use super::ops::{aggregate_and_step, learning_rate, local_updates, sample_cohort, ScheduleSpec};

/// How a client's raw update is bounded before transmission.
#[derive(Debug, Clone, PartialEq)]
pub enum SensitivityPolicy {
    /// Scale onto the ball of radius `scale` when longer.
    Clip { scale: f64 },
    /// Scale onto the sphere of radius `scale` always.
    Normalize { scale: f64 },
    /// Transmit the raw update (non-private baseline).
    None,
}

impl SensitivityPolicy {
    pub fn apply(&self, update: &[f64]) -> Vec<f64> {
        match self {
            SensitivityPolicy::Clip { scale } => super::ops::clip(update, *scale),
            SensitivityPolicy::Normalize { scale } => super::ops::normalize(update, *scale),
            SensitivityPolicy::None => update.to_vec(),
        }
    }

    /// The sensitivity bound `C`, when one is enforced.
    pub fn scale(&self) -> Option<f64> {
        match self {
            SensitivityPolicy::Clip { scale } | SensitivityPolicy::Normalize { scale } => {
                Some(*scale)
            }
            SensitivityPolicy::None => None,
        }
    }
}

/// Full description of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub rounds: usize,
    pub local_steps: usize,
    /// Expected cohort size `r`; participation probability is `r/n`.
    pub expected_cohort: f64,
    pub schedule: ScheduleSpec,
    pub policy: SensitivityPolicy,
    /// Required with a bounding policy, forbidden without one.
    pub budget: Option<PrivacyBudget>,
    pub init: Vec<f64>,
    pub master_seed: u64,
    /// Divide aggregates by the realized cohort size instead of `r`.
    pub average_by_actual: bool,
    /// Keep every global iterate (memory scales with `rounds * d`).
    pub record_iterates: bool,
    /// Record per-round, per-client update norms and objective values for
    /// bound evaluation.
    pub record_bound_trace: bool,
}

/// Per-round, per-cohort-member quantities needed to evaluate the
/// convergence bounds empirically.
#[derive(Debug, Clone, Default)]
pub struct BoundTrace {
    /// `cohorts[k]` lists the participating client ids of round `k`.
    pub cohorts: Vec<Vec<usize>>,
    /// `update_norms[k][j]` is `||u||` of cohort member `j` in round `k`.
    pub update_norms: Vec<Vec<f64>>,
    /// `client_values[k][j]` is that member's objective at the round start.
    pub client_values: Vec<Vec<f64>>,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    /// Iterate after the final round.
    pub final_iterate: Vec<f64>,
    /// The uniformly drawn round index whose iterate is released.
    pub privatized_index: usize,
    /// Iterate at the start of the privatized round.
    pub privatized_iterate: Vec<f64>,
    /// `w_0 .. w_K` when `record_iterates` was set.
    pub iterates: Option<Vec<Vec<f64>>>,
    pub bound_trace: Option<BoundTrace>,
    pub noise: NoiseScale,
    /// Zero-magnitude updates hit by the normalization policy.
    pub zero_update_events: usize,
}

fn validate(suite: &ProblemSuite, config: &RunConfig) -> Result<()> {
    if config.rounds == 0 || config.local_steps == 0 {
        return Err(Error::InvalidConfig(
            "rounds and local_steps must be at least 1".into(),
        ));
    }
    if config.init.len() != suite.dimension {
        return Err(Error::DimensionMismatch {
            expected: suite.dimension,
            got: config.init.len(),
        });
    }
    let n = suite.n_clients() as f64;
    if !(config.expected_cohort >= 1.0 && config.expected_cohort <= n) {
        return Err(Error::InvalidConfig(format!(
            "expected cohort size must lie in [1, {n}], got {}",
            config.expected_cohort
        )));
    }
    config.schedule.validate()?;
    match (&config.policy, &config.budget) {
        (SensitivityPolicy::None, Some(_)) => Err(Error::InvalidConfig(
            "a privacy budget without a bounding policy has unbounded sensitivity; \
             choose clipping or normalization"
                .into(),
        )),
        (SensitivityPolicy::None, Option::None) => Ok(()),
        (policy, Option::None) => Err(Error::InvalidConfig(format!(
            "policy {policy:?} bounds sensitivity for privacy, but no budget was given"
        ))),
        (policy, Some(budget)) => {
            let scale = policy.scale().expect("bounding policy has a scale");
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "sensitivity scale must be positive and finite, got {scale}"
                )));
            }
            if budget.n_clients != suite.n_clients() {
                return Err(Error::InvalidConfig(format!(
                    "budget is for {} clients but the suite has {}",
                    budget.n_clients,
                    suite.n_clients()
                )));
            }
            if budget.dimension != suite.dimension {
                return Err(Error::InvalidConfig(format!(
                    "budget is for dimension {} but the suite has {}",
                    budget.dimension, suite.dimension
                )));
            }
            Ok(())
        }
    }
}

/// Run the federated loop described by `config` over `suite`.
///
/// The suboptimality column is measured against the suite's cached global
/// optimum; without one it holds the raw objective value.
pub fn run_federated(suite: &ProblemSuite, config: &RunConfig) -> Result<RunOutput> {
    validate(suite, config)?;
    let n = suite.n_clients();
    let d = suite.dimension;
    let expected = config.expected_cohort;

    let noise = match (&config.policy, &config.budget) {
        (SensitivityPolicy::None, _) => NoiseScale::non_private(),
        (policy, Some(budget)) => {
            warn_epsilon_regime(budget, config.rounds, expected);
            calibrate_noise_variance(
                budget,
                config.rounds,
                policy.scale().expect("bounding policy has a scale"),
            )?
        }
        _ => unreachable!("validate checked policy/budget pairing"),
    };
    let per_client_variance = noise.per_client_variance(expected);

    let f_star = match &suite.global_optimum {
        Some(w_star) => Some(suite.global_value(w_star)?),
        Option::None => Option::None,
    };

    let root = StreamKey::new(config.master_seed);
    // Drawn up front from its own stream; the iterate is captured in passing.
    let privatized_index = root
        .child("privatized", 0)
        .stream()
        .uniform_index(config.rounds);

    let mut w = config.init.clone();
    let mut momentum = vector::zeros(d);
    let mut records = Vec::with_capacity(config.rounds);
    let mut iterates = if config.record_iterates {
        let mut v = Vec::with_capacity(config.rounds + 1);
        v.push(w.clone());
        Some(v)
    } else {
        Option::None
    };
    let mut bound_trace = if config.record_bound_trace {
        Some(BoundTrace::default())
    } else {
        Option::None
    };
    let mut privatized_iterate = Vec::new();
    let mut zero_update_events = 0usize;

    for k in 0..config.rounds {
        if k == privatized_index {
            privatized_iterate = w.clone();
        }
        let (eta, beta) = learning_rate(&config.schedule, k);
        let cohort = sample_cohort(&root.child("cohort", k as u64), n, expected);

        struct ClientResult {
            update_norm: f64,
            bounded: Vec<f64>,
            noise: Vec<f64>,
            value: f64,
        }
        let noise_root = root.child("noise", k as u64);
        let need_values = bound_trace.is_some();
        let w_ref = &w;
        let results: Vec<Result<ClientResult>> = cohort
            .par_iter()
            .map(|&i| {
                let client = &suite.clients[i];
                let lu = local_updates(client, w_ref, eta, config.local_steps).map_err(|e| {
                    match e {
                        Error::NonFiniteGradient { step } => Error::Diverged {
                            round: k,
                            client: i,
                            step,
                        },
                        other => other,
                    }
                })?;
                let update_norm = vector::norm(&lu.update);
                let bounded = config.policy.apply(&lu.update);
                let noise_vec =
                    gaussian_vector(&noise_root.child("client", i as u64), d, per_client_variance);
                let value = if need_values { client.value(w_ref)? } else { 0.0 };
                Ok(ClientResult {
                    update_norm,
                    bounded,
                    noise: noise_vec,
                    value,
                })
            })
            .collect();

        let mut messages = Vec::with_capacity(cohort.len());
        let mut signal_sum = vector::zeros(d);
        let mut noise_sum = vector::zeros(d);
        let mut norms = Vec::with_capacity(cohort.len());
        let mut values = Vec::with_capacity(cohort.len());
        for result in results {
            let r = result?;
            if r.update_norm == 0.0 && matches!(config.policy, SensitivityPolicy::Normalize { .. })
            {
                zero_update_events += 1;
            }
            vector::add_assign(&mut signal_sum, &r.bounded);
            vector::add_assign(&mut noise_sum, &r.noise);
            let mut message = r.bounded;
            vector::add_assign(&mut message, &r.noise);
            messages.push(message);
            norms.push(r.update_norm);
            if need_values {
                values.push(r.value);
            }
        }

        let suboptimality = suite.global_value(&w)? - f_star.unwrap_or(0.0);
        let (u_mean, u_min, u_max) = if norms.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let sum: f64 = norms.iter().sum();
            (
                sum / norms.len() as f64,
                norms.iter().copied().fold(f64::INFINITY, f64::min),
                norms.iter().copied().fold(0.0, f64::max),
            )
        };
        let clip_active_fraction = match config.policy.scale() {
            Some(scale) if !norms.is_empty() => {
                norms.iter().filter(|&&un| un > scale).count() as f64 / norms.len() as f64
            }
            _ => 0.0,
        };
        records.push(RoundRecord {
            round: k,
            suboptimality,
            snr: snr(&signal_sum, &noise_sum),
            cohort_size: cohort.len(),
            u_mean,
            u_min,
            u_max,
            clip_active_fraction,
            eta,
        });
        if let Some(trace) = bound_trace.as_mut() {
            trace.cohorts.push(cohort.clone());
            trace.update_norms.push(norms);
            trace.client_values.push(values);
        }

        let divisor = if config.average_by_actual {
            cohort.len().max(1) as f64
        } else {
            expected
        };
        w = aggregate_and_step(
            &w,
            &messages,
            divisor,
            beta,
            &mut momentum,
            config.schedule.server_momentum,
        );
        if !vector::all_finite(&w) {
            return Err(Error::Diverged {
                round: k,
                client: usize::MAX,
                step: config.local_steps,
            });
        }
        if let Some(iters) = iterates.as_mut() {
            iters.push(w.clone());
        }
    }

    Ok(RunOutput {
        records,
        final_iterate: w,
        privatized_index,
        privatized_iterate,
        iterates,
        bound_trace,
        noise,
        zero_update_events,
    })
}
