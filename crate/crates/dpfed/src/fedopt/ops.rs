//! The primitive per-round operations of the federated loop: sensitivity
//! control (clipping and normalization), local full-gradient descent,
//! Bernoulli cohort sampling, server aggregation, and the learning-rate
//! schedule. The simulation engine composes these; the analysis module
//! checks inequalities against them.

use crate::error::{Error, Result};
use crate::objectives::ClientObjective;
use crate::stream::StreamKey;
use crate::vector;

/// Scale `z` onto the ball of radius `c`: `z * min(1, c/||z||)`.
///
/// Inputs already inside the ball (including zero) pass through
/// unchanged. For `||z|| >= c` this computes exactly the same expression
/// as [`normalize`], so the two operators agree bitwise there.
pub fn clip(z: &[f64], c: f64) -> Vec<f64> {
    assert!(c > 0.0 && c.is_finite(), "clip scale must be positive, got {c}");
    let n = vector::norm(z);
    if n <= c {
        z.to_vec()
    } else {
        vector::scaled(z, c / n)
    }
}

/// Scale `z` onto the sphere of radius `c`: `c * z / ||z||`.
///
/// The zero vector has no direction; it maps to zero and the event is
/// logged, since a normalized message of zero is the one case where this
/// operator transmits less than full magnitude `c`.
pub fn normalize(z: &[f64], c: f64) -> Vec<f64> {
    assert!(c > 0.0 && c.is_finite(), "normalize scale must be positive, got {c}");
    let n = vector::norm(z);
    if n == 0.0 {
        log::debug!("normalize: zero-magnitude update mapped to zero");
        vector::zeros(z.len())
    } else {
        vector::scaled(z, c / n)
    }
}

/// Result of one client's local work in a round.
#[derive(Debug, Clone)]
pub struct LocalUpdate {
    /// Iterate after the last local step.
    pub w_end: Vec<f64>,
    /// Sum of the local gradients. Equal to `(w_start - w_end)/eta` in
    /// exact arithmetic; the sum form avoids that quotient's cancellation.
    pub update: Vec<f64>,
}

/// Run `steps` full-gradient descent steps from `w_start` at rate `eta`.
pub fn local_updates(
    client: &ClientObjective,
    w_start: &[f64],
    eta: f64,
    steps: usize,
) -> Result<LocalUpdate> {
    let mut w = w_start.to_vec();
    let mut update = vector::zeros(w.len());
    for step in 0..steps {
        let g = client.grad(&w)?;
        if !vector::all_finite(&g) {
            return Err(Error::NonFiniteGradient { step });
        }
        vector::add_assign(&mut update, &g);
        vector::add_scaled(&mut w, -eta, &g);
    }
    Ok(LocalUpdate { w_end: w, update })
}

/// As [`local_updates`], but return every local iterate `w_0 .. w_steps`.
pub fn local_trajectory(
    client: &ClientObjective,
    w_start: &[f64],
    eta: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut points = Vec::with_capacity(steps + 1);
    let mut w = w_start.to_vec();
    points.push(w.clone());
    for step in 0..steps {
        let g = client.grad(&w)?;
        if !vector::all_finite(&g) {
            return Err(Error::NonFiniteGradient { step });
        }
        vector::add_scaled(&mut w, -eta, &g);
        points.push(w.clone());
    }
    Ok(points)
}

/// Independent Bernoulli participation: client `i` joins with probability
/// `expected / n`, drawn in client order from the stream named by `key`.
/// Returns ascending client ids. `expected == n` makes every draw succeed,
/// so full participation is deterministic.
pub fn sample_cohort(key: &StreamKey, n: usize, expected: f64) -> Vec<usize> {
    let p = expected / n as f64;
    let mut stream = key.stream();
    (0..n).filter(|_| stream.bernoulli(p)).collect()
}

/// Average the cohort's messages by `divisor`, fold the average into the
/// momentum buffer (`m <- mu * m + a`), and take the server step
/// `w - beta * m`. An empty cohort contributes a zero average, so only
/// leftover momentum moves the model.
pub fn aggregate_and_step(
    w: &[f64],
    messages: &[Vec<f64>],
    divisor: f64,
    beta: f64,
    momentum: &mut [f64],
    momentum_decay: f64,
) -> Vec<f64> {
    debug_assert!(divisor > 0.0 || messages.is_empty());
    let mut average = vector::zeros(w.len());
    for msg in messages {
        vector::add_assign(&mut average, msg);
    }
    if !messages.is_empty() {
        vector::scale_in_place(&mut average, 1.0 / divisor);
    }
    for i in 0..momentum.len() {
        momentum[i] = momentum_decay * momentum[i] + average[i];
    }
    let mut w_next = w.to_vec();
    vector::add_scaled(&mut w_next, -beta, momentum);
    w_next
}

/// Learning-rate schedule: either a constant, or `eta0 * decay^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub eta0: f64,
    /// Per-round multiplicative decay in `(0, 1]`.
    pub decay: f64,
    /// Pin the server rate to the client rate; otherwise the server
    /// applies the aggregate directly (`beta = 1`).
    pub beta_equals_eta: bool,
    /// Fixed rate overriding the decayed schedule.
    pub constant_override: Option<f64>,
    /// Server momentum decay `mu` in `[0, 1)`.
    pub server_momentum: f64,
}

impl ScheduleSpec {
    /// Constant client and server rate, no momentum.
    pub fn constant(eta: f64) -> Self {
        ScheduleSpec {
            eta0: eta,
            decay: 1.0,
            beta_equals_eta: true,
            constant_override: Some(eta),
            server_momentum: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if let Some(c) = self.constant_override {
            if !positive(c) {
                return Err(Error::InvalidConfig(format!(
                    "constant learning rate must be positive, got {c}"
                )));
            }
        } else if !positive(self.eta0) {
            return Err(Error::InvalidConfig(format!(
                "eta0 must be positive, got {}",
                self.eta0
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay must lie in (0, 1], got {}",
                self.decay
            )));
        }
        if !(0.0..1.0).contains(&self.server_momentum) {
            return Err(Error::InvalidConfig(format!(
                "server momentum must lie in [0, 1), got {}",
                self.server_momentum
            )));
        }
        Ok(())
    }
}

/// Client and server rates `(eta_k, beta_k)` for round `k`.
pub fn learning_rate(schedule: &ScheduleSpec, round: usize) -> (f64, f64) {
    let eta = match schedule.constant_override {
        Some(c) => c,
        None => schedule.eta0 * schedule.decay.powi(round as i32),
    };
    let beta = if schedule.beta_equals_eta { eta } else { 1.0 };
    (eta, beta)
}
