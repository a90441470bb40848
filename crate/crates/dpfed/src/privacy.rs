//! Privacy budget handling and Gaussian noise calibration.
//!
//! The simulator targets client-level `(epsilon, delta)` differential
//! privacy. The per-coordinate noise variance each client adds to its
//! message scales with the rounds, the sensitivity bound, and the budget;
//! the convergence analysis is organized around a single derived key
//! quantity `rho` that must stay below one for the calibration to be in
//! its meaningful regime.

use crate::error::{Error, Result};
use crate::stream::StreamKey;
use crate::vector;

/// A client-level `(epsilon, delta)` budget for a population of `n_clients`
/// models of dimension `dimension`, with the calibration constant `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    pub q_constant: f64,
    pub n_clients: usize,
    pub dimension: usize,
}

impl PrivacyBudget {
    /// Validates ranges: `epsilon > 0`, `delta` in `(0, 1)`, `q > 0`,
    /// and a non-empty population and model.
    pub fn new(
        epsilon: f64,
        delta: f64,
        q_constant: f64,
        n_clients: usize,
        dimension: usize,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidBudget(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidBudget(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(q_constant > 0.0 && q_constant.is_finite()) {
            return Err(Error::InvalidBudget(format!(
                "q must be positive and finite, got {q_constant}"
            )));
        }
        if n_clients == 0 {
            return Err(Error::InvalidBudget("n_clients must be at least 1".into()));
        }
        if dimension == 0 {
            return Err(Error::InvalidBudget("dimension must be at least 1".into()));
        }
        Ok(PrivacyBudget {
            epsilon,
            delta,
            q_constant,
            n_clients,
            dimension,
        })
    }
}

/// The key quantity `rho = sqrt(q * d * ln(1/delta)) / (n * epsilon)`.
///
/// Every convergence bound in this crate is a function of `rho`; it also
/// gates calibration: values at or above 1 mean the population is too
/// small for the requested budget, returning [`Error::NTooSmall`].
pub fn key_quantity_rho(budget: &PrivacyBudget) -> Result<f64> {
    let rho = (budget.q_constant * budget.dimension as f64 * (1.0 / budget.delta).ln()).sqrt()
        / (budget.n_clients as f64 * budget.epsilon);
    if !(rho < 1.0) {
        return Err(Error::NTooSmall { rho });
    }
    Ok(rho)
}

/// Per-coordinate variance of the Gaussian mechanism, before the cohort
/// factor. A run over `rounds` rounds with sensitivity bound `clip_scale`
/// gives each client noise `N(0, r * sigma_squared I)` where `r` is the
/// expected cohort size; [`per_client_variance`](NoiseScale::per_client_variance)
/// applies that factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    pub sigma_squared: f64,
}

impl NoiseScale {
    /// Zero noise, for non-private baselines.
    pub fn non_private() -> Self {
        NoiseScale { sigma_squared: 0.0 }
    }

    /// Per-coordinate variance of the noise one client adds, `r * sigma^2`.
    pub fn per_client_variance(&self, expected_cohort: f64) -> f64 {
        expected_cohort * self.sigma_squared
    }
}

/// Calibrate `sigma^2 = q * K * C^2 * ln(1/delta) / (n^2 * epsilon^2)`.
///
/// `rounds` is the total round count `K` and `clip_scale` the sensitivity
/// bound `C` enforced by clipping or normalization. The budget must be in
/// the meaningful regime (`rho < 1`).
pub fn calibrate_noise_variance(
    budget: &PrivacyBudget,
    rounds: usize,
    clip_scale: f64,
) -> Result<NoiseScale> {
    if rounds == 0 {
        return Err(Error::InvalidBudget("rounds must be at least 1".into()));
    }
    if !(clip_scale >= 0.0 && clip_scale.is_finite()) {
        return Err(Error::InvalidBudget(format!(
            "clip scale must be non-negative and finite, got {clip_scale}"
        )));
    }
    key_quantity_rho(budget)?;
    let n = budget.n_clients as f64;
    let sigma_squared = budget.q_constant * rounds as f64 * clip_scale * clip_scale
        * (1.0 / budget.delta).ln()
        / (n * n * budget.epsilon * budget.epsilon);
    Ok(NoiseScale { sigma_squared })
}

/// Log a warning when `epsilon` exceeds the regime in which the calibrated
/// mechanism's guarantee is known to hold (`epsilon < r^2 K / n^2`).
pub fn warn_epsilon_regime(budget: &PrivacyBudget, rounds: usize, expected_cohort: f64) {
    let n = budget.n_clients as f64;
    let limit = expected_cohort * expected_cohort * rounds as f64 / (n * n);
    if budget.epsilon >= limit {
        log::warn!(
            "epsilon = {} is outside the calibrated regime (needs epsilon < r^2 K / n^2 = {}); \
             the noise level is still applied as specified",
            budget.epsilon,
            limit
        );
    }
}

/// Draw a `dimension`-length vector with i.i.d. `N(0, variance)` entries
/// from the stream named by `key`.
///
/// `variance == 0` returns zeros without opening the stream, so private
/// and non-private variants consume identical stream names.
pub fn gaussian_vector(key: &StreamKey, dimension: usize, variance: f64) -> Vec<f64> {
    assert!(
        variance >= 0.0 && variance.is_finite(),
        "noise variance must be non-negative and finite, got {variance}"
    );
    if variance == 0.0 {
        return vector::zeros(dimension);
    }
    let mut out = vector::zeros(dimension);
    key.stream().fill_gaussian(&mut out, variance.sqrt());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(epsilon: f64, delta: f64, q: f64, n: usize, d: usize) -> PrivacyBudget {
        PrivacyBudget::new(epsilon, delta, q, n, d).unwrap()
    }

    #[test]
    fn rho_matches_frozen_value() {
        // sqrt(1 * 200 * ln(1e6)) / (1000 * 5), evaluated independently.
        let b = budget(5.0, 1e-6, 1.0, 1000, 200);
        assert_eq!(key_quantity_rho(&b).unwrap(), 0.010513043539513864);
    }

    #[test]
    fn rho_at_or_above_one_is_n_too_small() {
        // d = 1, q = 1, delta = e^-1, n = 1, epsilon = 1 gives rho = 1 exactly.
        let b = budget(1.0, (-1.0f64).exp(), 1.0, 1, 1);
        match key_quantity_rho(&b) {
            Err(Error::NTooSmall { rho }) => assert_eq!(rho, 1.0),
            other => panic!("expected NTooSmall, got {other:?}"),
        }
        // A slightly larger population crosses back under 1.
        let ok = budget(1.0, (-1.0f64).exp(), 1.0, 2, 1);
        assert!(key_quantity_rho(&ok).unwrap() < 1.0);
    }

    #[test]
    fn sigma_squared_matches_hand_example() {
        // q = 1, K = 1, C = 2, delta = e^-1, n = 1, epsilon = 1:
        // sigma^2 = 1 * 1 * 4 * 1 / 1 = 4. The budget itself has rho = 1,
        // so use n = 2 and scale: sigma^2 = 4 / n^2 = 1.
        let b = budget(1.0, (-1.0f64).exp(), 1.0, 2, 1);
        let scale = calibrate_noise_variance(&b, 1, 2.0).unwrap();
        assert_eq!(scale.sigma_squared, 1.0);
        assert_eq!(scale.per_client_variance(2.0), 2.0);
    }

    #[test]
    fn sigma_squared_matches_frozen_paper_scale_value() {
        // q = 1, K = 500, C = 1000, delta = 1e-6, n = 100, epsilon = 5,
        // evaluated independently.
        let b = budget(5.0, 1e-6, 1.0, 100, 200);
        let scale = calibrate_noise_variance(&b, 500, 1000.0).unwrap();
        assert_eq!(scale.sigma_squared, 27631.021115928546);
    }

    #[test]
    fn sigma_squared_scales_linearly_in_rounds_and_quadratically_in_scale() {
        let b = budget(5.0, 1e-6, 1.0, 100, 200);
        let base = calibrate_noise_variance(&b, 250, 10.0).unwrap().sigma_squared;
        let double_rounds = calibrate_noise_variance(&b, 500, 10.0).unwrap().sigma_squared;
        let double_scale = calibrate_noise_variance(&b, 250, 20.0).unwrap().sigma_squared;
        assert_eq!(double_rounds, 2.0 * base);
        assert_eq!(double_scale, 4.0 * base);
    }

    #[test]
    fn budget_validation_names_the_offending_parameter() {
        assert!(matches!(
            PrivacyBudget::new(0.0, 1e-6, 1.0, 10, 10),
            Err(Error::InvalidBudget(msg)) if msg.contains("epsilon")
        ));
        assert!(matches!(
            PrivacyBudget::new(1.0, 1.0, 1.0, 10, 10),
            Err(Error::InvalidBudget(msg)) if msg.contains("delta")
        ));
        assert!(matches!(
            PrivacyBudget::new(1.0, 1e-6, 0.0, 10, 10),
            Err(Error::InvalidBudget(msg)) if msg.contains("q")
        ));
    }

    #[test]
    fn zero_variance_noise_is_exactly_zero() {
        let key = StreamKey::new(11).child("noise", 0);
        let z = gaussian_vector(&key, 5, 0.0);
        assert_eq!(z, vec![0.0; 5]);
    }

    #[test]
    fn gaussian_vector_replays_per_key() {
        let key = StreamKey::new(11).child("noise", 4).child("client", 2);
        let a = gaussian_vector(&key, 7, 3.0);
        let b = gaussian_vector(&key, 7, 3.0);
        assert_eq!(a, b);
        let c = gaussian_vector(&key.child("client", 3), 7, 3.0);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_vector_scales_by_std_exactly() {
        // Same stream, variance v vs 4v: draws differ by an exact factor 2
        // because the transform multiplies the unit normal by sqrt(v).
        let key = StreamKey::new(13).child("noise", 0);
        let a = gaussian_vector(&key, 6, 2.25);
        let b = gaussian_vector(&key, 6, 9.0);
        for i in 0..6 {
            assert_eq!(b[i], 2.0 * a[i]);
        }
    }
}
