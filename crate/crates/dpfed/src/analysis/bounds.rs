//! Closed-form convergence bounds for the private runs, plus the
//! empirical indicator-weighted objectives they dominate.
//!
//! All bounds are functions of the calibration key quantity `rho` and the
//! run geometry (smoothness `L`, sensitivity level `c_hat`, local steps
//! `E`, curvature/radius constants `alpha`, `gamma`, init distance `D`,
//! and the per-client heterogeneity profile). The clipped-update bound
//! splits rounds into clients whose raw update stayed under `c_hat * E`
//! and those above; the normalized-update bound reweights the interior
//! terms by `c_hat * E / ||u||`, which requires the per-round update
//! norms of an actual run.

use crate::error::{Error, Result};

/// Inputs shared by the closed-form bounds.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    /// Smoothness bound `L` of every client objective.
    pub smoothness: f64,
    /// Calibration key quantity `rho`, in `(0, 1)`.
    pub rho: f64,
    /// Sensitivity level per local step; the transmitted bound is
    /// `c_hat * local_steps`.
    pub c_hat: f64,
    /// Local step count `E`.
    pub local_steps: usize,
    /// Free analysis constant `alpha >= 1`.
    pub alpha: f64,
    /// Free radius constant `gamma > 0` (optimized at `L * D`).
    pub gamma: f64,
    /// Distance `D` from the initial iterate to the global optimum.
    pub init_distance: f64,
    /// Per-client gaps `f_i(w*) - min f_i`.
    pub heterogeneity: Vec<f64>,
}

impl BoundInputs {
    pub fn max_heterogeneity(&self) -> f64 {
        self.heterogeneity.iter().fold(0.0, |a: f64, &b| a.max(b))
    }

    pub fn mean_heterogeneity(&self) -> f64 {
        self.heterogeneity.iter().sum::<f64>() / self.heterogeneity.len() as f64
    }

    /// Check the hypotheses common to the clipped and normalized bounds:
    /// `rho` in `(0,1)`, `alpha >= 1`, `E <= alpha / (2 rho)`, and
    /// `c_hat >= 4 sqrt(L * max heterogeneity)`.
    pub fn validate(&self) -> Result<()> {
        if self.heterogeneity.is_empty() {
            return Err(Error::BoundPrecondition(
                "heterogeneity profile is empty".into(),
            ));
        }
        if self.heterogeneity.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::BoundPrecondition(
                "heterogeneity gaps must be finite and non-negative".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::BoundPrecondition(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::BoundPrecondition(format!(
                "alpha must be at least 1, got {}",
                self.alpha
            )));
        }
        if !(self.smoothness > 0.0 && self.gamma > 0.0) {
            return Err(Error::BoundPrecondition(format!(
                "smoothness and gamma must be positive, got L = {}, gamma = {}",
                self.smoothness, self.gamma
            )));
        }
        if !(self.init_distance >= 0.0 && self.init_distance.is_finite()) {
            return Err(Error::BoundPrecondition(format!(
                "init distance must be finite and non-negative, got {}",
                self.init_distance
            )));
        }
        if self.local_steps == 0 {
            return Err(Error::BoundPrecondition("local_steps must be >= 1".into()));
        }
        let e = self.local_steps as f64;
        if e > self.alpha / (2.0 * self.rho) {
            return Err(Error::BoundPrecondition(format!(
                "E = {e} exceeds alpha/(2 rho) = {}",
                self.alpha / (2.0 * self.rho)
            )));
        }
        let floor = 4.0 * (self.smoothness * self.max_heterogeneity()).sqrt();
        if self.c_hat < floor {
            return Err(Error::BoundPrecondition(format!(
                "c_hat = {} is below the heterogeneity floor 4 sqrt(L max gap) = {floor}",
                self.c_hat
            )));
        }
        Ok(())
    }

    /// The geometry term shared by both bounds:
    /// `c_hat * (L D^2 / gamma + gamma / L) * rho`.
    fn geometry_term(&self) -> f64 {
        self.c_hat
            * (self.smoothness * self.init_distance * self.init_distance / self.gamma
                + self.gamma / self.smoothness)
            * self.rho
    }
}

/// Components of the clipped-update bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipBound {
    /// Geometry term `c_hat (L D^2/gamma + gamma/L) rho`.
    pub geometry: f64,
    /// Heterogeneity term `(3E / 2 alpha) * mean(gap) * rho`.
    pub heterogeneity: f64,
    pub rhs: f64,
}

/// Upper bound dominated by the clipped runs' indicator-weighted
/// objective ([`empirical_clip_lhs`]).
///
/// The heterogeneity term uses the unconditional mean gap, an upper proxy
/// for the indicator-restricted mean appearing in the exact statement.
pub fn clip_bound(inputs: &BoundInputs) -> Result<ClipBound> {
    inputs.validate()?;
    let e = inputs.local_steps as f64;
    let geometry = inputs.geometry_term();
    let heterogeneity =
        (3.0 * e / (2.0 * inputs.alpha)) * inputs.mean_heterogeneity() * inputs.rho;
    Ok(ClipBound {
        geometry,
        heterogeneity,
        rhs: geometry + heterogeneity,
    })
}

/// Simplified reporting-only form of the clipped bound at the optimized
/// constants (`gamma = L D`, interior coefficient folded to its floor):
/// `(2 c_hat D + (6/5) E mean(gap)) * rho`.
pub fn simplified_clip_bound(inputs: &BoundInputs) -> f64 {
    let e = inputs.local_steps as f64;
    (2.0 * inputs.c_hat * inputs.init_distance
        + (6.0 / 5.0) * e * inputs.mean_heterogeneity())
        * inputs.rho
}

/// Components of the normalized-update bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBound {
    /// Geometry term, identical to the clipped bound's.
    pub geometry: f64,
    /// Trace-dependent heterogeneity term.
    pub heterogeneity: f64,
    pub rhs: f64,
}

/// Upper bound dominated by the normalized runs' reweighted objective
/// ([`empirical_norm_lhs`]).
///
/// `update_norms[k][i]` must hold `||u||` for every client of round `k`
/// (full participation), from the run being bounded. Interior clients at
/// exactly zero update norm sit at their own minimum, where both sides'
/// contributions are non-positive, and are skipped.
pub fn norm_bound(inputs: &BoundInputs, update_norms: &[Vec<f64>]) -> Result<NormBound> {
    inputs.validate()?;
    if update_norms.is_empty() {
        return Err(Error::BoundPrecondition(
            "need at least one round of update norms".into(),
        ));
    }
    let n = inputs.heterogeneity.len();
    let e = inputs.local_steps as f64;
    let threshold = inputs.c_hat * e;
    let base = inputs.c_hat * inputs.c_hat / (2.0 * inputs.alpha * inputs.smoothness);
    let mut round_mean_sum = 0.0;
    for (k, norms) in update_norms.iter().enumerate() {
        if norms.len() != n {
            return Err(Error::BoundPrecondition(format!(
                "round {k} records {} update norms but the profile has {n} clients \
                 (the bound needs full participation)",
                norms.len()
            )));
        }
        let mut acc = 0.0;
        for (i, &u) in norms.iter().enumerate() {
            if u > 0.0 && u <= threshold {
                acc += base
                    + (threshold / u) * inputs.heterogeneity[i] * inputs.rho * e
                        / (inputs.alpha * inputs.alpha);
            }
        }
        round_mean_sum += acc / n as f64;
    }
    let geometry = inputs.geometry_term();
    let heterogeneity =
        inputs.rho * e * (round_mean_sum / update_norms.len() as f64);
    Ok(NormBound {
        geometry,
        heterogeneity,
        rhs: geometry + heterogeneity,
    })
}

/// Empirical indicator-weighted objective dominated by [`clip_bound`]:
/// the round-averaged
/// `(1/n) sum_i [ 1{||u|| <= c_hat E} (2 - rho E/alpha - rho^2 E^2/alpha^2) gap_i
///              + 1{||u|| > c_hat E} (3 c_hat / 8 L E) ||u|| ]`
/// where `gap_i = f_i(w_k) - f_i(w*)`.
pub fn empirical_clip_lhs(
    inputs: &BoundInputs,
    update_norms: &[Vec<f64>],
    value_gaps: &[Vec<f64>],
) -> f64 {
    let e = inputs.local_steps as f64;
    let rho_e = inputs.rho * e / inputs.alpha;
    let interior_coef = 2.0 - rho_e - rho_e * rho_e;
    let exterior_coef = 3.0 * inputs.c_hat / (8.0 * inputs.smoothness * e);
    let threshold = inputs.c_hat * e;
    round_average(update_norms, value_gaps, |u, gap| {
        if u <= threshold {
            interior_coef * gap
        } else {
            exterior_coef * u
        }
    })
}

/// Empirical reweighted objective dominated by [`norm_bound`]:
/// the round-averaged
/// `(1/n) sum_i [ 1{0 < ||u|| <= c_hat E} (2 - rho^2 E^2/alpha^2) (c_hat E/||u||) gap_i
///              + 1{||u|| > c_hat E} (3 c_hat ||u|| / 8 L E) ]`.
pub fn empirical_norm_lhs(
    inputs: &BoundInputs,
    update_norms: &[Vec<f64>],
    value_gaps: &[Vec<f64>],
) -> f64 {
    let e = inputs.local_steps as f64;
    let rho_e = inputs.rho * e / inputs.alpha;
    let interior_coef = 2.0 - rho_e * rho_e;
    let exterior_coef = 3.0 * inputs.c_hat / (8.0 * inputs.smoothness * e);
    let threshold = inputs.c_hat * e;
    round_average(update_norms, value_gaps, |u, gap| {
        if u <= threshold {
            if u > 0.0 {
                interior_coef * (threshold / u) * gap
            } else {
                0.0
            }
        } else {
            exterior_coef * u
        }
    })
}

fn round_average<F>(update_norms: &[Vec<f64>], value_gaps: &[Vec<f64>], term: F) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    assert_eq!(
        update_norms.len(),
        value_gaps.len(),
        "need matching round counts"
    );
    let mut total = 0.0;
    for (norms, gaps) in update_norms.iter().zip(value_gaps) {
        assert_eq!(norms.len(), gaps.len(), "need matching client counts");
        let mut acc = 0.0;
        for (&u, &gap) in norms.iter().zip(gaps) {
            acc += term(u, gap);
        }
        total += acc / norms.len() as f64;
    }
    total / update_norms.len() as f64
}

/// Sensitivity level suggested for Lipschitz clients:
/// `c_hat = G (1 - 11 (E-1) rho lambda^2 / (64 L^2))`.
///
/// Hypotheses: gradient bound `G`, strong-convexity-like constant
/// `lambda <= L`, and `E <= 1/(2 rho)`.
pub fn suggested_step_sensitivity(g: f64, local_steps: usize, rho: f64, lambda: f64, l: f64) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::BoundPrecondition(format!(
            "gradient bound must be positive, got {g}"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::BoundPrecondition(format!(
            "rho must lie in (0, 1), got {rho}"
        )));
    }
    if !(lambda > 0.0 && l > 0.0 && lambda <= l) {
        return Err(Error::BoundPrecondition(format!(
            "need 0 < lambda <= L, got lambda = {lambda}, L = {l}"
        )));
    }
    if local_steps == 0 {
        return Err(Error::BoundPrecondition("local_steps must be >= 1".into()));
    }
    let e = local_steps as f64;
    if e > 1.0 / (2.0 * rho) {
        return Err(Error::BoundPrecondition(format!(
            "E = {e} out of range, needs E <= 1/(2 rho) = {}",
            1.0 / (2.0 * rho)
        )));
    }
    Ok(g * (1.0 - 11.0 * (e - 1.0) * rho * lambda * lambda / (64.0 * l * l)))
}

/// Check `(1 - (1-x)^m)/x <= m (1 - 11 (m-1) x / 24)` at one grid point.
///
/// Hypotheses: `x` in `(0, 1)` and `m x <= 1/4`. Returns whether the
/// inequality holds with relative slack `1e-12` (covering the cancellation
/// in the left side at small `x`).
pub fn geometric_sum_check(x: f64, m: usize) -> Result<bool> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::BoundPrecondition(format!(
            "x must lie in (0, 1), got {x}"
        )));
    }
    if m == 0 {
        return Err(Error::BoundPrecondition("m must be >= 1".into()));
    }
    let mf = m as f64;
    if mf * x > 0.25 {
        return Err(Error::BoundPrecondition(format!(
            "m x = {} exceeds 1/4",
            mf * x
        )));
    }
    let lhs = (1.0 - (1.0 - x).powi(m as i32)) / x;
    let rhs = mf * (1.0 - 11.0 * (mf - 1.0) * x / 24.0);
    Ok(lhs <= rhs + 1e-12 * rhs.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Clean-number inputs: L = 1, D = 2, gamma = 2, rho = 0.1, E = 5,
    /// alpha = 1, gaps {1, 1/4}, c_hat at its floor 4.
    fn hand_inputs() -> BoundInputs {
        BoundInputs {
            smoothness: 1.0,
            rho: 0.1,
            c_hat: 4.0,
            local_steps: 5,
            alpha: 1.0,
            gamma: 2.0,
            init_distance: 2.0,
            heterogeneity: vec![1.0, 0.25],
        }
    }

    #[test]
    fn clip_bound_matches_hand_computation() {
        // geometry = 4 (1*4/2 + 2/1) 0.1 = 1.6
        // heterogeneity = (3*5/2) * 0.625 * 0.1 = 0.46875
        let b = clip_bound(&hand_inputs()).unwrap();
        assert!((b.geometry - 1.6).abs() < 1e-14);
        assert!((b.heterogeneity - 0.46875).abs() < 1e-14);
        assert!((b.rhs - 2.06875).abs() < 1e-14);
    }

    #[test]
    fn reporting_bound_matches_hand_computation() {
        // (2*4*2 + 1.2*5*0.625) * 0.1 = (16 + 3.75) * 0.1 = 1.975
        let v = simplified_clip_bound(&hand_inputs());
        assert!((v - 1.975).abs() < 1e-14, "got {v}");
    }

    #[test]
    fn norm_bound_matches_hand_computation() {
        // One round, norms {3, 25}, threshold c_hat*E = 20: only client 0
        // is interior. inner = 4^2/2 + (20/3)*1*0.1*5 = 8 + 10/3 = 34/3;
        // round mean = 17/3; heterogeneity = 0.1*5*17/3 = 17/6.
        let b = norm_bound(&hand_inputs(), &[vec![3.0, 25.0]]).unwrap();
        assert!((b.geometry - 1.6).abs() < 1e-14);
        assert!((b.heterogeneity - 17.0 / 6.0).abs() < 1e-13);
        assert!((b.rhs - (1.6 + 17.0 / 6.0)).abs() < 1e-13);
    }

    #[test]
    fn empirical_sides_match_hand_computation() {
        let inputs = hand_inputs();
        let norms = vec![vec![3.0, 25.0]];
        let gaps = vec![vec![0.5, -0.25]];
        // clip: interior coef = 2 - 0.5 - 0.25 = 1.25, exterior = 3*4/(8*5) = 0.3
        // lhs = (1.25*0.5 + 0.3*25)/2 = 4.0625
        let clip = empirical_clip_lhs(&inputs, &norms, &gaps);
        assert!((clip - 4.0625).abs() < 1e-13, "clip lhs {clip}");
        // norm: interior coef = 2 - 0.25 = 1.75
        // lhs = (1.75*(20/3)*0.5 + 0.3*25)/2 = (35/6 + 7.5)/2 = 20/3
        let norm = empirical_norm_lhs(&inputs, &norms, &gaps);
        assert!((norm - 20.0 / 3.0).abs() < 1e-13, "norm lhs {norm}");
    }

    #[test]
    fn zero_norm_clients_are_skipped_in_the_norm_side() {
        let inputs = hand_inputs();
        let lhs = empirical_norm_lhs(&inputs, &[vec![0.0, 25.0]], &[vec![-0.5, 0.0]]);
        // Only the exterior client contributes: 0.3*25/2.
        assert!((lhs - 3.75).abs() < 1e-13);
        let b = norm_bound(&inputs, &[vec![0.0, 25.0]]).unwrap();
        assert!((b.heterogeneity - 0.0).abs() < 1e-15);
    }

    #[test]
    fn preconditions_are_enforced() {
        let mut inputs = hand_inputs();
        inputs.c_hat = 3.9; // floor is 4 sqrt(1 * 1) = 4
        assert!(matches!(
            clip_bound(&inputs),
            Err(Error::BoundPrecondition(m)) if m.contains("floor")
        ));
        let mut inputs = hand_inputs();
        inputs.local_steps = 6; // alpha/(2 rho) = 5
        assert!(matches!(
            clip_bound(&inputs),
            Err(Error::BoundPrecondition(m)) if m.contains("alpha/(2 rho)")
        ));
        let mut inputs = hand_inputs();
        inputs.alpha = 0.5;
        assert!(clip_bound(&inputs).is_err());
        let mut inputs = hand_inputs();
        inputs.rho = 1.0;
        assert!(norm_bound(&inputs, &[vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn suggested_sensitivity_matches_hand_value_and_gates_e() {
        // G = 1, E = 2, rho = 0.1, lambda = L = 1:
        // 1 - 11*1*0.1/64 = 0.9828125
        let v = suggested_step_sensitivity(1.0, 2, 0.1, 1.0, 1.0).unwrap();
        assert!((v - 0.9828125).abs() < 1e-15);
        assert!(matches!(
            suggested_step_sensitivity(1.0, 6, 0.1, 1.0, 1.0),
            Err(Error::BoundPrecondition(m)) if m.contains("out of range")
        ));
        assert!(suggested_step_sensitivity(1.0, 2, 0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn geometric_sum_check_matches_hand_values_and_gates_range() {
        // x = 0.1, m = 2: lhs = (1 - 0.81)/0.1 = 1.9,
        // rhs = 2 (1 - 11*0.1/24) = 229/120 = 1.90833...
        assert!(geometric_sum_check(0.1, 2).unwrap());
        assert!(matches!(
            geometric_sum_check(0.3, 1),
            Err(Error::BoundPrecondition(m)) if m.contains("1/4")
        ));
        assert!(geometric_sum_check(-0.1, 1).is_err());
        assert!(geometric_sum_check(0.2, 1).unwrap()); // m = 1 is an equality
    }
}
