//! Standalone verification behind the `verify` verb: descent and drift
//! inequalities along sampled local trajectories, the exhaustive
//! geometric-sum inequality grid, the sensitivity-operator contracts, and the
//! suggested-scale properties.

use std::path::Path;

use dpfed::analysis::{geometric_sum_check, lemma_suite, sample_trajectories, suggested_step_sensitivity};
use dpfed::fedopt::{clip, normalize};
use dpfed::objectives::generate_quadratic_suite;
use dpfed::stream::StreamKey;
use dpfed::vector;

use crate::config::parse_config;
use crate::error::Result;
use crate::runner::build_suite;

const TRAJECTORIES: usize = 100;
const OPERATOR_VECTORS_PER_DIM: usize = 34_000;
const OPERATOR_DIMS: [usize; 3] = [1, 2, 200];
const REL_TOL: f64 = 1e-12;

/// Aggregated results of one `verify` invocation.
pub struct VerifyOutcome {
    pub lines: Vec<String>,
    pub total_checks: usize,
    pub violations: usize,
}

impl VerifyOutcome {
    fn record(&mut self, name: &str, checks: usize, violations: usize) {
        self.lines
            .push(format!("{name}: {checks} checks, {violations} violations"));
        self.total_checks += checks;
        self.violations += violations;
    }

    pub fn is_clean(&self) -> bool {
        self.violations == 0
    }
}

/// Run every verification suite, optionally on a config-described
/// problem instead of the default synthetic one.
pub fn run_verify(config: Option<&Path>) -> Result<VerifyOutcome> {
    let mut outcome = VerifyOutcome {
        lines: Vec::new(),
        total_checks: 0,
        violations: 0,
    };

    let (mut suite, local_steps, tolerance) = match config {
        Some(path) => {
            let parsed = parse_config(path)?;
            let (suite, _) = build_suite(&parsed)?;
            (suite, parsed.local_steps, parsed.solve_tolerance_or_default())
        }
        // The default mirrors the shipped synthetic experiment
        // geometry: 100 clients, 200 dimensions, rank-20 factors.
        None => (
            generate_quadratic_suite(&StreamKey::new(0), 100, 200, 20, 0.05)?,
            20,
            1e-10,
        ),
    };
    suite.solve_and_profile(tolerance)?;
    let w_star = suite.global_optimum.clone().expect("just profiled");

    // Descent and drift inequalities along sampled trajectories; the
    // step size obeys the strictest precondition, eta <= 1/(2 L E).
    let eta = 1.0 / (2.0 * suite.smoothness_bound * local_steps as f64);
    let samples = sample_trajectories(
        &suite,
        &w_star,
        TRAJECTORIES,
        eta,
        local_steps,
        &StreamKey::new(0).child("verify", 0),
    )?;
    let report = lemma_suite(&suite, &w_star, &samples, eta)?;
    for check in &report.checks {
        outcome.record(check.name, check.checks, check.violations.len());
    }

    geometric_sum_grid(&mut outcome);
    operator_contracts(&mut outcome);
    suggested_scale_properties(&mut outcome)?;

    Ok(outcome)
}

/// Exhaustive geometric-sum inequality grid: m <= 250, x on a 1e-3 grid, m x <= 1/4.
fn geometric_sum_grid(outcome: &mut VerifyOutcome) {
    let mut checks = 0usize;
    let mut violations = 0usize;
    for m in 1..=250usize {
        for j in 1..=(250 / m) {
            let x = j as f64 / 1000.0;
            match geometric_sum_check(x, m) {
                Ok(ok) => {
                    checks += 1;
                    if !ok {
                        violations += 1;
                    }
                }
                // The float product m * x can land a hair above 1/4 at
                // the integer boundary m * j = 250; that point falls
                // outside the hypothesis rather than inside a failure.
                Err(_) => {}
            }
        }
    }
    outcome.record("geometric_sum_grid", checks, violations);
}

/// Clip/normalize contracts on random vectors across dimensions:
/// idempotence, ball membership, nonexpansiveness, exact sphere norm,
/// and bitwise agreement above the scale.
fn operator_contracts(outcome: &mut VerifyOutcome) {
    let mut checks = 0usize;
    let mut violations = 0usize;
    for (slot, &dim) in OPERATOR_DIMS.iter().enumerate() {
        let mut stream = StreamKey::new(0).child("operator", slot as u64).stream();
        let mut z = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for i in 0..OPERATOR_VECTORS_PER_DIM {
            // Cycle the input magnitude so both sides of the scale are
            // exercised in every dimension.
            let std = [0.1, 1.0, 10.0][i % 3];
            stream.fill_gaussian(&mut z, std);
            stream.fill_gaussian(&mut y, std);
            let c = 0.5 + stream.uniform();

            let clipped = clip(&z, c);
            checks += 1;
            if vector::distance(&clip(&clipped, c), &clipped) > REL_TOL * c.max(1.0) {
                violations += 1;
            }
            checks += 1;
            if vector::norm(&clipped) > c * (1.0 + REL_TOL) {
                violations += 1;
            }
            checks += 1;
            let contraction = vector::distance(&clipped, &clip(&y, c));
            let separation = vector::distance(&z, &y);
            if contraction > separation + REL_TOL * separation.max(1.0) {
                violations += 1;
            }
            let norm_z = vector::norm(&z);
            if norm_z > 0.0 {
                checks += 1;
                let scaled = normalize(&z, c);
                if (vector::norm(&scaled) - c).abs() > REL_TOL * c {
                    violations += 1;
                }
                if norm_z >= c {
                    checks += 1;
                    if clipped != scaled {
                        violations += 1;
                    }
                }
            }
        }
    }
    outcome.record("sensitivity_operators", checks, violations);
}

/// The suggested per-step scale shrinks as local work grows and is
/// linear in the gradient bound.
fn suggested_scale_properties(outcome: &mut VerifyOutcome) -> Result<()> {
    let mut checks = 0usize;
    let mut violations = 0usize;
    let rho = 0.05;
    let mut previous = f64::INFINITY;
    // E up to the admissible ceiling 1/(2 rho) = 10.
    for e in 1..=10usize {
        let value = suggested_step_sensitivity(1.0, e, rho, 1.0, 1.0)?;
        checks += 1;
        if value >= previous {
            violations += 1;
        }
        previous = value;
        checks += 1;
        let doubled = suggested_step_sensitivity(2.0, e, rho, 1.0, 1.0)?;
        if (doubled - 2.0 * value).abs() > REL_TOL * doubled.abs() {
            violations += 1;
        }
    }
    outcome.record("suggested_scale_properties", checks, violations);
    Ok(())
}
