//! Plan execution: suite construction, run dispatch, and artifact
//! emission.
//!
//! A finished plan leaves one metric CSV per (variant, seed) pair, the
//! optional trajectory projections and bound traces, and a
//! `summary.json` that references every emitted file exactly once. A
//! failed plan removes whatever it had already written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dpfed::analysis::{
    empirical_clip_lhs, empirical_norm_lhs, clip_bound, simplified_clip_bound, norm_bound,
    trajectory_projection_2d, BoundInputs, RoundRecord, METRIC_HEADER,
};
use dpfed::fedopt::{run_federated, RunConfig, RunOutput, ScheduleSpec, SensitivityPolicy};
use dpfed::objectives::{
    build_logistic_suite, generate_classification_data, generate_quadratic_suite,
    load_feature_matrix, partition_by_label_shards, ClientObjective, FeatureSet, ProblemSuite,
    ShardAssignment,
};
use dpfed::privacy::{key_quantity_rho, PrivacyBudget};
use dpfed::stream::StreamKey;
use dpfed::vector;

use crate::config::{Algorithm, ExperimentConfig, SuiteKind};
use crate::error::{CliError, Result};
use crate::plan::{build_init, ExperimentPlan, RunSpec, TheoremDerivation};

/// Registers every artifact so a failed plan leaves no partial outputs.
struct OutputTracker {
    created: Vec<PathBuf>,
}

impl OutputTracker {
    fn new() -> Self {
        OutputTracker { created: Vec::new() }
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        fs::write(path, contents)?;
        self.created.push(path.to_path_buf());
        Ok(())
    }

    fn discard_all(&mut self) {
        for path in self.created.drain(..) {
            if let Err(e) = fs::remove_file(&path) {
                log::warn!("could not remove partial output {}: {e}", path.display());
            }
        }
    }
}

/// Suite-level facts shared by every run of the plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub kind: String,
    pub n: usize,
    pub dimension: usize,
    pub suite_seed: u64,
    pub smoothness_bound: f64,
    pub mean_heterogeneity: f64,
    pub max_heterogeneity: f64,
    pub solve_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centralized_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shards_json: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivacySummary {
    pub epsilon: f64,
    pub delta: f64,
    pub q: f64,
    pub rho: f64,
}

/// One finished run and its artifacts (paths relative to the plan's
/// output directory).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub csv: String,
    pub rounds: usize,
    pub eta0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub sigma_squared: f64,
    pub final_suboptimality: f64,
    pub privatized_round: usize,
    pub privatized_suboptimality: f64,
    /// Mean over rounds with finite SNR; absent for noiseless runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_snr: Option<f64>,
    pub zero_update_events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_trace: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_report: Option<String>,
}

/// Seed-averaged endpoints of one variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariantSummary {
    pub seeds: usize,
    pub mean_final_suboptimality: f64,
    pub mean_privatized_suboptimality: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundAggregate {
    pub mean_empirical_lhs: f64,
    pub mean_rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremSeed {
    pub seed: u64,
    pub init_distance: f64,
    pub gamma: f64,
    pub rounds: usize,
}

/// Derived constants and seed-averaged bound comparisons of a
/// theorem-mode plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremSummary {
    pub rho: f64,
    pub alpha: f64,
    pub c_hat: f64,
    pub scale: f64,
    pub eta: f64,
    pub per_seed: Vec<TheoremSeed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<BoundAggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<BoundAggregate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub algorithm: String,
    pub seeds: Vec<u64>,
    pub suite: SuiteSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremSummary>,
    pub runs: Vec<RunSummary>,
    pub variants: BTreeMap<String, VariantSummary>,
}

/// Everything needed to re-evaluate the bounds away from the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceFile {
    pub variant: String,
    pub seed: u64,
    /// Transmitted sensitivity scale `C`.
    pub scale: f64,
    pub local_steps: usize,
    pub eta0: f64,
    pub init_distance: f64,
    /// Participating client ids per round.
    pub cohorts: Vec<Vec<usize>>,
    /// Raw `||u||` per round per cohort member.
    pub update_norms: Vec<Vec<f64>>,
    /// Per-member objective value at the round start.
    pub client_values: Vec<Vec<f64>>,
}

/// Term-by-term bound evaluation for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub variant: String,
    pub seed: u64,
    pub rho: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub c_hat: f64,
    pub local_steps: usize,
    pub init_distance: f64,
    pub geometry_term: f64,
    pub heterogeneity_term: f64,
    pub rhs: f64,
    pub empirical_lhs: f64,
    /// `rhs - empirical_lhs`; non-negative when the bound holds.
    pub margin: f64,
    pub holds: bool,
    /// Simplified reporting-only form `(2 c_hat D + (6/5) E mean gap) rho`.
    pub simplified_reporting_bound: f64,
}

#[derive(Debug)]
pub struct PlanOutcome {
    pub out_dir: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Summary,
}

fn algorithm_label(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::FedAvg => "fedavg",
        Algorithm::DpFedAvgClip => "dp-fedavg-clip",
        Algorithm::DpNormFedAvg => "dp-normfedavg",
        Algorithm::Paired => "paired",
    }
}

/// Construct the problem suite a config describes, without solving it.
pub fn build_suite(config: &ExperimentConfig) -> Result<(ProblemSuite, Option<ShardAssignment>)> {
    let key = StreamKey::new(config.suite_seed);
    match config.suite {
        SuiteKind::Quadratic => {
            let d = config.d.expect("validated: d present for quadratic suites");
            let suite =
                generate_quadratic_suite(&key, config.n, d, config.factor_rank, config.factor_std)?;
            Ok((suite, None))
        }
        SuiteKind::Logistic => {
            let set = match &config.feature_path {
                Some(path) => {
                    load_feature_matrix(Path::new(path), config.feature_format.to_format())?
                }
                None => {
                    let (features, labels) = generate_classification_data(
                        &key,
                        config.classes,
                        config.samples_per_class,
                        config.features,
                        config.class_separation,
                    );
                    FeatureSet {
                        features,
                        labels,
                        num_features: config.features,
                        num_classes: config.classes,
                    }
                }
            };
            let assignment = partition_by_label_shards(
                &set.labels,
                config.n,
                config.shards_per_client,
                &key.child("shards", 0),
            )?;
            let suite = build_logistic_suite(&set, &assignment, config.l2)?;
            Ok((suite, Some(assignment)))
        }
    }
}

fn build_budget(config: &ExperimentConfig, dimension: usize) -> Result<Option<PrivacyBudget>> {
    if !config.algorithm.is_private() {
        return Ok(None);
    }
    let budget = PrivacyBudget::new(
        config.epsilon.expect("validated: epsilon present"),
        config.delta.expect("validated: delta present"),
        config.q,
        config.n,
        dimension,
    )?;
    Ok(Some(budget))
}

/// Derive the theorem constants for one seed's geometry.
fn derive_theorem(
    config: &ExperimentConfig,
    suite: &ProblemSuite,
    budget: &PrivacyBudget,
    init_distance: f64,
) -> Result<TheoremDerivation> {
    let rho = key_quantity_rho(budget)?;
    let l = suite.smoothness_bound;
    let max_gap = suite
        .max_heterogeneity()
        .expect("suite profiled before theorem derivation");
    let c_hat = config.c_hat_factor * (l * max_gap).sqrt();
    if !(c_hat > 0.0) {
        return Err(CliError::Config(
            "theorem_mode: the derived sensitivity is zero; a homogeneous suite \
             leaves nothing for the heterogeneity floor"
                .into(),
        ));
    }
    let e = config.local_steps as f64;
    let e_cap = config.alpha / (2.0 * rho);
    if e > e_cap {
        return Err(CliError::Config(format!(
            "E: theorem mode requires E <= alpha/(2 rho) = {e_cap:.3}, got {e}"
        )));
    }
    let gamma = config.gamma.unwrap_or(l * init_distance);
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CliError::Config(format!(
            "gamma: derived L * ||w0 - w*|| = {gamma} is not positive; \
             start away from the optimum or set gamma explicitly"
        )));
    }
    let eta = rho / (2.0 * config.alpha * l);
    let rounds = (2.0 * config.alpha * gamma / (c_hat * e * rho * rho))
        .round()
        .max(1.0) as usize;
    Ok(TheoremDerivation {
        rho,
        alpha: config.alpha,
        gamma,
        c_hat,
        scale: c_hat * e,
        eta,
        rounds,
    })
}

fn make_schedule(
    config: &ExperimentConfig,
    spec: &RunSpec,
    theorem: Option<&TheoremDerivation>,
) -> ScheduleSpec {
    match theorem {
        Some(t) => ScheduleSpec::constant(t.eta),
        None => ScheduleSpec {
            eta0: spec.eta0,
            decay: config.decay,
            beta_equals_eta: config.beta_equals_eta,
            constant_override: None,
            server_momentum: config.momentum,
        },
    }
}

fn mean_finite_snr(records: &[RoundRecord]) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for record in records {
        if record.snr.is_finite() {
            total += record.snr;
            count += 1;
        }
    }
    (count > 0).then(|| total / count as f64)
}

/// Mean training accuracy over clients when every client is a
/// classifier. Shard partitioning deals equal sample counts, so the
/// unweighted client mean equals the global sample accuracy.
fn mean_accuracy(suite: &ProblemSuite, w: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for client in &suite.clients {
        match client {
            ClientObjective::Logistic(c) => total += c.accuracy(w),
            _ => return None,
        }
    }
    (!suite.clients.is_empty()).then(|| total / suite.clients.len() as f64)
}

fn write_metrics_csv(tracker: &mut OutputTracker, path: &Path, output: &RunOutput) -> Result<()> {
    let mut text = String::with_capacity(64 * (output.records.len() + 1));
    text.push_str(METRIC_HEADER);
    text.push('\n');
    for record in &output.records {
        text.push_str(&record.to_csv_row());
        text.push('\n');
    }
    tracker.write(path, &text)
}

fn write_projection_csv(
    tracker: &mut OutputTracker,
    path: &Path,
    points: &[[f64; 2]],
) -> Result<()> {
    let mut text = String::from("round,axis1,axis2\n");
    for (round, p) in points.iter().enumerate() {
        text.push_str(&format!("{round},{},{}\n", p[0], p[1]));
    }
    tracker.write(path, &text)
}

/// Per-client objective minima `f_i(w*) - gap_i`.
fn client_min_values(suite: &ProblemSuite) -> Result<Vec<f64>> {
    let w_star = suite
        .global_optimum
        .as_ref()
        .ok_or_else(|| CliError::Config("suite: bound evaluation needs a solved optimum".into()))?;
    let gaps = suite.heterogeneity.as_ref().ok_or_else(|| {
        CliError::Config("suite: bound evaluation needs a heterogeneity profile".into())
    })?;
    suite
        .clients
        .iter()
        .zip(gaps)
        .map(|(client, &gap)| Ok(client.value(w_star)? - gap))
        .collect()
}

/// Evaluate the bound matching a recorded trace's variant.
pub fn evaluate_trace(
    config: &ExperimentConfig,
    suite: &ProblemSuite,
    trace: &TraceFile,
) -> Result<BoundReport> {
    let budget = build_budget(config, suite.dimension)?.ok_or_else(|| {
        CliError::Config("algorithm: bound evaluation needs a private algorithm".into())
    })?;
    let rho = key_quantity_rho(&budget)?;
    let heterogeneity = suite
        .heterogeneity
        .clone()
        .ok_or_else(|| CliError::Config("suite: bound evaluation needs a profile".into()))?;
    if trace.local_steps == 0 {
        return Err(CliError::Config("trace: local_steps must be at least 1".into()));
    }
    let l = suite.smoothness_bound;
    let gamma = config.gamma.unwrap_or(l * trace.init_distance);
    let inputs = BoundInputs {
        smoothness: l,
        rho,
        c_hat: trace.scale / trace.local_steps as f64,
        local_steps: trace.local_steps,
        alpha: config.alpha,
        gamma,
        init_distance: trace.init_distance,
        heterogeneity,
    };
    let floors = client_min_values(suite)?;
    let gaps: Vec<Vec<f64>> = trace
        .cohorts
        .iter()
        .zip(&trace.client_values)
        .map(|(cohort, values)| {
            cohort
                .iter()
                .zip(values)
                .map(|(&i, &v)| v - floors[i])
                .collect()
        })
        .collect();

    let (geometry, heterogeneity_term, rhs, lhs) = if trace.variant.starts_with("clip") {
        let bound = clip_bound(&inputs)?;
        let lhs = empirical_clip_lhs(&inputs, &trace.update_norms, &gaps);
        (bound.geometry, bound.heterogeneity, bound.rhs, lhs)
    } else if trace.variant.starts_with("norm") {
        let bound = norm_bound(&inputs, &trace.update_norms)?;
        let lhs = empirical_norm_lhs(&inputs, &trace.update_norms, &gaps);
        (bound.geometry, bound.heterogeneity, bound.rhs, lhs)
    } else {
        return Err(CliError::Config(format!(
            "trace: variant {} has no bound to evaluate (non-private baseline?)",
            trace.variant
        )));
    };

    Ok(BoundReport {
        variant: trace.variant.clone(),
        seed: trace.seed,
        rho,
        alpha: inputs.alpha,
        gamma: inputs.gamma,
        c_hat: inputs.c_hat,
        local_steps: inputs.local_steps,
        init_distance: inputs.init_distance,
        geometry_term: geometry,
        heterogeneity_term,
        rhs,
        empirical_lhs: lhs,
        margin: rhs - lhs,
        holds: lhs <= rhs,
        simplified_reporting_bound: simplified_clip_bound(&inputs),
    })
}

/// Parse a config and trace from disk and evaluate the matching bound.
pub fn bounds_command(config_path: &Path, trace_path: &Path) -> Result<BoundReport> {
    let config = crate::config::parse_config(config_path)?;
    let (mut suite, _) = build_suite(&config)?;
    suite.solve_and_profile(config.solve_tolerance_or_default())?;
    let text = fs::read_to_string(trace_path)?;
    let trace: TraceFile = serde_json::from_str(&text)?;
    evaluate_trace(&config, &suite, &trace)
}

/// Execute every (seed, variant) run of a plan and write its artifacts.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    fs::create_dir_all(&plan.out_dir)?;
    let mut tracker = OutputTracker::new();
    match run_plan_inner(plan, &mut tracker) {
        Ok(outcome) => Ok(outcome),
        Err(e) => {
            tracker.discard_all();
            Err(e)
        }
    }
}

fn run_plan_inner(plan: &ExperimentPlan, tracker: &mut OutputTracker) -> Result<PlanOutcome> {
    let config = &plan.config;
    let (mut suite, assignment) = build_suite(config)?;
    let tolerance = config.solve_tolerance_or_default();
    suite.solve_and_profile(tolerance)?;
    let w_star = suite.global_optimum.clone().expect("just profiled");
    let f_star = suite.global_value(&w_star)?;
    let budget = build_budget(config, suite.dimension)?;
    let rho = budget.as_ref().map(key_quantity_rho).transpose()?;

    let shards_json = match &assignment {
        Some(a) => {
            let name = "shards.json".to_string();
            tracker.write(&plan.out_dir.join(&name), &a.to_json())?;
            Some(name)
        }
        None => None,
    };

    let mut runs: Vec<RunSummary> = Vec::new();
    let mut theorem_shared: Option<TheoremDerivation> = None;
    let mut theorem_seeds: Vec<TheoremSeed> = Vec::new();
    let mut clip_bounds: Vec<(f64, f64)> = Vec::new();
    let mut norm_bounds: Vec<(f64, f64)> = Vec::new();

    for &seed in &plan.seeds {
        let init = build_init(config.init, &w_star, seed);
        let init_distance = vector::distance(&init, &w_star);
        let theorem = if config.theorem_mode {
            let t = derive_theorem(
                config,
                &suite,
                budget.as_ref().expect("theorem mode is private"),
                init_distance,
            )?;
            theorem_seeds.push(TheoremSeed {
                seed,
                init_distance,
                gamma: t.gamma,
                rounds: t.rounds,
            });
            theorem_shared = Some(t.clone());
            Some(t)
        } else {
            None
        };
        let specs = plan.variants(theorem.as_ref())?;

        let mut seed_runs: Vec<RunSummary> = Vec::new();
        let mut iterates_by_variant: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();

        for spec in &specs {
            let private = spec.policy != SensitivityPolicy::None;
            let run_config = RunConfig {
                rounds: spec.rounds,
                local_steps: config.local_steps,
                expected_cohort: config.cohort_or_full(),
                schedule: make_schedule(config, spec, theorem.as_ref()),
                policy: spec.policy.clone(),
                budget: if private { budget.clone() } else { None },
                init: init.clone(),
                master_seed: seed,
                average_by_actual: config.average_by_actual,
                record_iterates: config.record_trajectory,
                record_bound_trace: config.record_bound_trace || config.theorem_mode,
            };
            log::info!("running {} seed {seed} ({} rounds)", spec.variant, spec.rounds);
            let output = run_federated(&suite, &run_config)?;

            let csv = format!("{}_{seed}.csv", spec.variant);
            write_metrics_csv(tracker, &plan.out_dir.join(&csv), &output)?;

            let mut entry = RunSummary {
                variant: spec.variant.clone(),
                seed,
                csv,
                rounds: spec.rounds,
                eta0: spec.eta0,
                scale: spec.policy.scale(),
                sigma_squared: output.noise.sigma_squared,
                final_suboptimality: output
                    .records
                    .last()
                    .expect("at least one round")
                    .suboptimality,
                privatized_round: output.privatized_index,
                privatized_suboptimality: suite.global_value(&output.privatized_iterate)? - f_star,
                mean_snr: mean_finite_snr(&output.records),
                zero_update_events: output.zero_update_events,
                final_accuracy: mean_accuracy(&suite, &output.final_iterate),
                trajectory_csv: None,
                bound_trace: None,
                bound_report: None,
            };

            if let (true, Some(trace), Some(scale)) = (
                private,
                output.bound_trace.as_ref(),
                spec.policy.scale(),
            ) {
                let trace_file = TraceFile {
                    variant: spec.variant.clone(),
                    seed,
                    scale,
                    local_steps: config.local_steps,
                    eta0: spec.eta0,
                    init_distance,
                    cohorts: trace.cohorts.clone(),
                    update_norms: trace.update_norms.clone(),
                    client_values: trace.client_values.clone(),
                };
                let trace_name = format!("trace_{}_{seed}.json", spec.variant);
                tracker.write(
                    &plan.out_dir.join(&trace_name),
                    &serde_json::to_string(&trace_file)?,
                )?;
                entry.bound_trace = Some(trace_name);

                if config.theorem_mode {
                    let report = evaluate_trace(config, &suite, &trace_file)?;
                    let report_name = format!("bounds_{}_{seed}.json", spec.variant);
                    tracker.write(
                        &plan.out_dir.join(&report_name),
                        &serde_json::to_string_pretty(&report)?,
                    )?;
                    entry.bound_report = Some(report_name);
                    if spec.variant.starts_with("clip") {
                        clip_bounds.push((report.empirical_lhs, report.rhs));
                    } else {
                        norm_bounds.push((report.empirical_lhs, report.rhs));
                    }
                }
            }

            if let Some(iterates) = output.iterates {
                iterates_by_variant.insert(spec.variant.clone(), iterates);
            }
            seed_runs.push(entry);
        }

        if config.record_trajectory {
            for spec in &specs {
                let Some(rest) = spec.variant.strip_prefix("clip") else {
                    continue;
                };
                let partner = format!("norm{rest}");
                let (Some(clip_iters), Some(norm_iters)) = (
                    iterates_by_variant.get(&spec.variant),
                    iterates_by_variant.get(&partner),
                ) else {
                    continue;
                };
                let projection = trajectory_projection_2d(
                    clip_iters,
                    norm_iters,
                    &w_star,
                    config.trajectory_window,
                )?;
                log::info!(
                    "projection {}|{partner} seed {seed}: effective rank {}, axis variances {:?}",
                    spec.variant,
                    projection.effective_rank,
                    projection.axis_variances
                );
                for (variant, points) in
                    [(&spec.variant, &projection.runs[0]), (&partner, &projection.runs[1])]
                {
                    let name = format!("trajectory_{variant}_{seed}.csv");
                    write_projection_csv(tracker, &plan.out_dir.join(&name), points)?;
                    let entry = seed_runs
                        .iter_mut()
                        .find(|r| &r.variant == variant)
                        .expect("projection pairs come from this seed's runs");
                    entry.trajectory_csv = Some(name);
                }
            }
        }
        runs.extend(seed_runs);
    }

    let mut variants: BTreeMap<String, VariantSummary> = BTreeMap::new();
    for run in &runs {
        let entry = variants.entry(run.variant.clone()).or_insert(VariantSummary {
            seeds: 0,
            mean_final_suboptimality: 0.0,
            mean_privatized_suboptimality: 0.0,
        });
        entry.seeds += 1;
        entry.mean_final_suboptimality += run.final_suboptimality;
        entry.mean_privatized_suboptimality += run.privatized_suboptimality;
    }
    for entry in variants.values_mut() {
        entry.mean_final_suboptimality /= entry.seeds as f64;
        entry.mean_privatized_suboptimality /= entry.seeds as f64;
    }

    let aggregate = |pairs: &[(f64, f64)]| -> Option<BoundAggregate> {
        (!pairs.is_empty()).then(|| {
            let mean_lhs = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
            let mean_rhs = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
            BoundAggregate {
                mean_empirical_lhs: mean_lhs,
                mean_rhs,
                holds: mean_lhs <= mean_rhs,
            }
        })
    };
    let theorem = theorem_shared.map(|t| TheoremSummary {
        rho: t.rho,
        alpha: t.alpha,
        c_hat: t.c_hat,
        scale: t.scale,
        eta: t.eta,
        per_seed: theorem_seeds,
        clip: aggregate(&clip_bounds),
        norm: aggregate(&norm_bounds),
    });

    let summary = Summary {
        algorithm: algorithm_label(config.algorithm).to_string(),
        seeds: plan.seeds.clone(),
        suite: SuiteSummary {
            kind: match config.suite {
                SuiteKind::Quadratic => "quadratic".into(),
                SuiteKind::Logistic => "logistic".into(),
            },
            n: config.n,
            dimension: suite.dimension,
            suite_seed: config.suite_seed,
            smoothness_bound: suite.smoothness_bound,
            mean_heterogeneity: suite.mean_heterogeneity().expect("profiled"),
            max_heterogeneity: suite.max_heterogeneity().expect("profiled"),
            solve_tolerance: tolerance,
            centralized_accuracy: mean_accuracy(&suite, &w_star),
            shards_json,
        },
        privacy: match (&budget, rho) {
            (Some(b), Some(rho)) => Some(PrivacySummary {
                epsilon: b.epsilon,
                delta: b.delta,
                q: b.q_constant,
                rho,
            }),
            _ => None,
        },
        theorem,
        runs,
        variants,
    };

    let summary_path = plan.out_dir.join("summary.json");
    tracker.write(&summary_path, &serde_json::to_string_pretty(&summary)?)?;
    Ok(PlanOutcome {
        out_dir: plan.out_dir.clone(),
        summary_path,
        summary,
    })
}
