//! End-to-end acceptance checks: operator contracts, noise calibration,
//! the inequality grids and descent suite, engine reductions, the paired
//! experiment reproductions, bound validity, the sharded classification
//! run, and byte-level determinism.
//!
//! Each check prints one `criterion NN (label): PASS|FAIL [detail]` line;
//! run with `--nocapture` to see the lines of passing checks too.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use tempfile::TempDir;

use dpfed::analysis::{geometric_sum_check, lemma_suite, sample_trajectories};
use dpfed::fedopt::{clip, normalize, run_federated, RunConfig, ScheduleSpec, SensitivityPolicy};
use dpfed::objectives::{
    generate_classification_data, generate_quadratic_suite, ClientObjective, ProblemSuite,
    QuadraticClient,
};
use dpfed::privacy::{calibrate_noise_variance, gaussian_vector, PrivacyBudget};
use dpfed::stream::StreamKey;
use dpfed::vector;

use dpfed_cli::config::parse_config;
use dpfed_cli::plan::ExperimentPlan;
use dpfed_cli::runner::{build_suite, run_plan, PlanOutcome};

/// Print the criterion line, then fail the test if the check missed.
fn report(number: u32, label: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {number:02} ({label}): {status} [{detail}]");
    assert!(pass, "criterion {number:02} ({label}): {detail}");
}

fn within_runtime(number: u32, limit_secs: f64, started: Instant) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < limit_secs,
        "criterion {number:02} took {elapsed:.1} s, over the {limit_secs} s target"
    );
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run_repo_plan(name: &str, out: PathBuf) -> PlanOutcome {
    let config = parse_config(&repo_config(name)).expect("shipped config parses");
    let plan = ExperimentPlan::new(config, Some(out), &[]);
    run_plan(&plan).expect("shipped plan runs")
}

struct Fixture {
    _dir: TempDir,
    i1: PlanOutcome,
    i2: PlanOutcome,
}

/// The paired far/near-initialization plans, shared by the ordering,
/// SNR, and determinism criteria.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let dir = TempDir::new().expect("tempdir");
        let i1 = run_repo_plan("paper_i1.toml", dir.path().join("i1"));
        let i2 = run_repo_plan("paper_i2.toml", dir.path().join("i2"));
        Fixture { _dir: dir, i1, i2 }
    })
}

fn read_csv_column(path: &Path, column: &str) -> Vec<f64> {
    let text =
        fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().expect("metric csv has a header");
    let index = header
        .split(',')
        .position(|name| name == column)
        .unwrap_or_else(|| panic!("no column {column} in {header}"));
    lines
        .map(|line| {
            line.split(',')
                .nth(index)
                .expect("row is as wide as the header")
                .parse()
                .expect("numeric cell")
        })
        .collect()
}

fn csv_bytes_by_name(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output directory listing")
        .map(|entry| entry.expect("directory entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&p).expect("csv bytes"))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn criterion_01_operator_suite() {
    let started = Instant::now();
    const REL: f64 = 1e-12;
    let mut vectors = 0usize;
    let mut checks = 0usize;
    let mut violations = 0usize;
    for (slot, &d) in [1usize, 2, 200].iter().enumerate() {
        let mut stream = StreamKey::new(2024).child("operators", slot as u64).stream();
        let stds = [0.1, 1.0, 10.0];
        let mut a = vec![0.0; d];
        let mut b = vec![0.0; d];
        for draw in 0..17_000 {
            stream.fill_gaussian(&mut a, stds[draw % stds.len()]);
            stream.fill_gaussian(&mut b, stds[(draw + 1) % stds.len()]);
            vectors += 2;
            let c = 0.5 + stream.uniform();
            let clipped = clip(&a, c);
            // Ball membership and idempotence.
            if vector::norm(&clipped) > c * (1.0 + REL) {
                violations += 1;
            }
            if vector::distance(&clip(&clipped, c), &clipped) > REL * c {
                violations += 1;
            }
            // The normalized image sits on the sphere exactly.
            let normed = normalize(&a, c);
            if (vector::norm(&normed) - c).abs() > REL * c {
                violations += 1;
            }
            // Above the scale the two operators are the same expression.
            if vector::norm(&a) >= c && clipped != normed {
                violations += 1;
            }
            // Projection onto a ball is nonexpansive.
            let separation = vector::distance(&a, &b);
            if vector::distance(&clipped, &clip(&b, c)) > separation * (1.0 + REL) + REL {
                violations += 1;
            }
            checks += 5;
        }
    }
    let pass = violations == 0 && vectors >= 100_000;
    let detail = format!(
        "{vectors} vectors, {checks} checks, {violations} violations, {:.2}s",
        started.elapsed().as_secs_f64()
    );
    report(1, "sensitivity operator contracts", pass, &detail);
    within_runtime(1, 5.0, started);
}

#[test]
fn criterion_02_noise_calibration() {
    let started = Instant::now();
    let budget = PrivacyBudget::new(5.0, 1e-6, 1.0, 100, 200).unwrap();
    let base = calibrate_noise_variance(&budget, 500, 1000.0)
        .unwrap()
        .sigma_squared;
    let frozen = 27631.021115928546;
    let double_rounds = calibrate_noise_variance(&budget, 1000, 1000.0)
        .unwrap()
        .sigma_squared;
    let double_scale = calibrate_noise_variance(&budget, 500, 2000.0)
        .unwrap()
        .sigma_squared;
    let noise = gaussian_vector(&StreamKey::new(7).child("noise", 0), 100_000, base);
    let mean = noise.iter().sum::<f64>() / noise.len() as f64;
    let variance =
        noise.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (noise.len() as f64 - 1.0);
    let pass = rel_gap(base, frozen) <= 1e-12
        && rel_gap(double_rounds, 2.0 * base) <= 1e-12
        && rel_gap(double_scale, 4.0 * base) <= 1e-12
        && (variance / base - 1.0).abs() <= 0.05;
    let detail = format!(
        "sigma^2 = {base:.6}, rounds x2 -> x{:.12}, scale x2 -> x{:.12}, \
         sample variance off by {:.2}%, {:.2}s",
        double_rounds / base,
        double_scale / base,
        (variance / base - 1.0).abs() * 100.0,
        started.elapsed().as_secs_f64()
    );
    report(2, "noise calibration and scaling laws", pass, &detail);
    within_runtime(2, 5.0, started);
}

#[test]
fn criterion_03_geometric_sum_grid() {
    let started = Instant::now();
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut boundary = 0usize;
    for m in 1..=250usize {
        for j in 1..=(250 / m) {
            match geometric_sum_check(j as f64 / 1000.0, m) {
                Ok(true) => checks += 1,
                Ok(false) => {
                    checks += 1;
                    violations += 1;
                }
                // The float product m * x lands a hair above 1/4 at the
                // integer boundary m * j = 250; those grid points fall
                // outside the hypothesis rather than inside a failure.
                Err(_) => boundary += 1,
            }
        }
    }
    let pass = violations == 0 && checks > 1_400;
    let detail = format!(
        "{checks} grid points, {violations} violations, {boundary} boundary skips, {:.2}s",
        started.elapsed().as_secs_f64()
    );
    report(3, "geometric sum inequality grid", pass, &detail);
    within_runtime(3, 10.0, started);
}

#[test]
fn criterion_04_descent_inequality_suite() {
    let started = Instant::now();
    let mut suite = generate_quadratic_suite(&StreamKey::new(0), 100, 200, 20, 0.05).unwrap();
    suite.solve_and_profile(1e-10).unwrap();
    let w_star = suite.global_optimum.clone().unwrap();
    let local_steps = 20;
    let eta = 1.0 / (2.0 * suite.smoothness_bound * local_steps as f64);
    let trajectories = sample_trajectories(
        &suite,
        &w_star,
        100,
        eta,
        local_steps,
        &StreamKey::new(0).child("acceptance", 0),
    )
    .unwrap();
    let suite_report = lemma_suite(&suite, &w_star, &trajectories, eta).unwrap();
    let pass = suite_report.is_clean() && trajectories.len() == 100;
    let detail = format!(
        "{} trajectories, {} checks, {} violations, {:.2}s",
        trajectories.len(),
        suite_report.total_checks(),
        suite_report.total_violations(),
        started.elapsed().as_secs_f64()
    );
    report(4, "descent inequality suite", pass, &detail);
    within_runtime(4, 30.0, started);
}

#[test]
fn criterion_05_centralized_reduction() {
    let started = Instant::now();
    let mut suite = ProblemSuite::new(vec![ClientObjective::Quadratic(QuadraticClient::scalar(
        1.0, 0.0,
    ))])
    .unwrap();
    suite.solve_and_profile(1e-12).unwrap();
    let config = RunConfig {
        rounds: 100,
        local_steps: 1,
        expected_cohort: 1.0,
        schedule: ScheduleSpec::constant(0.1),
        policy: SensitivityPolicy::None,
        budget: None,
        init: vec![1.0],
        master_seed: 3,
        average_by_actual: false,
        record_iterates: true,
        record_bound_trace: false,
    };
    let output = run_federated(&suite, &config).unwrap();
    let iterates = output.iterates.expect("recorded iterates");
    let mut w = 1.0f64;
    let mut max_diff = 0.0f64;
    for point in &iterates {
        max_diff = max_diff.max((point[0] - w).abs());
        w -= 0.1 * w;
    }
    let pass = max_diff <= 1e-12 && iterates.len() == 101;
    let detail = format!(
        "{} iterates, max drift from plain gradient descent {max_diff:.1e}, {:.2}s",
        iterates.len(),
        started.elapsed().as_secs_f64()
    );
    report(5, "single-client run reduces to gradient descent", pass, &detail);
    within_runtime(5, 1.0, started);
}

#[test]
fn criterion_06_equivalence_regime() {
    let started = Instant::now();
    let mut suite = generate_quadratic_suite(&StreamKey::new(42), 4, 8, 4, 0.5).unwrap();
    suite.solve_and_profile(1e-12).unwrap();
    let w_star = suite.global_optimum.clone().unwrap();
    let mut init = w_star.clone();
    for x in &mut init {
        *x += 1.0;
    }
    let budget = PrivacyBudget::new(3.0, 1e-4, 1.0, 4, 8).unwrap();
    let base = RunConfig {
        rounds: 50,
        local_steps: 2,
        expected_cohort: 4.0,
        schedule: ScheduleSpec::constant(0.01),
        policy: SensitivityPolicy::None,
        budget: Some(budget),
        init,
        master_seed: 11,
        average_by_actual: false,
        record_iterates: true,
        record_bound_trace: false,
    };
    // The update norms move with the scale (clipping changes the
    // trajectory), so measure the minimum on the clipped run itself and
    // shrink the scale until it clears that minimum.
    let mut scale = 0.5;
    let mut found = None;
    for _ in 0..20 {
        let mut clip_config = base.clone();
        clip_config.policy = SensitivityPolicy::Clip { scale };
        let clip_run = run_federated(&suite, &clip_config).unwrap();
        let min_norm = clip_run
            .records
            .iter()
            .map(|r| r.u_min)
            .fold(f64::INFINITY, f64::min);
        if scale <= min_norm {
            found = Some((scale, min_norm, clip_run));
            break;
        }
        scale /= 2.0;
    }
    let (scale, min_norm, clip_run) = found.expect("a scale below the minimum update norm");
    let mut norm_config = base.clone();
    norm_config.policy = SensitivityPolicy::Normalize { scale };
    let norm_run = run_federated(&suite, &norm_config).unwrap();
    let clip_iterates = clip_run.iterates.expect("recorded iterates");
    let norm_iterates = norm_run.iterates.expect("recorded iterates");
    let mut max_diff = 0.0f64;
    for (a, b) in clip_iterates.iter().zip(&norm_iterates) {
        max_diff = max_diff.max(vector::max_abs_diff(a, b));
    }
    let pass = max_diff <= 1e-12 && clip_iterates.len() == norm_iterates.len();
    let detail = format!(
        "C = {scale}, min ||u|| = {min_norm:.3}, max coordinate difference {max_diff:.1e}, {:.2}s",
        started.elapsed().as_secs_f64()
    );
    report(6, "clip equals normalize below the minimum update norm", pass, &detail);
    within_runtime(6, 60.0, started);
}

#[test]
fn criterion_07_suboptimality_ordering() {
    let started = Instant::now();
    let fx = fixture();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, outcome) in [("i1", &fx.i1), ("i2", &fx.i2)] {
        let variants = &outcome.summary.variants;
        let mean = |variant: String| -> f64 {
            variants
                .get(&variant)
                .unwrap_or_else(|| panic!("missing variant {variant}"))
                .mean_final_suboptimality
        };
        for scale in ["50", "100"] {
            let clip_mean = mean(format!("clip_c{scale}"));
            let norm_mean = mean(format!("norm_c{scale}"));
            pass &= norm_mean < clip_mean;
            parts.push(format!(
                "{name} C={scale}: norm {norm_mean:.4} < clip {clip_mean:.4}"
            ));
        }
        let gap = rel_gap(mean("clip_c40".into()), mean("norm_c40".into()));
        pass &= gap <= 0.10;
        parts.push(format!("{name} C=40: gap {:.1}%", gap * 100.0));
    }
    let detail = format!(
        "{}, {:.0}s",
        parts.join("; "),
        started.elapsed().as_secs_f64()
    );
    report(
        7,
        "normalization beats clipping at C in {50, 100} and matches at 40",
        pass,
        &detail,
    );
    within_runtime(7, 600.0, started);
}

#[test]
fn criterion_08_snr_dominance() {
    let started = Instant::now();
    let fx = fixture();
    let mut worst = 1.0f64;
    let mut compared = 0usize;
    for outcome in [&fx.i1, &fx.i2] {
        for seed in [1u64, 2, 3] {
            for scale in ["50", "100"] {
                let clip_snr = read_csv_column(
                    &outcome.out_dir.join(format!("clip_c{scale}_{seed}.csv")),
                    "snr",
                );
                let norm_snr = read_csv_column(
                    &outcome.out_dir.join(format!("norm_c{scale}_{seed}.csv")),
                    "snr",
                );
                assert_eq!(clip_snr.len(), norm_snr.len(), "paired runs share rounds");
                let wins = clip_snr
                    .iter()
                    .zip(&norm_snr)
                    .filter(|&(c, n)| n >= c)
                    .count();
                worst = worst.min(wins as f64 / clip_snr.len() as f64);
                compared += 1;
            }
        }
    }
    let pass = worst >= 0.95 && compared == 12;
    let detail = format!(
        "{compared} shared-noise pairs, worst round-wise dominance {:.1}%, {:.0}s",
        worst * 100.0,
        started.elapsed().as_secs_f64()
    );
    report(8, "normalized SNR dominates clipped SNR round-wise", pass, &detail);
}

#[test]
fn criterion_09_bound_validity() {
    let started = Instant::now();
    let dir = TempDir::new().unwrap();
    let outcome = run_repo_plan("theorem.toml", dir.path().join("theorem"));
    let theorem = outcome.summary.theorem.expect("theorem-mode summary");
    let clip_agg = theorem.clip.expect("clip bound aggregate");
    let norm_agg = theorem.norm.expect("norm bound aggregate");
    let pass = clip_agg.holds && norm_agg.holds;
    let detail = format!(
        "clip lhs {:.4} <= rhs {:.4}; norm lhs {:.4} <= rhs {:.4}; {:.0}s",
        clip_agg.mean_empirical_lhs,
        clip_agg.mean_rhs,
        norm_agg.mean_empirical_lhs,
        norm_agg.mean_rhs,
        started.elapsed().as_secs_f64()
    );
    report(9, "closed-form bounds dominate the recorded runs", pass, &detail);
    within_runtime(9, 600.0, started);
}

#[test]
fn criterion_10_sharded_classification() {
    let started = Instant::now();
    let config = parse_config(&repo_config("logistic_shards.toml")).unwrap();
    let dir = TempDir::new().unwrap();
    let plan = ExperimentPlan::new(config.clone(), Some(dir.path().join("logistic")), &[]);
    let outcome = run_plan(&plan).expect("classification plan runs");

    // Rebuild the generator's labels and the dealt shards to check the
    // class spread of every client exhaustively.
    let (_, assignment) = build_suite(&config).expect("suite rebuilds");
    let assignment = assignment.expect("label-shard suite records an assignment");
    let (_, labels) = generate_classification_data(
        &StreamKey::new(config.suite_seed),
        config.classes,
        config.samples_per_class,
        config.features,
        config.class_separation,
    );
    let mut max_classes = 0usize;
    for samples in &assignment.client_samples {
        let distinct: BTreeSet<usize> = samples.iter().map(|&s| labels[s]).collect();
        max_classes = max_classes.max(distinct.len());
    }

    let centralized = outcome
        .summary
        .suite
        .centralized_accuracy
        .expect("solved suite reports its training accuracy");
    let baseline = outcome
        .summary
        .runs
        .iter()
        .find(|r| r.variant == "fedavg")
        .expect("non-private baseline run");
    let accuracy = baseline
        .final_accuracy
        .expect("classification runs report accuracy");
    let finite = outcome
        .summary
        .runs
        .iter()
        .all(|r| r.final_suboptimality.is_finite());
    let pass = max_classes <= config.shards_per_client
        && accuracy >= 0.9 * centralized
        && finite
        && outcome.summary.runs.len() == 3;
    let detail = format!(
        "max classes per client {max_classes} (cap {}), baseline accuracy {accuracy:.3} \
         vs centralized {centralized:.3}, private finals finite: {finite}, {:.0}s",
        config.shards_per_client,
        started.elapsed().as_secs_f64()
    );
    report(10, "label-shard classification runs complete", pass, &detail);
    within_runtime(10, 300.0, started);
}

#[test]
fn criterion_11_determinism() {
    let started = Instant::now();
    let fx = fixture();
    let baseline = csv_bytes_by_name(&fx.i1.out_dir);
    let config = parse_config(&repo_config("paper_i1.toml")).unwrap();
    let dir = TempDir::new().unwrap();
    let plan = ExperimentPlan::new(config, Some(dir.path().join("rerun")), &[]);
    // The first pass ran on the default pool; replay on four threads.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let rerun = pool.install(|| run_plan(&plan)).expect("rerun finishes");
    let fresh = csv_bytes_by_name(&rerun.out_dir);
    let names_match = baseline.iter().map(|(n, _)| n).eq(fresh.iter().map(|(n, _)| n));
    let mut differing = Vec::new();
    for ((name, a), (_, b)) in baseline.iter().zip(&fresh) {
        if a != b {
            differing.push(name.clone());
        }
    }
    let pass = names_match && differing.is_empty() && !baseline.is_empty();
    let detail = format!(
        "{} csv files byte-identical across thread counts{}{}, {:.0}s",
        baseline.len(),
        if differing.is_empty() { "" } else { ", differing: " },
        differing.join(" "),
        started.elapsed().as_secs_f64()
    );
    report(11, "rerun reproduces every csv byte for byte", pass, &detail);
}
