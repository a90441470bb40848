//! Flat TOML experiment configuration.
//!
//! One file describes one plan: the problem suite, the algorithm
//! variant(s), the schedule, and the privacy budget. Unknown keys are
//! rejected by the parser with line markers; every value is validated
//! eagerly and rejection messages name the offending key.

use std::path::Path;

use serde::Deserialize;

use crate::error::{CliError, Result};

/// Which federated variant(s) the plan expands to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Algorithm {
    /// Non-private baseline; forbids a budget and a sensitivity scale.
    #[serde(rename = "fedavg")]
    FedAvg,
    /// Private runs bounding updates by clipping.
    #[serde(rename = "dp-fedavg-clip")]
    DpFedAvgClip,
    /// Private runs bounding updates by normalization.
    #[serde(rename = "dp-normfedavg")]
    DpNormFedAvg,
    /// Clip and norm runs side by side over shared noise streams.
    #[serde(rename = "paired")]
    Paired,
}

impl Algorithm {
    pub fn is_private(self) -> bool {
        self != Algorithm::FedAvg
    }
}

/// Problem family the clients are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum SuiteKind {
    #[default]
    #[serde(rename = "quadratic")]
    Quadratic,
    #[serde(rename = "logistic")]
    Logistic,
}

/// Named initialization recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum InitKind {
    /// The zero vector.
    #[default]
    #[serde(rename = "zero")]
    Zero,
    /// `w* + z` with `z` coordinates uniform on [0, 1).
    #[serde(rename = "i1")]
    I1,
    /// `w* + z/5`, same `z` lineage as `i1`.
    #[serde(rename = "i2")]
    I2,
}

/// On-disk layout of an external feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
pub enum FeatureFormatKind {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "binary")]
    Binary,
}

impl FeatureFormatKind {
    pub fn to_format(self) -> dpfed::objectives::FeatureFormat {
        match self {
            FeatureFormatKind::Csv => dpfed::objectives::FeatureFormat::Csv,
            FeatureFormatKind::Binary => dpfed::objectives::FeatureFormat::Binary,
        }
    }
}

/// A key that accepts either one number or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ScalarOrList::Scalar(v) => vec![*v],
            ScalarOrList::List(vs) => vs.clone(),
        }
    }

    fn is_list(&self) -> bool {
        matches!(self, ScalarOrList::List(_))
    }
}

/// A seed key that accepts either one integer or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    One(u64),
    Many(Vec<u64>),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::One(0)
    }
}

impl SeedSpec {
    pub fn values(&self) -> Vec<u64> {
        match self {
            SeedSpec::One(s) => vec![*s],
            SeedSpec::Many(ss) => ss.clone(),
        }
    }
}

fn default_factor_rank() -> usize {
    20
}
fn default_factor_std() -> f64 {
    0.05
}
fn default_classes() -> usize {
    10
}
fn default_samples_per_class() -> usize {
    50
}
fn default_features() -> usize {
    20
}
fn default_class_separation() -> f64 {
    3.0
}
fn default_l2() -> f64 {
    1e-3
}
fn default_shards_per_client() -> usize {
    5
}
fn default_local_steps() -> usize {
    1
}
fn default_decay() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_q() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    5.0
}
fn default_c_hat_factor() -> f64 {
    4.0
}
fn default_trajectory_window() -> usize {
    5
}

/// The full flat key set of an experiment file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,

    /// Master seed(s); the plan repeats once per seed.
    #[serde(default)]
    pub seed: SeedSpec,

    /// Output directory; the `--out` flag overrides it.
    #[serde(default)]
    pub out: Option<String>,

    #[serde(default)]
    pub suite: SuiteKind,

    /// Client count `n`.
    pub n: usize,

    /// Model dimension (quadratic suites only; logistic dimension is
    /// features x classes).
    #[serde(default)]
    pub d: Option<usize>,

    /// Rank of each client's quadratic factor.
    #[serde(default = "default_factor_rank")]
    pub factor_rank: usize,

    /// Entry standard deviation of the quadratic factors.
    #[serde(default = "default_factor_std")]
    pub factor_std: f64,

    /// Seed of the problem generator, separate from the run seeds.
    #[serde(default)]
    pub suite_seed: u64,

    /// Class count of generated logistic data.
    #[serde(default = "default_classes")]
    pub classes: usize,

    /// Samples generated per class.
    #[serde(default = "default_samples_per_class")]
    pub samples_per_class: usize,

    /// Feature dimension of generated logistic data.
    #[serde(default = "default_features")]
    pub features: usize,

    /// Scale of the Gaussian class means relative to unit sample noise.
    #[serde(default = "default_class_separation")]
    pub class_separation: f64,

    /// L2 coefficient of the logistic objectives.
    #[serde(default = "default_l2")]
    pub l2: f64,

    /// Label-sorted shards dealt to each client.
    #[serde(default = "default_shards_per_client")]
    pub shards_per_client: usize,

    /// Load features from this file instead of generating them.
    #[serde(default)]
    pub feature_path: Option<String>,

    #[serde(default)]
    pub feature_format: FeatureFormatKind,

    /// Round count; derived (and therefore forbidden) in theorem mode.
    #[serde(rename = "K", default)]
    pub rounds: Option<usize>,

    /// Local gradient steps per round.
    #[serde(rename = "E", default = "default_local_steps")]
    pub local_steps: usize,

    /// Expected cohort size; defaults to full participation.
    #[serde(rename = "r", default)]
    pub cohort: Option<f64>,

    #[serde(default)]
    pub init: InitKind,

    /// Initial local rate; a list pairs index-wise with a `C` list.
    /// Derived (and therefore forbidden) in theorem mode.
    #[serde(default)]
    pub eta0: Option<ScalarOrList>,

    /// Per-round multiplicative rate decay in (0, 1].
    #[serde(default = "default_decay")]
    pub decay: f64,

    /// Server momentum in [0, 1).
    #[serde(default)]
    pub momentum: f64,

    /// Pin the server rate to the client rate.
    #[serde(default = "default_true")]
    pub beta_equals_eta: bool,

    #[serde(default)]
    pub epsilon: Option<f64>,

    #[serde(default)]
    pub delta: Option<f64>,

    /// Calibration constant of the noise-variance formula.
    #[serde(default = "default_q")]
    pub q: f64,

    /// Sensitivity scale(s); derived in theorem mode.
    #[serde(rename = "C", default)]
    pub clip: Option<ScalarOrList>,

    /// Divide aggregates by the realized cohort size instead of `r`.
    #[serde(default)]
    pub average_by_actual: bool,

    /// Derive `C`, `eta`, and `K` from the bound preconditions.
    #[serde(default)]
    pub theorem_mode: bool,

    /// Free bound constant, at least 1.
    #[serde(default = "default_alpha")]
    pub alpha: f64,

    /// Free bound radius; defaults to `L * ||w0 - w*||`.
    #[serde(default)]
    pub gamma: Option<f64>,

    /// Multiplier on `sqrt(L * max gap)` for the derived per-step
    /// sensitivity; the bounds need at least 4.
    #[serde(default = "default_c_hat_factor")]
    pub c_hat_factor: f64,

    /// Add a non-private baseline run to a paired plan.
    #[serde(default)]
    pub include_fedavg: bool,

    /// Record iterates and write smoothed 2-D trajectory projections.
    #[serde(default)]
    pub record_trajectory: bool,

    /// Moving-average window of the projected trajectories.
    #[serde(default = "default_trajectory_window")]
    pub trajectory_window: usize,

    /// Write per-round per-client traces for bound evaluation.
    #[serde(default)]
    pub record_bound_trace: bool,

    /// Gradient tolerance of the global solve; defaults to 1e-10 for
    /// quadratic suites and 1e-6 for logistic ones.
    #[serde(default)]
    pub solve_tolerance: Option<f64>,
}

fn fail(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {message}"))
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        self.seed.values()
    }

    /// Expected cohort size, full participation when unset.
    pub fn cohort_or_full(&self) -> f64 {
        self.cohort.unwrap_or(self.n as f64)
    }

    pub fn solve_tolerance_or_default(&self) -> f64 {
        self.solve_tolerance.unwrap_or(match self.suite {
            SuiteKind::Quadratic => 1e-10,
            SuiteKind::Logistic => 1e-6,
        })
    }

    /// The `(C, eta0)` pairs of the private variants: a scalar rate
    /// broadcasts over the scale list, a rate list pairs index-wise.
    pub fn scale_rate_pairs(&self) -> Result<Vec<(f64, f64)>> {
        let scales = self
            .clip
            .as_ref()
            .ok_or_else(|| fail("C", "required for private algorithms"))?
            .values();
        let rates = self
            .eta0
            .as_ref()
            .ok_or_else(|| fail("eta0", "required outside theorem mode"))?;
        let rates = match rates {
            ScalarOrList::Scalar(v) => vec![*v; scales.len()],
            ScalarOrList::List(vs) => {
                if vs.len() != scales.len() {
                    return Err(fail(
                        "eta0",
                        format!(
                            "list length {} does not match the C list length {}",
                            vs.len(),
                            scales.len()
                        ),
                    ));
                }
                vs.clone()
            }
        };
        Ok(scales.into_iter().zip(rates).collect())
    }

    /// The rate of a non-private run: the scalar rate, or the first
    /// entry when the private variants carry a rate list.
    pub fn fedavg_rate(&self) -> Result<f64> {
        match self.eta0.as_ref() {
            Some(rates) => rates
                .values()
                .first()
                .copied()
                .ok_or_else(|| fail("eta0", "list must be non-empty")),
            None => Err(fail("eta0", "required outside theorem mode")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_suite()?;
        self.validate_run_shape()?;
        self.validate_schedule()?;
        self.validate_privacy()?;
        self.validate_modes()
    }

    fn validate_suite(&self) -> Result<()> {
        if self.n == 0 {
            return Err(fail("n", "must be at least 1"));
        }
        match self.suite {
            SuiteKind::Quadratic => {
                let d = self.d.ok_or_else(|| fail("d", "required for quadratic suites"))?;
                if d == 0 {
                    return Err(fail("d", "must be at least 1"));
                }
                if self.factor_rank == 0 || self.factor_rank > d {
                    return Err(fail("factor_rank", format!("must lie in [1, d = {d}]")));
                }
                if !(self.factor_std > 0.0 && self.factor_std.is_finite()) {
                    return Err(fail("factor_std", "must be positive and finite"));
                }
                if self.feature_path.is_some() {
                    return Err(fail("feature_path", "only valid for logistic suites"));
                }
            }
            SuiteKind::Logistic => {
                if self.d.is_some() {
                    return Err(fail(
                        "d",
                        "derived as features x classes for logistic suites; remove it",
                    ));
                }
                if self.feature_path.is_none() {
                    if self.classes < 2 {
                        return Err(fail("classes", "must be at least 2"));
                    }
                    if self.samples_per_class == 0 {
                        return Err(fail("samples_per_class", "must be at least 1"));
                    }
                    if self.features == 0 {
                        return Err(fail("features", "must be at least 1"));
                    }
                    if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
                        return Err(fail("class_separation", "must be positive and finite"));
                    }
                }
                if !(self.l2 >= 0.0 && self.l2.is_finite()) {
                    return Err(fail("l2", "must be finite and non-negative"));
                }
                if self.shards_per_client == 0 {
                    return Err(fail("shards_per_client", "must be at least 1"));
                }
            }
        }
        if let Some(tol) = self.solve_tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(fail("solve_tolerance", "must be positive and finite"));
            }
        }
        Ok(())
    }

    fn validate_run_shape(&self) -> Result<()> {
        match (self.theorem_mode, self.rounds) {
            (false, None) => return Err(fail("K", "required outside theorem mode")),
            (false, Some(0)) => return Err(fail("K", "must be at least 1")),
            (true, Some(_)) => {
                return Err(fail("K", "derived in theorem mode; remove it"));
            }
            _ => {}
        }
        if self.local_steps == 0 {
            return Err(fail("E", "must be at least 1"));
        }
        if let Some(r) = self.cohort {
            if !(r >= 1.0 && r <= self.n as f64) {
                return Err(fail("r", format!("must lie in [1, n = {}]", self.n)));
            }
        }
        if self.seeds().is_empty() {
            return Err(fail("seed", "needs at least one entry"));
        }
        Ok(())
    }

    fn validate_schedule(&self) -> Result<()> {
        match (self.theorem_mode, self.eta0.as_ref()) {
            (false, None) => return Err(fail("eta0", "required outside theorem mode")),
            (true, Some(_)) => {
                return Err(fail("eta0", "derived in theorem mode; remove it"));
            }
            _ => {}
        }
        if let Some(rates) = self.eta0.as_ref() {
            let values = rates.values();
            if values.is_empty() {
                return Err(fail("eta0", "list must be non-empty"));
            }
            if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(fail("eta0", format!("rates must be positive, got {bad}")));
            }
            if rates.is_list() && self.clip.as_ref().map_or(true, |c| !c.is_list()) {
                return Err(fail("eta0", "a rate list requires a matching C list"));
            }
            if let (ScalarOrList::List(rate_list), Some(ScalarOrList::List(scales))) =
                (rates, self.clip.as_ref())
            {
                if rate_list.len() != scales.len() {
                    return Err(fail(
                        "eta0",
                        format!(
                            "list length {} does not match the C list length {}",
                            rate_list.len(),
                            scales.len()
                        ),
                    ));
                }
            }
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(fail("decay", format!("must lie in (0, 1], got {}", self.decay)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(fail(
                "momentum",
                format!("must lie in [0, 1), got {}", self.momentum),
            ));
        }
        Ok(())
    }

    fn validate_privacy(&self) -> Result<()> {
        if self.algorithm.is_private() {
            let epsilon = self
                .epsilon
                .ok_or_else(|| fail("epsilon", "required for private algorithms"))?;
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(fail("epsilon", format!("must be positive, got {epsilon}")));
            }
            let delta = self
                .delta
                .ok_or_else(|| fail("delta", "required for private algorithms"))?;
            if !(delta > 0.0 && delta < 1.0) {
                return Err(fail("delta", format!("must lie in (0, 1), got {delta}")));
            }
            if !(self.q > 0.0 && self.q.is_finite()) {
                return Err(fail("q", format!("must be positive, got {}", self.q)));
            }
            match (self.theorem_mode, self.clip.as_ref()) {
                (false, None) => {
                    return Err(fail("C", "required for private algorithms"));
                }
                (true, Some(_)) => {
                    return Err(fail("C", "derived in theorem mode; remove it"));
                }
                (false, Some(scales)) => {
                    let values = scales.values();
                    if values.is_empty() {
                        return Err(fail("C", "list must be non-empty"));
                    }
                    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                        return Err(fail("C", format!("scales must be positive, got {bad}")));
                    }
                }
                (true, None) => {}
            }
        } else {
            for (key, set) in [
                ("epsilon", self.epsilon.is_some()),
                ("delta", self.delta.is_some()),
                ("C", self.clip.is_some()),
            ] {
                if set {
                    return Err(fail(key, "not valid for the non-private baseline"));
                }
            }
        }
        Ok(())
    }

    fn validate_modes(&self) -> Result<()> {
        if self.theorem_mode {
            if !self.algorithm.is_private() {
                return Err(fail("theorem_mode", "requires a private algorithm"));
            }
            if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
                return Err(fail("alpha", format!("must be at least 1, got {}", self.alpha)));
            }
            if self.c_hat_factor < 4.0 {
                return Err(fail(
                    "c_hat_factor",
                    format!("bound preconditions need at least 4, got {}", self.c_hat_factor),
                ));
            }
            if let Some(g) = self.gamma {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(fail("gamma", format!("must be positive, got {g}")));
                }
            }
            if let Some(r) = self.cohort {
                if r != self.n as f64 {
                    return Err(fail("r", "theorem mode requires full participation (r = n)"));
                }
            }
            if self.decay != 1.0 {
                return Err(fail("decay", "theorem mode uses a constant rate; remove it"));
            }
            if self.momentum != 0.0 {
                return Err(fail("momentum", "theorem mode forbids server momentum"));
            }
            if self.include_fedavg {
                return Err(fail(
                    "include_fedavg",
                    "the baseline has no derived rate in theorem mode",
                ));
            }
        }
        if self.include_fedavg && self.algorithm != Algorithm::Paired {
            return Err(fail("include_fedavg", "only valid for paired plans"));
        }
        if self.record_trajectory {
            if self.algorithm != Algorithm::Paired {
                return Err(fail(
                    "record_trajectory",
                    "projections compare a clip run against a norm run; requires algorithm = \"paired\"",
                ));
            }
            if self.trajectory_window == 0 {
                return Err(fail("trajectory_window", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Parse and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text).map_err(|e| match e {
        CliError::Parse { message, .. } => CliError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Parse and validate configuration text.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        path: "<inline>".into(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}
