//! Expansion of a parsed configuration into concrete runs.
//!
//! A plan is the cartesian product of seeds and variants. All variants
//! of one seed share the suite, the initial iterate, and the noise and
//! sampling stream lineages (those derive from the master seed and round
//! and client labels only), so clip-vs-norm comparisons are
//! common-random-number experiments by construction.

use std::path::PathBuf;

use dpfed::fedopt::SensitivityPolicy;
use dpfed::stream::StreamKey;
use dpfed::vector;

use crate::config::{Algorithm, ExperimentConfig, InitKind};
use crate::error::Result;

/// One concrete run of the plan, identical across seeds.
#[derive(Debug, Clone)]
pub struct RunSpec {
    /// Variant label used in file names, e.g. `clip_c50`.
    pub variant: String,
    pub policy: SensitivityPolicy,
    pub eta0: f64,
    pub rounds: usize,
}

/// Constants derived from the bound preconditions for theorem-mode runs.
#[derive(Debug, Clone)]
pub struct TheoremDerivation {
    pub rho: f64,
    pub alpha: f64,
    /// Radius constant; defaults to `L * ||w0 - w*||`.
    pub gamma: f64,
    /// Per-step sensitivity `c_hat_factor * sqrt(L * max gap)`.
    pub c_hat: f64,
    /// Transmitted sensitivity scale `c_hat * E`.
    pub scale: f64,
    /// Constant rate `rho / (2 alpha L)`.
    pub eta: f64,
    /// Round count `round(2 alpha gamma / (c_hat E rho^2))`, at least 1.
    pub rounds: usize,
}

/// A validated configuration plus the resolved seed list and output
/// directory.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    /// Resolve overrides from the command line: a non-empty seed list
    /// replaces the config's, `--out` beats the `out` key, and a config
    /// with neither writes next to the current directory under `out/`.
    pub fn new(
        config: ExperimentConfig,
        out_override: Option<PathBuf>,
        seed_override: &[u64],
    ) -> Self {
        let seeds = if seed_override.is_empty() {
            config.seeds()
        } else {
            seed_override.to_vec()
        };
        let out_dir = out_override
            .or_else(|| config.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        ExperimentPlan {
            config,
            seeds,
            out_dir,
        }
    }

    /// The variant list of one seed. Theorem mode replaces the
    /// configured scales and rates with the derived constants.
    pub fn variants(&self, theorem: Option<&TheoremDerivation>) -> Result<Vec<RunSpec>> {
        let config = &self.config;
        if let Some(t) = theorem {
            let pairs = [("clip_theorem", true), ("norm_theorem", false)];
            let specs = pairs
                .iter()
                .filter(|(_, is_clip)| match config.algorithm {
                    Algorithm::DpFedAvgClip => *is_clip,
                    Algorithm::DpNormFedAvg => !*is_clip,
                    Algorithm::Paired => true,
                    Algorithm::FedAvg => false,
                })
                .map(|(name, is_clip)| RunSpec {
                    variant: (*name).into(),
                    policy: if *is_clip {
                        SensitivityPolicy::Clip { scale: t.scale }
                    } else {
                        SensitivityPolicy::Normalize { scale: t.scale }
                    },
                    eta0: t.eta,
                    rounds: t.rounds,
                })
                .collect();
            return Ok(specs);
        }

        let rounds = self
            .config
            .rounds
            .expect("validated: K present outside theorem mode");
        let mut specs = Vec::new();
        match config.algorithm {
            Algorithm::FedAvg => {
                specs.push(RunSpec {
                    variant: "fedavg".into(),
                    policy: SensitivityPolicy::None,
                    eta0: config.fedavg_rate()?,
                    rounds,
                });
            }
            Algorithm::DpFedAvgClip | Algorithm::DpNormFedAvg | Algorithm::Paired => {
                if config.include_fedavg {
                    specs.push(RunSpec {
                        variant: "fedavg".into(),
                        policy: SensitivityPolicy::None,
                        eta0: config.fedavg_rate()?,
                        rounds,
                    });
                }
                for (scale, eta0) in config.scale_rate_pairs()? {
                    let label = format_scale(scale);
                    if config.algorithm != Algorithm::DpNormFedAvg {
                        specs.push(RunSpec {
                            variant: format!("clip_c{label}"),
                            policy: SensitivityPolicy::Clip { scale },
                            eta0,
                            rounds,
                        });
                    }
                    if config.algorithm != Algorithm::DpFedAvgClip {
                        specs.push(RunSpec {
                            variant: format!("norm_c{label}"),
                            policy: SensitivityPolicy::Normalize { scale },
                            eta0,
                            rounds,
                        });
                    }
                }
            }
        }
        Ok(specs)
    }
}

/// File-name-safe rendering of a sensitivity scale: `40` stays `40`,
/// `62.5` becomes `62p5`.
pub fn format_scale(scale: f64) -> String {
    format!("{scale}").replace('.', "p").replace('-', "m")
}

/// Materialize a named initialization for one seed.
///
/// `i1` is `w* + z` and `i2` is `w* + z/5`, with the same `z` (uniform
/// [0, 1) coordinates) drawn from the seed's dedicated `init` stream, so
/// the two recipes differ only in perturbation scale.
pub fn build_init(kind: InitKind, w_star: &[f64], master_seed: u64) -> Vec<f64> {
    match kind {
        InitKind::Zero => vector::zeros(w_star.len()),
        InitKind::I1 => perturbed(w_star, master_seed, 1.0),
        InitKind::I2 => perturbed(w_star, master_seed, 5.0),
    }
}

fn perturbed(w_star: &[f64], master_seed: u64, divisor: f64) -> Vec<f64> {
    let mut stream = StreamKey::new(master_seed).child("init", 0).stream();
    w_star
        .iter()
        .map(|&w| w + stream.uniform() / divisor)
        .collect()
}
