//! Grid sweeps: one nested plan per grid value, run sequentially, with
//! a root summary tying the sub-plans together.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{parse_config, ScalarOrList};
use crate::error::{CliError, Result};
use crate::plan::{format_scale, ExperimentPlan};
use crate::runner::run_plan;

/// A sweep grid: which config key to vary and the values to run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    /// `"eta0"` or `"C"`.
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub dir: String,
    pub summary: String,
    /// Per-variant seed-averaged final suboptimality of the sub-plan.
    pub mean_final_suboptimality: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub key: String,
    pub entries: Vec<SweepEntry>,
}

pub struct SweepOutcome {
    pub out_dir: PathBuf,
    pub summary_path: PathBuf,
    pub summary: SweepSummary,
}

/// Run the base config once per grid value, each into its own
/// subdirectory of the output root.
pub fn run_sweep(
    config_path: &Path,
    grid_path: &Path,
    out_override: Option<PathBuf>,
    seed_override: &[u64],
) -> Result<SweepOutcome> {
    let base = parse_config(config_path)?;
    let text = fs::read_to_string(grid_path)?;
    let grid: GridFile = toml::from_str(&text).map_err(|e| CliError::Parse {
        path: grid_path.display().to_string(),
        message: e.to_string(),
    })?;
    if grid.values.is_empty() {
        return Err(CliError::Config("values: sweep grid must be non-empty".into()));
    }
    for &value in &grid.values {
        if !(value > 0.0 && value.is_finite()) {
            return Err(CliError::Config(format!(
                "values: grid entries must be positive and finite, got {value}"
            )));
        }
    }
    if grid.key != "eta0" && grid.key != "C" {
        return Err(CliError::Config(format!(
            "key: unknown sweep key {:?}, expected \"eta0\" or \"C\"",
            grid.key
        )));
    }

    // Resolve seeds and the output root once; nested plans land in
    // per-value subdirectories.
    let root_plan = ExperimentPlan::new(base.clone(), out_override, seed_override);
    let root = root_plan.out_dir.clone();
    let seeds = root_plan.seeds.clone();

    let mut entries = Vec::new();
    for &value in &grid.values {
        let mut config = base.clone();
        match grid.key.as_str() {
            "eta0" => config.eta0 = Some(ScalarOrList::Scalar(value)),
            "C" => config.clip = Some(ScalarOrList::Scalar(value)),
            _ => unreachable!("key validated above"),
        }
        config.validate()?;
        let dir_name = format!("{}_{}", grid.key, format_scale(value));
        let plan = ExperimentPlan {
            config,
            seeds: seeds.clone(),
            out_dir: root.join(&dir_name),
        };
        log::info!("sweep point {} = {value} -> {dir_name}", grid.key);
        let outcome = run_plan(&plan)?;
        entries.push(SweepEntry {
            value,
            dir: dir_name.clone(),
            summary: format!("{dir_name}/summary.json"),
            mean_final_suboptimality: outcome
                .summary
                .variants
                .iter()
                .map(|(name, v)| (name.clone(), v.mean_final_suboptimality))
                .collect(),
        });
    }

    let summary = SweepSummary {
        key: grid.key.clone(),
        entries,
    };
    fs::create_dir_all(&root)?;
    let summary_path = root.join("sweep_summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(SweepOutcome {
        out_dir: root,
        summary_path,
        summary,
    })
}
