//! Declarative run-spec files: a TOML document with a version tag and the
//! same knobs the flags expose. Unknown keys are rejected so typos fail
//! loudly instead of silently falling back to defaults.

use serde::Deserialize;
use std::path::{Path, PathBuf};

use tgp_core::error::{Error, Result};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub generation: GenerationSpec,
    #[serde(default)]
    pub variation: VariationSpec,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    /// "csv" or "pagie".
    pub source: Option<String>,
    pub path: Option<PathBuf>,
    pub target_columns: Option<usize>,
    pub has_header: Option<bool>,
    /// "mse" or "accuracy".
    pub objective: Option<String>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub step: Option<f64>,
    pub holdout: Option<f64>,
    pub standardize: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub pop: Option<usize>,
    pub generations: Option<usize>,
    pub max_len: Option<usize>,
    pub tournament: Option<usize>,
    pub p_crossover: Option<f64>,
    pub p_mutation: Option<f64>,
    pub elite: Option<usize>,
    pub target_fitness: Option<f64>,
    /// "auto", "hybrid", or "data".
    pub eval_strategy: Option<String>,
    /// "standard" or "extended".
    pub function_set: Option<String>,
    pub lanes: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    /// "literal" or "per_case".
    pub gpops_formula: Option<String>,
    pub const_min: Option<f64>,
    pub const_max: Option<f64>,
    pub chunk_cap: Option<usize>,
    pub threshold_factor: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GenerationSpec {
    /// "grow", "full", or "ramped_half_and_half".
    pub method: Option<String>,
    pub depth_min: Option<usize>,
    pub depth_max: Option<usize>,
    pub p_leaf: Option<f64>,
    pub p_const: Option<f64>,
    pub p_modi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct VariationSpec {
    /// "one_point" or "leaf_biased".
    pub crossover_kind: Option<String>,
    pub leaf_bias: Option<f64>,
    pub point_rate: Option<f64>,
    pub const_sigma: Option<f64>,
    pub weights: Option<WeightsSpec>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub subtree: Option<f64>,
    pub hoist: Option<f64>,
    pub single_point: Option<f64>,
    pub multi_point: Option<f64>,
    pub insert: Option<f64>,
    pub delete: Option<f64>,
    pub single_const: Option<f64>,
    pub multi_const: Option<f64>,
}

pub fn load_spec(path: &Path) -> Result<SpecFile> {
    let text = std::fs::read_to_string(path)?;
    let spec: SpecFile =
        toml::from_str(&text).map_err(|e| Error::ConfigError(format!("spec file: {e}")))?;
    match spec.version {
        Some(SPEC_VERSION) => Ok(spec),
        Some(v) => Err(Error::ConfigError(format!(
            "spec file version {v} unsupported (expected {SPEC_VERSION})"
        ))),
        None => Err(Error::ConfigError(
            "spec file is missing the `version` key".into(),
        )),
    }
}
