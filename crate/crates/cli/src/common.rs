//! Shared plumbing: flag/spec resolution, dataset construction, lane
//! detection, exit-code mapping, and JSON helpers.

use std::path::PathBuf;

use tgp_core::error::{Error, Result};
use tgp_core::eval::{Dataset, ParallelWidth};
use tgp_core::problems::{generate_pagie, load_csv, CsvSchema, PagieSpec, Problem};

use crate::args::{DataArgs, ObjectiveArg};
use crate::spec::ProblemSpec;

/// Exit code classes: 2 for configuration problems, 3 for data problems.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConfigError(_)
        | Error::ConfigMismatch(_)
        | Error::EmptyPopulation
        | Error::NonPositiveInput(_) => 2,
        _ => 3,
    }
}

/// Lane resolution: explicit flag, then spec value, then the TGP_LANES
/// environment variable, then hardware detection.
pub fn resolve_lanes(flag: Option<usize>, spec: Option<usize>) -> Result<ParallelWidth> {
    if let Some(n) = flag.or(spec) {
        return ParallelWidth::fixed(n);
    }
    if let Ok(v) = std::env::var("TGP_LANES") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::ConfigError(format!("TGP_LANES={v} is not a lane count")))?;
        return ParallelWidth::fixed(n);
    }
    Ok(ParallelWidth::detect())
}

/// Fully resolved dataset choice.
pub struct ResolvedData {
    pub dataset: Dataset,
    pub holdout: Option<Dataset>,
    pub objective: ObjectiveArg,
    pub source: String,
}

pub fn build_dataset(args: &DataArgs, spec: &ProblemSpec, seed: u64) -> Result<ResolvedData> {
    let source = if args.pagie {
        "pagie".to_string()
    } else if args.data.is_some() {
        "csv".to_string()
    } else {
        spec.source.clone().unwrap_or_default()
    };

    let mut dataset = match source.as_str() {
        "pagie" => {
            let d = PagieSpec::default();
            generate_pagie(&PagieSpec {
                lo: args.lo.or(spec.lo).unwrap_or(d.lo),
                hi: args.hi.or(spec.hi).unwrap_or(d.hi),
                step: args.step.or(spec.step).unwrap_or(d.step),
            })?
        }
        "csv" => {
            let path: PathBuf = args
                .data
                .clone()
                .or_else(|| spec.path.clone())
                .ok_or_else(|| Error::ConfigError("csv source needs a path".into()))?;
            let schema = CsvSchema {
                target_columns: args.targets.or(spec.target_columns).unwrap_or(1),
                has_header: if args.no_header {
                    false
                } else {
                    spec.has_header.unwrap_or(true)
                },
            };
            load_csv(&path, &schema)?
        }
        "" => {
            return Err(Error::ConfigError(
                "no dataset: pass --data <csv>, --pagie, or a spec file".into(),
            ))
        }
        other => {
            return Err(Error::ConfigError(format!(
                "unknown problem source {other:?}"
            )))
        }
    };

    if args.standardize || spec.standardize.unwrap_or(false) {
        dataset = dataset.standardized();
    }

    let mut holdout = None;
    if let Some(frac) = args.holdout.or(spec.holdout) {
        if frac > 0.0 {
            let (train, held) = dataset.split(frac, seed)?;
            dataset = train;
            holdout = Some(held);
        }
    }

    let objective = args.objective.unwrap_or(match spec.objective.as_deref() {
        Some("accuracy") => ObjectiveArg::Accuracy,
        Some("mse") | None => ObjectiveArg::Mse,
        Some(other) => {
            return Err(Error::ConfigError(format!(
                "unknown objective {other:?} (use mse or accuracy)"
            )))
        }
    });

    Ok(ResolvedData {
        dataset,
        holdout,
        objective,
        source,
    })
}

pub fn build_problem(data: ResolvedData) -> Result<(Problem, Option<Dataset>)> {
    let problem = match data.objective {
        ObjectiveArg::Mse => Problem::regression(data.dataset)?,
        ObjectiveArg::Accuracy => Problem::classification(data.dataset)?,
    };
    Ok((problem, data.holdout))
}

/// JSON value for an f64 that may be non-finite (JSON has no infinities).
pub fn json_f64(v: f64) -> serde_json::Value {
    match serde_json::Number::from_f64(v) {
        Some(n) => serde_json::Value::Number(n),
        None => serde_json::Value::String(format!("{v}")),
    }
}
