//! `tgp run`: evolve per seed, streaming per-generation stats to CSV and
//! writing a summary, checkpoint, and best-expression file per run.

use std::io::Write;
use std::path::{Path, PathBuf};

use tgp_core::checkpoint::checkpoint_save;
use tgp_core::engine::{gpops_per_second, Engine, EvolutionConfig, GenerationStats, GpopsFormula};
use tgp_core::error::{Error, Result};
use tgp_core::generate::{GenMethod, GenerationConfig};
use tgp_core::problems::Problem;
use tgp_core::tree::EncodingConfig;
use tgp_core::variation::{CrossoverKind, MutationWeights, VariationConfig};
use tgp_core::{FunctionSet};

use crate::args::{FunctionSetArg, GpopsArg, RunArgs};
use crate::common::{build_dataset, build_problem, json_f64, resolve_lanes};
use crate::spec::{load_spec, SpecFile};

fn parse_enum<T>(name: &str, value: Option<&str>, table: &[(&str, T)]) -> Result<Option<T>>
where
    T: Copy,
{
    let Some(v) = value else { return Ok(None) };
    for (key, out) in table {
        if *key == v {
            return Ok(Some(*out));
        }
    }
    let options: Vec<&str> = table.iter().map(|(k, _)| *k).collect();
    Err(Error::ConfigError(format!(
        "unknown {name} {v:?} (options: {options:?})"
    )))
}

/// Merge flags over spec-file values over defaults into an engine config.
fn resolve_config(args: &RunArgs, spec: &SpecFile, seed: u64) -> Result<EvolutionConfig> {
    let defaults = EvolutionConfig::default();
    let run = &spec.run;

    let function_set = match args.function_set {
        Some(FunctionSetArg::Standard) => FunctionSet::standard(),
        Some(FunctionSetArg::Extended) => FunctionSet::with_min_max(),
        None => match run.function_set.as_deref() {
            Some("extended") => FunctionSet::with_min_max(),
            Some("standard") | None => FunctionSet::standard(),
            Some(other) => {
                return Err(Error::ConfigError(format!(
                    "unknown function_set {other:?}"
                )))
            }
        },
    };

    let strategy = match args.eval_strategy {
        Some(s) => s.to_core(),
        None => parse_enum(
            "eval_strategy",
            run.eval_strategy.as_deref(),
            &[
                ("auto", tgp_core::eval::EvalStrategy::Auto),
                ("hybrid", tgp_core::eval::EvalStrategy::Hybrid),
                ("data", tgp_core::eval::EvalStrategy::DataParallel),
            ],
        )?
        .unwrap_or(defaults.strategy),
    };

    let gen_spec = &spec.generation;
    let gen_defaults = GenerationConfig::default();
    let generation = GenerationConfig {
        method: parse_enum(
            "generation method",
            gen_spec.method.as_deref(),
            &[
                ("grow", GenMethod::Grow),
                ("full", GenMethod::Full),
                ("ramped_half_and_half", GenMethod::RampedHalfAndHalf),
            ],
        )?
        .unwrap_or(gen_defaults.method),
        depth_min: gen_spec.depth_min.unwrap_or(gen_defaults.depth_min),
        depth_max: gen_spec.depth_max.unwrap_or(gen_defaults.depth_max),
        p_leaf: gen_spec.p_leaf.unwrap_or(gen_defaults.p_leaf),
        p_const: gen_spec.p_const.unwrap_or(gen_defaults.p_const),
        p_modi: gen_spec.p_modi.unwrap_or(gen_defaults.p_modi),
    };

    let var_spec = &spec.variation;
    let var_defaults = VariationConfig::default();
    let mut weights = MutationWeights::default();
    if let Some(w) = &var_spec.weights {
        weights = MutationWeights {
            subtree: w.subtree.unwrap_or(weights.subtree),
            hoist: w.hoist.unwrap_or(weights.hoist),
            single_point: w.single_point.unwrap_or(weights.single_point),
            multi_point: w.multi_point.unwrap_or(weights.multi_point),
            insert: w.insert.unwrap_or(weights.insert),
            delete: w.delete.unwrap_or(weights.delete),
            single_const: w.single_const.unwrap_or(weights.single_const),
            multi_const: w.multi_const.unwrap_or(weights.multi_const),
        };
    }
    let variation = VariationConfig {
        p_crossover: args
            .p_cross
            .or(run.p_crossover)
            .unwrap_or(var_defaults.p_crossover),
        p_mutation: args
            .p_mut
            .or(run.p_mutation)
            .unwrap_or(var_defaults.p_mutation),
        crossover_kind: parse_enum(
            "crossover_kind",
            var_spec.crossover_kind.as_deref(),
            &[
                ("one_point", CrossoverKind::OnePoint),
                ("leaf_biased", CrossoverKind::LeafBiased),
            ],
        )?
        .unwrap_or(var_defaults.crossover_kind),
        leaf_bias: var_spec.leaf_bias.unwrap_or(var_defaults.leaf_bias),
        mutation_weights: weights,
        point_rate: var_spec.point_rate.unwrap_or(var_defaults.point_rate),
        const_sigma: var_spec.const_sigma.unwrap_or(var_defaults.const_sigma),
        tournament_size: args
            .tournament
            .or(run.tournament)
            .unwrap_or(var_defaults.tournament_size),
    };

    let encoding = EncodingConfig {
        max_len: args.max_len.or(run.max_len).unwrap_or(defaults.encoding.max_len),
        // Input/output arity is filled in from the problem later.
        n_inputs: 1,
        n_outputs: 1,
        const_range: (
            run.const_min.unwrap_or(defaults.encoding.const_range.0),
            run.const_max.unwrap_or(defaults.encoding.const_range.1),
        ),
    };
    encoding.validate()?;

    Ok(EvolutionConfig {
        pop_size: args.pop.or(run.pop).unwrap_or(defaults.pop_size),
        max_generations: args
            .generations
            .or(run.generations)
            .unwrap_or(defaults.max_generations),
        target_fitness: args.target_fitness.or(run.target_fitness),
        elite_count: args.elite.or(run.elite).unwrap_or(defaults.elite_count),
        encoding,
        generation,
        variation,
        function_set,
        strategy,
        chunk_cap: run.chunk_cap.unwrap_or(defaults.chunk_cap),
        threshold_factor: run.threshold_factor.unwrap_or(defaults.threshold_factor),
        seed,
    })
}

fn stats_row(s: &GenerationStats, redact: bool) -> Vec<String> {
    vec![
        s.generation.to_string(),
        format!("{}", s.best),
        format!("{}", s.mean),
        format!("{}", s.median),
        format!("{}", s.mean_size),
        format!("{}", if redact { 0.0 } else { s.seconds }),
        s.strategy.name().to_string(),
    ]
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => load_spec(path)?,
        None => SpecFile::default(),
    };

    let seeds: Vec<u64> = args
        .seeds
        .clone()
        .or_else(|| spec.run.seeds.clone())
        .unwrap_or_else(|| vec![args.seed.or(spec.run.seed).unwrap_or(0)]);

    let out_dir: PathBuf = args
        .out
        .clone()
        .or_else(|| spec.run.out.clone())
        .ok_or_else(|| Error::ConfigError("no output directory: pass --out".into()))?;

    let width = resolve_lanes(args.lanes, spec.run.lanes)?;
    let gpops_formula = args
        .gpops_formula
        .map(GpopsArg::to_core)
        .or(parse_enum(
            "gpops_formula",
            spec.run.gpops_formula.as_deref(),
            &[
                ("literal", GpopsFormula::Literal),
                ("per_case", GpopsFormula::PerCase),
            ],
        )?)
        .unwrap_or(GpopsFormula::PerCase);

    for &seed in &seeds {
        // Dataset first: problem shape decides the encoding arity.
        let data = build_dataset(&args.data, &spec.problem, seed)?;
        let (problem, _holdout) = build_problem(data)?;
        let mut cfg = resolve_config(args, &spec, seed)?;
        cfg.encoding.n_inputs = problem.dataset().n_inputs();
        cfg.encoding.n_outputs = problem.n_outputs();

        let seed_dir = out_dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir)?;

        eprintln!(
            "run seed {seed}: {} points x {} inputs, {} outputs, pop {}, generations {}, lanes {}",
            problem.dataset().n_points(),
            problem.dataset().n_inputs(),
            problem.n_outputs(),
            cfg.pop_size,
            cfg.max_generations,
            width.lanes()
        );

        run_one(cfg, &problem, width, &seed_dir, seed, gpops_formula, args.redact_timing)?;
    }
    Ok(())
}

fn run_one(
    cfg: EvolutionConfig,
    problem: &Problem,
    width: tgp_core::eval::ParallelWidth,
    dir: &Path,
    seed: u64,
    formula: GpopsFormula,
    redact: bool,
) -> Result<()> {
    let stats_path = dir.join("stats.csv");
    let mut stats_writer = csv::Writer::from_path(&stats_path)?;
    stats_writer.write_record([
        "generation",
        "best",
        "mean",
        "median",
        "mean_size",
        "gen_seconds",
        "strategy",
    ])?;

    let mut engine = Engine::new(cfg, problem, width)?;
    let mut written = 0;
    loop {
        while written < engine.stats().len() {
            stats_writer.write_record(stats_row(&engine.stats()[written], redact))?;
            written += 1;
        }
        stats_writer.flush()?;
        if engine.is_done() {
            break;
        }
        engine.step()?;
    }

    let result = engine.result()?;
    checkpoint_save(&engine.checkpoint(), &dir.join("checkpoint.tgp"))?;
    std::fs::write(dir.join("best_expr.txt"), format!("{}\n", result.best_expr))?;

    let d = problem.dataset().n_points() as f64;
    let mean_size =
        result.stats.iter().map(|s| s.mean_size).sum::<f64>() / result.stats.len() as f64;
    let total_seconds = if redact { 0.0 } else { result.total_seconds };
    let gpops = if redact {
        None
    } else {
        gpops_per_second(
            result.generations_run.max(1) as f64,
            engine.config().pop_size as f64,
            mean_size,
            d,
            result.total_seconds,
            formula,
        )
        .ok()
    };

    let summary = serde_json::json!({
        "seed": seed,
        "best_fitness": json_f64(result.best_fitness),
        "best_expr": result.best_expr,
        "generations_run": result.generations_run,
        "total_seconds": total_seconds,
        "gpops_per_second": gpops.map(json_f64).unwrap_or(serde_json::Value::Null),
    });
    let mut f = std::fs::File::create(dir.join("summary.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&summary)?)?;

    eprintln!(
        "run seed {seed}: best {} at generation {} ({} generations, {:.2}s)",
        result.best_fitness, result.best_generation, result.generations_run, result.total_seconds
    );
    Ok(())
}
