//! The generational loop: initialize, evaluate, select/vary, repeat, with
//! per-generation statistics, early stopping, and a throughput metric.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    eval_population, EvalContext, EvalStrategy, ParallelWidth, ResolvedStrategy,
};
use crate::funcs::FunctionSet;
use crate::generate::{generate_population, GenerationConfig};
use crate::problems::Problem;
use crate::rng::RngKey;
use crate::text::to_infix_string;
use crate::tree::{EncodingConfig, PopulationStore, Tree};
use crate::variation::{reproduce_generation, ReproduceCtx, VariationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolutionConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    /// Stop as soon as an evaluated generation reaches this fitness.
    pub target_fitness: Option<f64>,
    pub elite_count: usize,
    pub encoding: EncodingConfig,
    pub generation: GenerationConfig,
    pub variation: VariationConfig,
    pub function_set: FunctionSet,
    pub strategy: EvalStrategy,
    pub chunk_cap: usize,
    pub threshold_factor: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            pop_size: 1000,
            max_generations: 100,
            target_fitness: None,
            elite_count: 1,
            encoding: EncodingConfig::default(),
            generation: GenerationConfig::default(),
            variation: VariationConfig::default(),
            function_set: FunctionSet::standard(),
            strategy: EvalStrategy::Auto,
            chunk_cap: 1024,
            threshold_factor: 1.0,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate_for(&self, problem: &Problem) -> Result<()> {
        if self.pop_size == 0 {
            return Err(Error::EmptyPopulation);
        }
        self.encoding.validate()?;
        self.generation.validate(&self.encoding)?;
        self.variation.validate(self.pop_size)?;
        if self.elite_count >= self.pop_size {
            return Err(Error::ConfigError(format!(
                "elite_count {} must be below pop_size {}",
                self.elite_count, self.pop_size
            )));
        }
        if self.encoding.n_inputs != problem.dataset().n_inputs() {
            return Err(Error::ConfigMismatch(format!(
                "encoding has {} inputs, dataset has {}",
                self.encoding.n_inputs,
                problem.dataset().n_inputs()
            )));
        }
        if self.encoding.n_outputs != problem.n_outputs() {
            return Err(Error::ConfigMismatch(format!(
                "encoding has {} outputs, problem needs {}",
                self.encoding.n_outputs,
                problem.n_outputs()
            )));
        }
        Ok(())
    }
}

/// Per-generation summary line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub median: f64,
    pub mean_size: f64,
    pub seconds: f64,
    pub strategy: ResolvedStrategy,
}

/// Outcome of a finished (or early-stopped) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub best_tree: Tree,
    pub best_expr: String,
    pub best_fitness: f64,
    pub best_generation: usize,
    pub stats: Vec<GenerationStats>,
    pub generations_run: usize,
    pub total_seconds: f64,
    pub node_evaluations: u64,
}

impl RunResult {
    /// Copy with every wall-time field zeroed, for determinism comparisons.
    pub fn redacted(&self) -> RunResult {
        let mut out = self.clone();
        out.total_seconds = 0.0;
        for s in &mut out.stats {
            s.seconds = 0.0;
        }
        out
    }

    /// Node evaluations per wall-clock second over the whole run.
    pub fn gpops(&self) -> f64 {
        self.node_evaluations as f64 / self.total_seconds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpopsFormula {
    /// `G * P * S / T`, the printed form (node evaluations per second with
    /// the dataset counted as one case).
    Literal,
    /// `G * P * S * D / T`: counts every fitness case, which is the form
    /// consistent with reported throughput tables.
    PerCase,
}

/// Genetic-programming operations per second for a run of `generations`
/// generations, population `pop_size`, mean program size `mean_size`,
/// `data_points` fitness cases, and `seconds` of wall time.
pub fn gpops_per_second(
    generations: f64,
    pop_size: f64,
    mean_size: f64,
    data_points: f64,
    seconds: f64,
    formula: GpopsFormula,
) -> Result<f64> {
    for (name, v) in [
        ("generations", generations),
        ("pop_size", pop_size),
        ("mean_size", mean_size),
        ("data_points", data_points),
        ("seconds", seconds),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonPositiveInput(format!("{name} = {v}")));
        }
    }
    let base = generations * pop_size * mean_size / seconds;
    Ok(match formula {
        GpopsFormula::Literal => base,
        GpopsFormula::PerCase => base * data_points,
    })
}

/// Best individual seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct BestSoFar {
    pub tree: Tree,
    pub fitness: f64,
    pub generation: usize,
}

/// Stepwise evolution driver. Construction generates and evaluates the
/// initial population (generation 0); each [`Engine::step`] reproduces and
/// evaluates one more generation.
pub struct Engine<'p> {
    cfg: EvolutionConfig,
    problem: &'p Problem,
    ctx: EvalContext,
    key: RngKey,
    pop: PopulationStore,
    fitness: Vec<f64>,
    stats: Vec<GenerationStats>,
    best: Option<BestSoFar>,
    node_evaluations: u64,
    total_seconds: f64,
    done: bool,
}

impl<'p> Engine<'p> {
    pub fn new(cfg: EvolutionConfig, problem: &'p Problem, width: ParallelWidth) -> Result<Self> {
        cfg.validate_for(problem)?;
        let ctx = EvalContext::with_params(width, cfg.chunk_cap, cfg.threshold_factor)?;
        let key = RngKey::new(cfg.seed);
        let start = Instant::now();
        let pop = generate_population(
            cfg.pop_size,
            &cfg.encoding,
            &cfg.generation,
            &cfg.function_set,
            &key,
        )?;
        let mut engine = Engine {
            cfg,
            problem,
            ctx,
            key,
            pop,
            fitness: Vec::new(),
            stats: Vec::new(),
            best: None,
            node_evaluations: 0,
            total_seconds: 0.0,
            done: false,
        };
        engine.evaluate_generation(0, start)?;
        Ok(engine)
    }

    /// Rebuild an engine from checkpointed state; the generational loop
    /// continues exactly where it stopped.
    pub fn resume(
        state: crate::checkpoint::CheckpointState,
        problem: &'p Problem,
        width: ParallelWidth,
    ) -> Result<Self> {
        let cfg = state.config;
        cfg.validate_for(problem)?;
        state.population.validate(&cfg.encoding, &cfg.function_set)?;
        if state.population.pop_size() != cfg.pop_size {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint population has {} rows, config says {}",
                state.population.pop_size(),
                cfg.pop_size
            )));
        }
        let ctx = EvalContext::with_params(width, cfg.chunk_cap, cfg.threshold_factor)?;
        let key = RngKey::new(cfg.seed);
        // The stored population is already evaluated; recompute its fitness
        // instead of persisting P floats (cheap relative to one generation).
        let buffer = eval_population(
            &state.population,
            problem.dataset(),
            &cfg.function_set,
            cfg.strategy,
            problem.n_outputs(),
            &ctx,
        )?;
        let fitness = problem.fitness_of(&buffer)?;
        Ok(Engine {
            cfg,
            problem,
            ctx,
            key,
            pop: state.population,
            fitness,
            stats: state.stats,
            best: state.best,
            node_evaluations: state.node_evaluations,
            total_seconds: state.total_seconds,
            done: state.done,
        })
    }

    pub fn checkpoint(&self) -> crate::checkpoint::CheckpointState {
        crate::checkpoint::CheckpointState {
            config: self.cfg.clone(),
            population: self.pop.clone(),
            stats: self.stats.clone(),
            best: self.best.clone(),
            node_evaluations: self.node_evaluations,
            total_seconds: self.total_seconds,
            done: self.done,
        }
    }

    fn evaluate_generation(&mut self, gen_index: usize, started: Instant) -> Result<()> {
        let strategy = self
            .ctx
            .resolve(self.cfg.strategy, self.problem.dataset().n_points());
        let buffer = eval_population(
            &self.pop,
            self.problem.dataset(),
            &self.cfg.function_set,
            self.cfg.strategy,
            self.problem.n_outputs(),
            &self.ctx,
        )?;
        self.fitness = self.problem.fitness_of(&buffer)?;

        let total_nodes: usize = self.pop.lengths().sum();
        self.node_evaluations += (total_nodes * self.problem.dataset().n_points()) as u64;

        let mut sorted = self.fitness.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let best_idx = (0..self.fitness.len())
            .min_by(|&a, &b| {
                self.fitness[a]
                    .partial_cmp(&self.fitness[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            })
            .expect("non-empty population");
        let gen_best = self.fitness[best_idx];
        let mean = self.fitness.iter().sum::<f64>() / self.fitness.len() as f64;
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
        };

        let seconds = started.elapsed().as_secs_f64();
        self.total_seconds += seconds;
        self.stats.push(GenerationStats {
            generation: gen_index,
            best: gen_best,
            mean,
            median,
            mean_size: self.pop.mean_size(),
            seconds,
            strategy,
        });

        let improved = self
            .best
            .as_ref()
            .map_or(true, |b| gen_best < b.fitness);
        if improved {
            self.best = Some(BestSoFar {
                tree: self.pop.row(best_idx).to_tree(),
                fitness: gen_best,
                generation: gen_index,
            });
        }

        if let Some(target) = self.cfg.target_fitness {
            if gen_best <= target {
                self.done = true;
            }
        }
        if gen_index >= self.cfg.max_generations {
            self.done = true;
        }
        Ok(())
    }

    /// Reproduce and evaluate one generation. Returns `false` once the run
    /// is finished (generation budget or early stop).
    pub fn step(&mut self) -> Result<bool> {
        if self.done {
            return Ok(false);
        }
        let start = Instant::now();
        let gen_index = self.stats.len();
        let ctx = ReproduceCtx {
            enc: &self.cfg.encoding,
            gen: &self.cfg.generation,
            var: &self.cfg.variation,
            fs: &self.cfg.function_set,
            key: &self.key,
            generation: gen_index as u64,
            elite_count: self.cfg.elite_count,
        };
        self.pop = reproduce_generation(&self.pop, &self.fitness, &ctx, None)?;
        self.evaluate_generation(gen_index, start)?;
        Ok(!self.done)
    }

    pub fn run(&mut self) -> Result<()> {
        while self.step()? {}
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn stats(&self) -> &[GenerationStats] {
        &self.stats
    }

    pub fn last_stats(&self) -> &GenerationStats {
        self.stats.last().expect("at least generation 0")
    }

    pub fn population(&self) -> &PopulationStore {
        &self.pop
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn best(&self) -> &BestSoFar {
        self.best.as_ref().expect("at least generation 0 evaluated")
    }

    pub fn node_evaluations(&self) -> u64 {
        self.node_evaluations
    }

    pub fn result(&self) -> Result<RunResult> {
        let best = self.best();
        Ok(RunResult {
            best_expr: to_infix_string(best.tree.as_slice(), &self.cfg.function_set)?,
            best_tree: best.tree.clone(),
            best_fitness: best.fitness,
            best_generation: best.generation,
            stats: self.stats.clone(),
            generations_run: self.stats.len().saturating_sub(1),
            total_seconds: self.total_seconds,
            node_evaluations: self.node_evaluations,
        })
    }
}

/// Run a whole configuration to completion.
pub fn evolve(cfg: EvolutionConfig, problem: &Problem, width: ParallelWidth) -> Result<RunResult> {
    let mut engine = Engine::new(cfg, problem, width)?;
    engine.run()?;
    engine.result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{generate_pagie, PagieSpec, Problem};

    fn small_problem() -> Problem {
        let ds = generate_pagie(&PagieSpec {
            lo: -2.0,
            hi: 2.0,
            step: 0.8,
        })
        .unwrap();
        Problem::regression(ds).unwrap()
    }

    fn small_cfg(seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            pop_size: 60,
            max_generations: 10,
            encoding: EncodingConfig {
                max_len: 64,
                n_inputs: 2,
                n_outputs: 1,
                const_range: (-1.0, 1.0),
            },
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let problem = small_problem();
        let mut cfg = small_cfg(1);
        cfg.max_generations = 0;
        let result = evolve(cfg, &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
        assert_eq!(result.stats.len(), 1);
        assert_eq!(result.generations_run, 0);
        assert_eq!(result.best_generation, 0);
    }

    #[test]
    fn trivial_target_stops_after_first_evaluation() {
        let problem = small_problem();
        let mut cfg = small_cfg(2);
        cfg.target_fitness = Some(f64::INFINITY);
        let result = evolve(cfg, &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
        assert_eq!(result.stats.len(), 1);
    }

    #[test]
    fn best_so_far_is_monotone_with_elitism() {
        let problem = small_problem();
        for seed in 0..3 {
            let cfg = small_cfg(seed);
            assert_eq!(cfg.elite_count, 1);
            let result = evolve(cfg, &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
            let mut best_so_far = f64::INFINITY;
            for s in &result.stats {
                assert!(
                    s.best <= best_so_far || (s.best - best_so_far).abs() == 0.0,
                    "seed {seed} gen {}: {} after {}",
                    s.generation,
                    s.best,
                    best_so_far
                );
                best_so_far = best_so_far.min(s.best);
            }
            assert_eq!(result.best_fitness, best_so_far);
            // Spec invariant: with elitism the final best equals the series min.
            let series_min = result.stats.iter().map(|s| s.best).fold(f64::INFINITY, f64::min);
            assert_eq!(result.best_fitness, series_min);
        }
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let problem = small_problem();
        let a = evolve(small_cfg(7), &problem, ParallelWidth::fixed(1).unwrap()).unwrap();
        let b = evolve(small_cfg(7), &problem, ParallelWidth::fixed(3).unwrap()).unwrap();
        assert_eq!(a.redacted(), b.redacted());
    }

    #[test]
    fn gpops_examples() {
        assert_eq!(
            gpops_per_second(1.0, 1.0, 1.0, 1.0, 1.0, GpopsFormula::PerCase).unwrap(),
            1.0
        );
        let per_case =
            gpops_per_second(100.0, 1000.0, 478.05, 60.0, 0.72, GpopsFormula::PerCase).unwrap();
        assert!((3.9e9..4.3e9).contains(&per_case), "{per_case}");
        let literal =
            gpops_per_second(100.0, 1000.0, 478.05, 60.0, 0.72, GpopsFormula::Literal).unwrap();
        assert!((literal - 6.64e7).abs() / 6.64e7 < 0.01, "{literal}");
        assert!(matches!(
            gpops_per_second(0.0, 1.0, 1.0, 1.0, 1.0, GpopsFormula::PerCase),
            Err(Error::NonPositiveInput(_))
        ));
    }

    #[test]
    fn config_mismatch_is_rejected() {
        let problem = small_problem();
        let mut cfg = small_cfg(1);
        cfg.encoding.n_inputs = 5;
        assert!(matches!(
            Engine::new(cfg, &problem, ParallelWidth::fixed(1).unwrap()),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn stats_shapes_hold() {
        let problem = small_problem();
        let result = evolve(small_cfg(4), &problem, ParallelWidth::fixed(2).unwrap()).unwrap();
        assert_eq!(result.stats.len(), 11);
        for s in &result.stats {
            assert!(s.best <= s.mean || s.mean.is_infinite());
            assert!(s.mean_size >= 1.0 && s.mean_size <= 64.0);
        }
        assert!(result.node_evaluations > 0);
    }
}
