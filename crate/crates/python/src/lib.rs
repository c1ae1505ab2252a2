//! Python extension module exposing the engine's main types and
//! operations: dataset construction, evolution runs, and expression
//! evaluation. Heavy work releases the GIL.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::IntoPyObjectExt;

use tgp_core::engine::{evolve, EvolutionConfig};
use tgp_core::error::Error;
use tgp_core::eval::{EvalContext, EvalStrategy, ParallelWidth};
use tgp_core::problems::{generate_pagie, load_csv, CsvSchema, PagieSpec, Problem};
use tgp_core::text::parse_infix;
use tgp_core::tree::{encode_tree, EncodingConfig};
use tgp_core::FunctionSet;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Io(_) => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn flatten(rows: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, usize, usize)> {
    let n = rows.len();
    if n == 0 {
        return Err(PyValueError::new_err("no data rows"));
    }
    let d = rows[0].len();
    let mut flat = Vec::with_capacity(n * d);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(PyValueError::new_err(format!(
                "row {i} has {} columns, expected {d}",
                row.len()
            )));
        }
        flat.extend_from_slice(row);
    }
    Ok((flat, n, d))
}

/// Input/target matrix pair.
#[pyclass(name = "Dataset", module = "tgp", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: tgp_core::eval::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Dataset from row-major inputs and one target value per row.
    #[new]
    fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> PyResult<Self> {
        let (flat, n, d) = flatten(inputs)?;
        if targets.len() != n {
            return Err(PyValueError::new_err(format!(
                "{} targets for {n} rows",
                targets.len()
            )));
        }
        let inner = tgp_core::eval::Dataset::new(flat, targets, n, d, 1).map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    /// The Pagie polynomial benchmark grid.
    #[staticmethod]
    #[pyo3(signature = (lo=-5.0, hi=5.0, step=0.4))]
    fn pagie(lo: f64, hi: f64, step: f64) -> PyResult<Self> {
        let inner = generate_pagie(&PagieSpec { lo, hi, step }).map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    /// Load a numeric CSV; the trailing `target_columns` columns are targets.
    #[staticmethod]
    #[pyo3(signature = (path, target_columns=1, has_header=true))]
    fn from_csv(path: std::path::PathBuf, target_columns: usize, has_header: bool) -> PyResult<Self> {
        let inner = load_csv(
            &path,
            &CsvSchema {
                target_columns,
                has_header,
            },
        )
        .map_err(to_py_err)?;
        Ok(PyDataset { inner })
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.inner.n_points()
    }

    #[getter]
    fn n_inputs(&self) -> usize {
        self.inner.n_inputs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} points x {} inputs, {} targets)",
            self.inner.n_points(),
            self.inner.n_inputs(),
            self.inner.n_targets()
        )
    }
}

/// Evolution settings; unset arguments keep the engine defaults.
#[pyclass(name = "Config", module = "tgp", skip_from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: EvolutionConfig,
    lanes: Option<usize>,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        pop_size=1000, generations=100, max_len=512, tournament_size=20,
        p_crossover=0.9, p_mutation=0.1, elite_count=1, seed=0,
        strategy="auto", function_set="standard",
        depth_min=2, depth_max=6, p_modi=0.3,
        target_fitness=None, lanes=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        pop_size: usize,
        generations: usize,
        max_len: usize,
        tournament_size: usize,
        p_crossover: f64,
        p_mutation: f64,
        elite_count: usize,
        seed: u64,
        strategy: &str,
        function_set: &str,
        depth_min: usize,
        depth_max: usize,
        p_modi: f64,
        target_fitness: Option<f64>,
        lanes: Option<usize>,
    ) -> PyResult<Self> {
        let mut cfg = EvolutionConfig::default();
        cfg.pop_size = pop_size;
        cfg.max_generations = generations;
        cfg.encoding.max_len = max_len;
        cfg.variation.tournament_size = tournament_size;
        cfg.variation.p_crossover = p_crossover;
        cfg.variation.p_mutation = p_mutation;
        cfg.elite_count = elite_count;
        cfg.seed = seed;
        cfg.generation.depth_min = depth_min;
        cfg.generation.depth_max = depth_max;
        cfg.generation.p_modi = p_modi;
        cfg.target_fitness = target_fitness;
        cfg.strategy = match strategy {
            "auto" => EvalStrategy::Auto,
            "hybrid" => EvalStrategy::Hybrid,
            "data" => EvalStrategy::DataParallel,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown strategy {other:?} (auto, hybrid, data)"
                )))
            }
        };
        cfg.function_set = match function_set {
            "standard" => FunctionSet::standard(),
            "extended" => FunctionSet::with_min_max(),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown function_set {other:?} (standard, extended)"
                )))
            }
        };
        Ok(PyConfig { inner: cfg, lanes })
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(pop_size={}, generations={}, seed={})",
            self.inner.pop_size, self.inner.max_generations, self.inner.seed
        )
    }
}

/// Outcome of one evolution run.
#[pyclass(name = "RunResult", module = "tgp")]
pub struct PyRunResult {
    #[pyo3(get)]
    best_expr: String,
    #[pyo3(get)]
    best_fitness: f64,
    #[pyo3(get)]
    best_generation: usize,
    #[pyo3(get)]
    generations_run: usize,
    #[pyo3(get)]
    total_seconds: f64,
    #[pyo3(get)]
    node_evaluations: u64,
    #[pyo3(get)]
    best_per_generation: Vec<f64>,
    #[pyo3(get)]
    mean_size_per_generation: Vec<f64>,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(best_fitness={}, generations_run={})",
            self.best_fitness, self.generations_run
        )
    }
}

fn run_problem(py: Python<'_>, problem: Problem, config: &PyConfig) -> PyResult<PyRunResult> {
    let mut cfg = config.inner.clone();
    cfg.encoding.n_inputs = problem.dataset().n_inputs();
    cfg.encoding.n_outputs = problem.n_outputs();
    let width = match config.lanes {
        Some(n) => ParallelWidth::fixed(n).map_err(to_py_err)?,
        None => ParallelWidth::detect(),
    };
    let result = py
        .detach(|| evolve(cfg, &problem, width))
        .map_err(to_py_err)?;
    Ok(PyRunResult {
        best_expr: result.best_expr,
        best_fitness: result.best_fitness,
        best_generation: result.best_generation,
        generations_run: result.generations_run,
        total_seconds: result.total_seconds,
        node_evaluations: result.node_evaluations,
        best_per_generation: result.stats.iter().map(|s| s.best).collect(),
        mean_size_per_generation: result.stats.iter().map(|s| s.mean_size).collect(),
    })
}

/// Symbolic regression: minimize mean squared error against the targets.
#[pyfunction]
fn run_regression(py: Python<'_>, dataset: &PyDataset, config: &PyConfig) -> PyResult<PyRunResult> {
    let problem = Problem::regression(dataset.inner.clone()).map_err(to_py_err)?;
    run_problem(py, problem, config)
}

/// Classification: targets are integer class labels; fitness is negated
/// argmax accuracy, so -1.0 is a perfect score.
#[pyfunction]
fn run_classification(
    py: Python<'_>,
    dataset: &PyDataset,
    config: &PyConfig,
) -> PyResult<PyRunResult> {
    let problem = Problem::classification(dataset.inner.clone()).map_err(to_py_err)?;
    run_problem(py, problem, config)
}

/// Evaluate an expression over row-major inputs. Returns one value per row
/// for `n_outputs=1`, otherwise one list per row.
#[pyfunction]
#[pyo3(signature = (expr, inputs, n_outputs=1))]
fn eval_expr(
    py: Python<'_>,
    expr: &str,
    inputs: Vec<Vec<f64>>,
    n_outputs: usize,
) -> PyResult<Py<PyAny>> {
    let fs = FunctionSet::with_min_max();
    let (flat, n, d) = flatten(inputs)?;
    let parsed = parse_infix(expr, &fs).map_err(to_py_err)?;
    let enc = EncodingConfig {
        max_len: parsed.node_count().max(1),
        n_inputs: d,
        n_outputs,
        const_range: (f64::MIN, f64::MAX),
    };
    let tree = encode_tree(&parsed, &enc, &fs).map_err(to_py_err)?;
    let ds = tgp_core::eval::Dataset::new(flat, vec![0.0; n], n, d, 1).map_err(to_py_err)?;
    let ctx = EvalContext::new(ParallelWidth::detect()).map_err(to_py_err)?;
    let out = py
        .detach(|| tgp_core::eval::eval_tree_batch(tree.as_slice(), &ds, &fs, n_outputs, &ctx))
        .map_err(to_py_err)?;
    if n_outputs == 1 {
        out.into_py_any(py)
    } else {
        let rows: Vec<Vec<f64>> = out.chunks(n_outputs).map(|c| c.to_vec()).collect();
        rows.into_py_any(py)
    }
}

#[pymodule]
fn tgp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run_regression, m)?)?;
    m.add_function(wrap_pyfunction!(run_classification, m)?)?;
    m.add_function(wrap_pyfunction!(eval_expr, m)?)?;
    Ok(())
}
