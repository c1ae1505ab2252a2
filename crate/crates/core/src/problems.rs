//! Problem definitions: symbolic regression under MSE, classification
//! under argmax accuracy, the Pagie polynomial grid, and CSV ingestion.
//!
//! Fitness is minimized everywhere; accuracy-style scores are negated at
//! this boundary so the engine only ever compares one way.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Dataset, OutputBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean squared error against a single target column, minimized.
    MseMin,
    /// Classification accuracy via argmax over the outputs, maximized
    /// (stored negated).
    AccuracyMax,
}

/// A dataset plus the objective evaluated on it. `n_outputs` is the tree
/// output dimension: 1 for regression, the class count for classification.
#[derive(Debug, Clone)]
pub struct Problem {
    dataset: Dataset,
    objective: Objective,
    n_outputs: usize,
}

impl Problem {
    pub fn regression(dataset: Dataset) -> Result<Self> {
        if dataset.n_targets() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "regression expects one target column, got {}",
                dataset.n_targets()
            )));
        }
        Ok(Problem {
            dataset,
            objective: Objective::MseMin,
            n_outputs: 1,
        })
    }

    /// Classification against an integer label column. The class count is
    /// taken from the labels; every label must be a member of
    /// `{0, 1, ..., classes-1}`.
    pub fn classification(dataset: Dataset) -> Result<Self> {
        if dataset.n_targets() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "classification expects one label column, got {}",
                dataset.n_targets()
            )));
        }
        let mut classes = 0usize;
        for n in 0..dataset.n_points() {
            let raw = dataset.target_row(n)[0];
            let label = crate::tree::integral(raw).ok_or(Error::LabelOutOfRange {
                label: raw,
                classes: 0,
            })?;
            classes = classes.max(label + 1);
        }
        if classes < 2 {
            return Err(Error::ConfigError(
                "classification needs at least two classes".into(),
            ));
        }
        Ok(Problem {
            dataset,
            objective: Objective::AccuracyMax,
            n_outputs: classes,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Fitness of one prediction row (`n_points x n_outputs`, row-major).
    pub fn fitness_of_row(&self, predictions: &[f64]) -> Result<f64> {
        match self.objective {
            Objective::MseMin => fitness_sr(predictions, self.dataset.targets()),
            Objective::AccuracyMax => {
                fitness_classification(predictions, self.dataset.targets(), self.n_outputs)
            }
        }
    }

    /// Fitness of every individual in an evaluated buffer.
    pub fn fitness_of(&self, buffer: &OutputBuffer) -> Result<Vec<f64>> {
        if buffer.n_points() != self.dataset.n_points() || buffer.n_outputs() != self.n_outputs {
            return Err(Error::ShapeMismatch(format!(
                "buffer is {}x{}, problem needs {}x{}",
                buffer.n_points(),
                buffer.n_outputs(),
                self.dataset.n_points(),
                self.n_outputs
            )));
        }
        (0..buffer.pop_size())
            .map(|i| self.fitness_of_row(buffer.row(i)))
            .collect()
    }
}

/// Mean squared error, summed in index order; any non-finite prediction
/// sends the fitness to +inf.
pub fn fitness_sr(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let mut sum = 0.0;
    for (p, t) in predictions.iter().zip(targets) {
        if !p.is_finite() {
            return Ok(f64::INFINITY);
        }
        let r = p - t;
        sum += r * r;
    }
    Ok(sum / predictions.len() as f64)
}

/// Negated classification accuracy. Predicted class is the argmax over the
/// `classes` outputs of a row; NaN outputs rank lowest and ties go to the
/// lowest class index.
pub fn fitness_classification(
    predictions: &[f64],
    labels: &[f64],
    classes: usize,
) -> Result<f64> {
    let n = labels.len();
    if predictions.len() != n * classes {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {n} labels x {classes} classes",
            predictions.len()
        )));
    }
    let mut hits = 0usize;
    for (row, raw) in labels.iter().enumerate() {
        let label = crate::tree::integral(*raw).filter(|&l| l < classes).ok_or(
            Error::LabelOutOfRange {
                label: *raw,
                classes,
            },
        )?;
        let outputs = &predictions[row * classes..(row + 1) * classes];
        let mut best = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for (k, &v) in outputs.iter().enumerate() {
            if v > best_v {
                best_v = v;
                best = k;
            }
        }
        if best == label {
            hits += 1;
        }
    }
    Ok(-(hits as f64 / n as f64))
}

/// Grid specification for the Pagie polynomial benchmark
/// `f(x, y) = 1/(1 + x^-4) + 1/(1 + y^-4)` over `[lo, hi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PagieSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for PagieSpec {
    fn default() -> Self {
        PagieSpec {
            lo: -5.0,
            hi: 5.0,
            step: 0.4,
        }
    }
}

pub fn pagie_value(x: f64, y: f64) -> f64 {
    1.0 / (1.0 + x.powi(-4)) + 1.0 / (1.0 + y.powi(-4))
}

/// Cartesian grid dataset for the Pagie polynomial: inputs (x, y), one
/// target column.
pub fn generate_pagie(spec: &PagieSpec) -> Result<Dataset> {
    if !(spec.lo.is_finite() && spec.hi.is_finite() && spec.lo < spec.hi) {
        return Err(Error::BadGrid(format!(
            "range [{}, {}] is not an interval",
            spec.lo, spec.hi
        )));
    }
    if !(spec.step.is_finite() && spec.step > 0.0) {
        return Err(Error::BadGrid(format!("step {} must be positive", spec.step)));
    }
    let span = (spec.hi - spec.lo) / spec.step;
    let steps = span.round();
    if (span - steps).abs() > 1e-9 {
        return Err(Error::BadGrid(format!(
            "step {} does not divide [{}, {}] evenly",
            spec.step, spec.lo, spec.hi
        )));
    }
    let per_axis = steps as usize + 1;
    let axis: Vec<f64> = (0..per_axis).map(|i| spec.lo + i as f64 * spec.step).collect();
    if axis.iter().any(|&v| v.abs() < 1e-12) {
        return Err(Error::PoleOnGrid { axis: "x" });
    }
    let n = per_axis * per_axis;
    let mut inputs = Vec::with_capacity(n * 2);
    let mut targets = Vec::with_capacity(n);
    for &x in &axis {
        for &y in &axis {
            inputs.push(x);
            inputs.push(y);
            targets.push(pagie_value(x, y));
        }
    }
    Dataset::new(inputs, targets, n, 2, 1)
        .map(|d| d.with_feature_names(vec!["x".into(), "y".into()]))
}

/// CSV ingestion schema: how many trailing columns are targets, and
/// whether the first row is a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub target_columns: usize,
    pub has_header: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            target_columns: 1,
            has_header: true,
        }
    }
}

/// Load a rectangular numeric CSV; the last `target_columns` columns
/// become targets and the rest inputs.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut file = std::fs::File::open(path)?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    load_csv_str(&text, schema)
}

/// Same as [`load_csv`] over in-memory text.
pub fn load_csv_str(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    if schema.target_columns == 0 {
        return Err(Error::ConfigError("target_columns must be at least 1".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let feature_names = if schema.has_header {
        let headers = reader
            .headers()
            .map_err(|e| Error::ConfigError(format!("unreadable header: {e}")))?;
        Some(headers.iter().map(str::to_string).collect::<Vec<String>>())
    } else {
        None
    };

    let mut width = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::ConfigError(format!("csv error: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 1);
        if record.len() == 1 && record.get(0) == Some("") {
            continue; // blank line
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::ShapeError {
                line,
                got: record.len(),
                expected,
            });
        }
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::ParseError {
                line,
                field: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    line,
                    field: field.to_string(),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }

    let width = width.ok_or_else(|| Error::ShapeMismatch("csv has no data rows".into()))?;
    if schema.target_columns >= width {
        return Err(Error::ConfigError(format!(
            "{} target columns but rows only have {width} fields",
            schema.target_columns
        )));
    }
    let d = width - schema.target_columns;
    let n = rows.len();
    let mut inputs = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n * schema.target_columns);
    for row in &rows {
        inputs.extend_from_slice(&row[..d]);
        targets.extend_from_slice(&row[d..]);
    }
    let ds = Dataset::new(inputs, targets, n, d, schema.target_columns)?;
    Ok(match feature_names {
        Some(names) => ds.with_feature_names(names[..d].to_vec()),
        None => ds,
    })
}
