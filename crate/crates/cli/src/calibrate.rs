//! `tgp calibrate`: time hybrid, data-parallel, and auto evaluation over a
//! sweep of dataset sizes at fixed population, report the empirical
//! crossover point, and suggest a threshold factor for auto mode.

use std::io::Write;
use std::time::Instant;

use tgp_core::error::{Error, Result};
use tgp_core::eval::{eval_population, Dataset, EvalContext, EvalStrategy};
use tgp_core::generate::{generate_population, GenerationConfig};
use tgp_core::problems::pagie_value;
use tgp_core::rng::{RngKey, RngStream};
use tgp_core::tree::EncodingConfig;
use tgp_core::FunctionSet;

use crate::args::CalibrateArgs;
use crate::common::resolve_lanes;

/// One timed sweep point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub d_points: usize,
    pub strategy: &'static str,
    pub seconds: f64,
}

pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub lanes: usize,
    /// Smallest swept size where data-parallel beat hybrid.
    pub crossover_d: Option<usize>,
    pub suggested_threshold_factor: Option<f64>,
}

/// Random-point regression dataset with the benchmark polynomial as target.
fn sweep_dataset(d_points: usize, seed: u64) -> Result<Dataset> {
    let mut rng = RngStream::from_seed(seed ^ 0xDA7A);
    let mut inputs = Vec::with_capacity(d_points * 2);
    let mut targets = Vec::with_capacity(d_points);
    for _ in 0..d_points {
        let x = rng.range_f64(-5.0, 5.0);
        let y = rng.range_f64(-5.0, 5.0);
        inputs.push(x);
        inputs.push(y);
        targets.push(pagie_value(x, y));
    }
    Dataset::new(inputs, targets, d_points, 2, 1)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs[xs.len() / 2]
}

pub fn run_sweep(args: &CalibrateArgs) -> Result<SweepReport> {
    if args.d_values.is_empty() || args.d_values.iter().any(|&d| d == 0) {
        return Err(Error::ConfigError("d_values must be positive".into()));
    }
    if args.reps == 0 {
        return Err(Error::ConfigError("reps must be at least 1".into()));
    }
    let width = resolve_lanes(args.lanes, None)?;
    let lanes = width.lanes();
    let ctx = EvalContext::new(width)?;

    let fs = FunctionSet::standard();
    let enc = EncodingConfig::new(512, 2, 1);
    let gen = GenerationConfig::default();
    let pop = generate_population(args.pop, &enc, &gen, &fs, &RngKey::new(args.seed))?;

    let strategies: [(&'static str, EvalStrategy); 3] = [
        ("hybrid", EvalStrategy::Hybrid),
        ("data", EvalStrategy::DataParallel),
        ("auto", EvalStrategy::Auto),
    ];

    let mut d_values = args.d_values.clone();
    d_values.sort_unstable();
    let mut rows = Vec::new();
    for &d in &d_values {
        let ds = sweep_dataset(d, args.seed)?;
        // Warm-up pass so allocation and paging effects hit no strategy
        // harder than another.
        eval_population(&pop, &ds, &fs, EvalStrategy::Hybrid, 1, &ctx)?;
        for (name, strategy) in strategies {
            let mut times = Vec::with_capacity(args.reps);
            for _ in 0..args.reps {
                let start = Instant::now();
                let buf = eval_population(&pop, &ds, &fs, strategy, 1, &ctx)?;
                times.push(start.elapsed().as_secs_f64());
                drop(buf);
            }
            rows.push(SweepRow {
                d_points: d,
                strategy: name,
                seconds: median(times),
            });
        }
    }

    let time_of = |d: usize, name: &str| {
        rows.iter()
            .find(|r| r.d_points == d && r.strategy == name)
            .map(|r| r.seconds)
            .unwrap()
    };
    let crossover_d = d_values
        .iter()
        .copied()
        .find(|&d| time_of(d, "data") < time_of(d, "hybrid"));
    let suggested_threshold_factor = crossover_d.map(|d| d as f64 / lanes as f64);

    Ok(SweepReport {
        rows,
        lanes,
        crossover_d,
        suggested_threshold_factor,
    })
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let report = run_sweep(args)?;

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::fs::File::create(path)?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "d_points,strategy,seconds")?;
    for row in &report.rows {
        writeln!(out, "{},{},{}", row.d_points, row.strategy, row.seconds)?;
    }
    out.flush()?;

    match report.crossover_d {
        Some(d) => eprintln!(
            "crossover: data-parallel overtakes hybrid at D = {d} with {} lanes; \
             suggested threshold_factor = {:.2}",
            report.lanes,
            report.suggested_threshold_factor.unwrap()
        ),
        None => eprintln!(
            "crossover: hybrid stayed ahead across the sweep with {} lanes; \
             keep auto mode on data-parallel only for larger datasets",
            report.lanes
        ),
    }
    Ok(())
}
