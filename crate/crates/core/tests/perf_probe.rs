//! Manual throughput probe (ignored by default):
//! `cargo test -p tgp-core --test perf_probe -- --ignored --nocapture`

use std::time::Instant;

use tgp_core::eval::{eval_population, Dataset, EvalContext, EvalStrategy, ParallelWidth};
use tgp_core::generate::{generate_population, GenMethod, GenerationConfig};
use tgp_core::rng::{RngKey, RngStream};
use tgp_core::tree::EncodingConfig;
use tgp_core::FunctionSet;

#[test]
#[ignore]
fn node_eval_throughput() {
    let fs = FunctionSet::standard();
    let cfg = EncodingConfig::new(512, 5, 1);
    let gen = GenerationConfig {
        method: GenMethod::Full,
        depth_min: 7,
        depth_max: 7,
        ..Default::default()
    };
    let pop = generate_population(2000, &cfg, &gen, &fs, &RngKey::new(1)).unwrap();
    let n = 1030;
    let mut rng = RngStream::from_seed(2);
    let inputs: Vec<f64> = (0..n * 5).map(|_| rng.range_f64(-3.0, 3.0)).collect();
    let ds = Dataset::new(inputs, vec![0.0; n], n, 5, 1).unwrap();
    let total_nodes: usize = pop.lengths().sum();
    let node_evals = (total_nodes * n) as f64;

    for lanes in [1usize, 2] {
        let ctx = EvalContext::new(ParallelWidth::fixed(lanes).unwrap()).unwrap();
        for strategy in [EvalStrategy::Hybrid, EvalStrategy::DataParallel] {
            let start = Instant::now();
            let buf = eval_population(&pop, &ds, &fs, strategy, 1, &ctx).unwrap();
            let secs = start.elapsed().as_secs_f64();
            println!(
                "lanes {lanes} {strategy:?}: {:.1}M node-evals/s ({secs:.3}s, checksum {:.3})",
                node_evals / secs / 1e6,
                buf.data().iter().filter(|v| v.is_finite()).sum::<f64>()
            );
        }
    }
}
