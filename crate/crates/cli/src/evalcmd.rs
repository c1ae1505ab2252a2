//! `tgp eval`: fitness of stored or textual individuals on a dataset.

use tgp_core::checkpoint::checkpoint_load;
use tgp_core::error::{Error, Result};
use tgp_core::eval::{eval_population, EvalContext, EvalStrategy};
use tgp_core::text::{parse_infix, to_infix_string};
use tgp_core::tree::{encode_tree, EncodingConfig, PopulationStore};
use tgp_core::FunctionSet;

use crate::args::EvalArgs;
use crate::common::{build_dataset, build_problem, resolve_lanes};

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let data = build_dataset(&args.data, &Default::default(), 0)?;
    let (problem, _) = build_problem(data)?;
    let width = resolve_lanes(args.lanes, None)?;
    let ctx = EvalContext::new(width)?;

    let sources = [&args.checkpoint.is_some(), &args.expr.is_some(), &args.expr_file.is_some()];
    if sources.iter().filter(|&&&s| s).count() != 1 {
        return Err(Error::ConfigError(
            "pass exactly one of --checkpoint, --expr, --expr-file".into(),
        ));
    }

    let (store, fs, labels): (PopulationStore, FunctionSet, Vec<String>) =
        if let Some(path) = &args.checkpoint {
            let state = checkpoint_load(path)?;
            let fs = state.config.function_set.clone();
            if args.all {
                let n = state.population.pop_size();
                let labels = (0..n).map(|i| format!("row {i}")).collect();
                (state.population, fs, labels)
            } else {
                let best = state.best.as_ref().ok_or_else(|| {
                    Error::InvalidEncoding("checkpoint holds no best individual".into())
                })?;
                let mut store = PopulationStore::empty(1, state.population.max_len());
                store.set_row(0, best.tree.as_slice());
                (store, fs, vec!["best".into()])
            }
        } else {
            let text = match &args.expr {
                Some(text) => text.clone(),
                None => std::fs::read_to_string(args.expr_file.as_ref().unwrap())?,
            };
            // Extended set: parsing accepts every known function name.
            let fs = FunctionSet::with_min_max();
            let parsed = parse_infix(text.trim(), &fs)?;
            let enc = EncodingConfig {
                max_len: 512,
                n_inputs: problem.dataset().n_inputs(),
                n_outputs: problem.n_outputs(),
                const_range: (f64::MIN, f64::MAX),
            };
            let tree = encode_tree(&parsed, &enc, &fs)?;
            let mut store = PopulationStore::empty(1, enc.max_len);
            store.set_row(0, tree.as_slice());
            (store, fs, vec!["expr".into()])
        };

    let buffer = eval_population(
        &store,
        problem.dataset(),
        &fs,
        EvalStrategy::Auto,
        problem.n_outputs(),
        &ctx,
    )?;
    for (i, label) in labels.iter().enumerate() {
        let fitness = problem.fitness_of_row(buffer.row(i))?;
        if args.infix {
            let expr = to_infix_string(store.row(i), &fs)?;
            println!("{label}\t{fitness}\t{expr}");
        } else {
            println!("{label}\t{fitness}");
        }
    }
    Ok(())
}
