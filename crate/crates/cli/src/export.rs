//! `tgp export`: per-individual expression text of a checkpoint as JSON.

use std::io::Write;

use tgp_core::checkpoint::checkpoint_load;
use tgp_core::error::Result;
use tgp_core::text::to_infix_string;

use crate::args::ExportArgs;

pub fn cmd_export(args: &ExportArgs) -> Result<()> {
    let state = checkpoint_load(&args.checkpoint)?;
    let fs = &state.config.function_set;
    let mut items = Vec::with_capacity(state.population.pop_size());
    for i in 0..state.population.pop_size() {
        let row = state.population.row(i);
        items.push(serde_json::json!({
            "index": i,
            "size": row.len(),
            "expr": to_infix_string(row, fs)?,
        }));
    }
    let doc = serde_json::json!({
        "generations_evaluated": state.stats.len(),
        "individuals": items,
    });
    let text = serde_json::to_string_pretty(&doc)?;
    match &args.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "{text}")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}
