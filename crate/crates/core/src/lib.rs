//! Tree-based genetic programming on flat, fixed-shape arrays.
//!
//! Every individual is stored as three padded arrays (node kinds, node
//! values, subtree sizes) laid out in prefix order, and a whole population
//! is three `P x max_len` matrices. All genetic operators reduce to a
//! single subtree-exchange splice on those arrays, and fitness evaluation
//! runs a stack interpreter over the prefix encoding, parallelized either
//! across (individual, data-chunk) pairs or across data points per
//! individual, chosen adaptively from the dataset size.

pub mod checkpoint;
pub mod engine;
pub mod error;
pub mod eval;
pub mod funcs;
pub mod generate;
pub mod problems;
pub mod reference;
pub mod rng;
pub mod text;
pub mod tree;
pub mod variation;

pub use error::{Error, Result};
pub use funcs::{FunctionSet, ScalarOp};
pub use tree::{EncodingConfig, NodeKind, PopulationStore, RefTree, Tree, TreeSlice};
