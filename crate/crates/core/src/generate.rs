//! Random tree and population generation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcs::FunctionSet;
use crate::rng::{RngKey, RngStream};
use crate::tree::{EncodingConfig, NodeKind, PopulationStore, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMethod {
    Grow,
    Full,
    RampedHalfAndHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub method: GenMethod,
    pub depth_min: usize,
    pub depth_max: usize,
    /// Probability a grow-node below the root becomes a leaf early.
    pub p_leaf: f64,
    /// Probability a leaf is a constant rather than a variable.
    pub p_const: f64,
    /// Probability an internal node is a modi node (multi-output runs only).
    pub p_modi: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            method: GenMethod::RampedHalfAndHalf,
            depth_min: 2,
            depth_max: 6,
            p_leaf: 0.1,
            p_const: 0.5,
            p_modi: 0.3,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self, enc: &EncodingConfig) -> Result<()> {
        if self.depth_min < 1 || self.depth_min > self.depth_max {
            return Err(Error::ConfigError(format!(
                "depth bounds [{}, {}] are invalid",
                self.depth_min, self.depth_max
            )));
        }
        if self.depth_max > 63 {
            return Err(Error::ConfigError("depth_max above 63".into()));
        }
        let worst = (1u64 << self.depth_max) - 1;
        if worst > enc.max_len as u64 {
            return Err(Error::ConfigError(format!(
                "depth_max {} implies up to {worst} nodes, exceeding max_len {}",
                self.depth_max, enc.max_len
            )));
        }
        for (name, p) in [
            ("p_leaf", self.p_leaf),
            ("p_const", self.p_const),
            ("p_modi", self.p_modi),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ConfigError(format!("{name} = {p} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Unpadded prefix arrays under construction.
pub(crate) struct PrefixBuf {
    pub types: Vec<u8>,
    pub values: Vec<f64>,
    pub sizes: Vec<u32>,
}

impl PrefixBuf {
    fn new() -> Self {
        PrefixBuf {
            types: Vec::new(),
            values: Vec::new(),
            sizes: Vec::new(),
        }
    }
}

/// Grow or full construction to an exact depth budget. Depth is counted in
/// nodes: a single leaf has depth 1.
fn gen_node(
    buf: &mut PrefixBuf,
    enc: &EncodingConfig,
    gen: &GenerationConfig,
    fs: &FunctionSet,
    rng: &mut RngStream,
    dep: usize,
    target: usize,
    full: bool,
) -> u32 {
    let leaf = if dep == target {
        true
    } else if full || dep == 1 {
        false
    } else {
        rng.coin(gen.p_leaf)
    };

    if leaf {
        if rng.coin(gen.p_const) {
            buf.types.push(NodeKind::Const as u8);
            buf.values
                .push(rng.range_f64(enc.const_range.0, enc.const_range.1));
        } else {
            buf.types.push(NodeKind::Var as u8);
            buf.values.push(rng.below(enc.n_inputs) as f64);
        }
        buf.sizes.push(1);
        return 1;
    }

    let at = buf.types.len();
    let arity;
    if enc.n_outputs > 1 && rng.coin(gen.p_modi) {
        buf.types.push(NodeKind::Modi as u8);
        buf.values.push(rng.below(enc.n_outputs) as f64);
        arity = 2;
    } else {
        let id = rng.below(fs.len());
        let kind = if fs.arity(id) == Some(1) {
            NodeKind::Unary
        } else {
            NodeKind::Binary
        };
        buf.types.push(kind as u8);
        buf.values.push(id as f64);
        arity = kind.arity();
    }
    buf.sizes.push(0);
    let mut size = 1u32;
    for _ in 0..arity {
        size += gen_node(buf, enc, gen, fs, rng, dep + 1, target, full);
    }
    buf.sizes[at] = size;
    size
}

pub(crate) fn gen_prefix(
    enc: &EncodingConfig,
    gen: &GenerationConfig,
    fs: &FunctionSet,
    rng: &mut RngStream,
    target: usize,
    full: bool,
) -> PrefixBuf {
    let mut buf = PrefixBuf::new();
    gen_node(&mut buf, enc, gen, fs, rng, 1, target, full);
    buf
}

fn draw_depth(gen: &GenerationConfig, rng: &mut RngStream) -> usize {
    gen.depth_min + rng.below(gen.depth_max - gen.depth_min + 1)
}

/// One random tree. For `Grow`/`Full` the target depth is drawn uniformly
/// from `[depth_min, depth_max]`; ramped half-and-half additionally tosses
/// the grow/full coin.
pub fn generate_tree(
    enc: &EncodingConfig,
    gen: &GenerationConfig,
    fs: &FunctionSet,
    rng: &mut RngStream,
) -> Result<Tree> {
    enc.validate()?;
    gen.validate(enc)?;
    let (target, full) = match gen.method {
        GenMethod::Grow => (draw_depth(gen, rng), false),
        GenMethod::Full => (draw_depth(gen, rng), true),
        GenMethod::RampedHalfAndHalf => (draw_depth(gen, rng), rng.coin(0.5)),
    };
    let buf = gen_prefix(enc, gen, fs, rng, target, full);
    Tree::from_parts(&buf.types, &buf.values, &buf.sizes, enc.max_len)
}

/// A fresh population of `n` trees; row `i` is generated from the stream
/// `(generation 0, slot i)`. Ramped half-and-half cycles the
/// `(depth, grow|full)` buckets evenly across slots.
pub fn generate_population(
    n: usize,
    enc: &EncodingConfig,
    gen: &GenerationConfig,
    fs: &FunctionSet,
    key: &RngKey,
) -> Result<PopulationStore> {
    if n == 0 {
        return Err(Error::EmptyPopulation);
    }
    enc.validate()?;
    gen.validate(enc)?;
    let mut store = PopulationStore::empty(n, enc.max_len);
    let span = gen.depth_max - gen.depth_min + 1;
    for i in 0..n {
        let mut rng = key.stream(0, i as u64);
        let (target, full) = match gen.method {
            GenMethod::Grow => (draw_depth(gen, &mut rng), false),
            GenMethod::Full => (draw_depth(gen, &mut rng), true),
            GenMethod::RampedHalfAndHalf => {
                let bucket = i % (2 * span);
                (gen.depth_min + bucket / 2, bucket % 2 == 1)
            }
        };
        let buf = gen_prefix(enc, gen, fs, &mut rng, target, full);
        let tree = Tree::from_parts(&buf.types, &buf.values, &buf.sizes, enc.max_len)?;
        store.set_row(i, tree.as_slice());
    }
    Ok(store)
}

/// Largest depth whose worst-case full binary tree fits in `capacity` nodes.
pub(crate) fn depth_for_capacity(capacity: usize) -> usize {
    let mut d = 1;
    while d < 63 && (1u64 << (d + 1)) - 1 <= capacity as u64 {
        d += 1;
    }
    d
}

/// Random replacement subtree for structural mutation: grow construction
/// with the depth budget clamped so the result always fits `capacity`.
pub(crate) fn random_subtree(
    enc: &EncodingConfig,
    gen: &GenerationConfig,
    fs: &FunctionSet,
    rng: &mut RngStream,
    capacity: usize,
) -> PrefixBuf {
    let cap_depth = depth_for_capacity(capacity.max(1));
    let d_max = gen.depth_max.min(cap_depth);
    let d_min = gen.depth_min.min(d_max);
    let target = d_min + rng.below(d_max - d_min + 1);
    gen_prefix(enc, gen, fs, rng, target, false)
}
