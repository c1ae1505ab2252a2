//! Population evaluation.
//!
//! Trees are prefix-encoded, so evaluating one is a stack pass over the
//! nodes from last to first: leaves push, functions pop their operands
//! (first pop is the leftmost child) and push the result, and modi nodes
//! pop two values, add the left one into their output slot, and push the
//! right one back. IEEE semantics throughout; non-finite values flow into
//! the output buffer instead of trapping.
//!
//! Two scheduling strategies cover the whole dataset-size range:
//!
//! * **Hybrid** — one flat pass over every (individual, data-chunk) pair,
//!   reading trees straight out of the population matrices. Cheap to
//!   launch, so it wins when chunks are small and plentiful.
//! * **Data-parallel** — one pass per individual: the tree is first
//!   promoted into a compact pre-decoded program, then the data points are
//!   split across lanes. The promotion amortizes over the dataset, so it
//!   wins when there is a lot of data per tree.
//!
//! Both produce bit-identical buffers for any lane count; `Auto` picks one
//! by comparing the dataset size against `threshold_factor * lanes`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcs::{FunctionSet, ScalarOp};
use crate::rng::RngStream;
use crate::tree::{NodeKind, PopulationStore, TreeSlice};

/// Points processed per vector block in the inner loops.
const BLOCK: usize = 8;

/// Input/target matrix pair driving fitness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    n_points: usize,
    n_inputs: usize,
    n_targets: usize,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        targets: Vec<f64>,
        n_points: usize,
        n_inputs: usize,
        n_targets: usize,
    ) -> Result<Self> {
        if n_points == 0 || n_inputs == 0 || n_targets == 0 {
            return Err(Error::ShapeMismatch(
                "dataset dimensions must all be positive".into(),
            ));
        }
        if inputs.len() != n_points * n_inputs {
            return Err(Error::ShapeMismatch(format!(
                "inputs have {} values, expected {}",
                inputs.len(),
                n_points * n_inputs
            )));
        }
        if targets.len() != n_points * n_targets {
            return Err(Error::ShapeMismatch(format!(
                "targets have {} values, expected {}",
                targets.len(),
                n_points * n_targets
            )));
        }
        if let Some(bad) = inputs.iter().chain(targets.iter()).find(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "dataset contains non-finite value {bad}"
            )));
        }
        Ok(Dataset {
            inputs,
            targets,
            n_points,
            n_inputs,
            n_targets,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = Some(names);
        self
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn input_row(&self, n: usize) -> &[f64] {
        &self.inputs[n * self.n_inputs..(n + 1) * self.n_inputs]
    }

    pub fn target_row(&self, n: usize) -> &[f64] {
        &self.targets[n * self.n_targets..(n + 1) * self.n_targets]
    }

    /// Per-column z-scoring of the inputs; constant columns pass through.
    pub fn standardized(&self) -> Dataset {
        let (n, d) = (self.n_points, self.n_inputs);
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for row in 0..n {
            for c in 0..d {
                mean[c] += self.inputs[row * d + c];
            }
        }
        for c in 0..d {
            mean[c] /= n as f64;
        }
        for row in 0..n {
            for c in 0..d {
                let dv = self.inputs[row * d + c] - mean[c];
                std[c] += dv * dv;
            }
        }
        for c in 0..d {
            std[c] = (std[c] / n as f64).sqrt();
            if std[c] == 0.0 {
                std[c] = 1.0;
            }
        }
        let mut inputs = self.inputs.clone();
        for row in 0..n {
            for c in 0..d {
                inputs[row * d + c] = (inputs[row * d + c] - mean[c]) / std[c];
            }
        }
        Dataset {
            inputs,
            ..self.clone()
        }
    }

    /// Seeded shuffle-and-split; `holdout` is the fraction moved to the
    /// second returned set (at least one point stays on each side).
    pub fn split(&self, holdout: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&holdout) || holdout == 0.0 {
            return Err(Error::ConfigError(format!(
                "holdout fraction {holdout} not in (0, 1)"
            )));
        }
        let n = self.n_points;
        let n_hold = ((n as f64 * holdout).round() as usize).clamp(1, n - 1);
        let mut rng = RngStream::from_seed(seed);
        let perm = rng.permutation(n);
        let take = |idx: &[usize]| -> Dataset {
            let mut inputs = Vec::with_capacity(idx.len() * self.n_inputs);
            let mut targets = Vec::with_capacity(idx.len() * self.n_targets);
            for &r in idx {
                inputs.extend_from_slice(self.input_row(r));
                targets.extend_from_slice(self.target_row(r));
            }
            Dataset {
                inputs,
                targets,
                n_points: idx.len(),
                n_inputs: self.n_inputs,
                n_targets: self.n_targets,
                feature_names: self.feature_names.clone(),
            }
        };
        Ok((take(&perm[n_hold..]), take(&perm[..n_hold])))
    }
}

/// Requested evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStrategy {
    Auto,
    Hybrid,
    DataParallel,
}

/// Strategy actually run after `Auto` resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedStrategy {
    Hybrid,
    DataParallel,
}

impl ResolvedStrategy {
    pub fn name(self) -> &'static str {
        match self {
            ResolvedStrategy::Hybrid => "hybrid",
            ResolvedStrategy::DataParallel => "data",
        }
    }
}

/// Hybrid when the dataset is smaller than `threshold_factor * lanes`;
/// data-parallel otherwise (ties go data-parallel).
pub fn choose_strategy(d_points: usize, lanes: usize, threshold_factor: f64) -> ResolvedStrategy {
    if (d_points as f64) < threshold_factor * lanes as f64 {
        ResolvedStrategy::Hybrid
    } else {
        ResolvedStrategy::DataParallel
    }
}

/// Number of concurrently schedulable execution lanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParallelWidth {
    lanes: usize,
}

impl ParallelWidth {
    pub fn detect() -> Self {
        let lanes = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        ParallelWidth { lanes }
    }

    pub fn fixed(lanes: usize) -> Result<Self> {
        if lanes == 0 {
            return Err(Error::ConfigError("lane count must be at least 1".into()));
        }
        Ok(ParallelWidth { lanes })
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }
}

/// Lane pool plus the evaluation knobs. Build once, reuse across calls.
pub struct EvalContext {
    pool: rayon::ThreadPool,
    width: ParallelWidth,
    pub chunk_cap: usize,
    pub threshold_factor: f64,
}

impl EvalContext {
    pub fn new(width: ParallelWidth) -> Result<Self> {
        Self::with_params(width, 1024, 1.0)
    }

    pub fn with_params(width: ParallelWidth, chunk_cap: usize, threshold_factor: f64) -> Result<Self> {
        if chunk_cap == 0 {
            return Err(Error::ConfigError("chunk_cap must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(width.lanes())
            .build()
            .map_err(|e| Error::ConfigError(format!("cannot build lane pool: {e}")))?;
        Ok(EvalContext {
            pool,
            width,
            chunk_cap,
            threshold_factor,
        })
    }

    pub fn width(&self) -> ParallelWidth {
        self.width
    }

    pub fn resolve(&self, strategy: EvalStrategy, d_points: usize) -> ResolvedStrategy {
        match strategy {
            EvalStrategy::Hybrid => ResolvedStrategy::Hybrid,
            EvalStrategy::DataParallel => ResolvedStrategy::DataParallel,
            EvalStrategy::Auto => {
                choose_strategy(d_points, self.width.lanes(), self.threshold_factor)
            }
        }
    }
}

/// `pop x points x outputs` tensor of raw predictions, row-major.
#[derive(Debug, Clone)]
pub struct OutputBuffer {
    pop: usize,
    points: usize,
    outputs: usize,
    data: Vec<f64>,
}

impl PartialEq for OutputBuffer {
    fn eq(&self, other: &Self) -> bool {
        self.pop == other.pop
            && self.points == other.points
            && self.outputs == other.outputs
            && crate::tree::bits_eq(&self.data, &other.data)
    }
}

impl OutputBuffer {
    fn zeroed(pop: usize, points: usize, outputs: usize) -> Self {
        OutputBuffer {
            pop,
            points,
            outputs,
            data: vec![0.0; pop * points * outputs],
        }
    }

    pub fn pop_size(&self) -> usize {
        self.pop
    }

    pub fn n_points(&self) -> usize {
        self.points
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs
    }

    /// Predictions of individual `i`: `points x outputs`, row-major.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.points * self.outputs;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn value(&self, i: usize, n: usize, k: usize) -> f64 {
        self.data[(i * self.points + n) * self.outputs + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Flat opcode stream for the promoted (pre-decoded) form of one tree,
/// stored in execution order (last prefix node first).
#[derive(Debug, Clone)]
struct Instr {
    code: OpCode,
    idx: u32,
    val: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpCode {
    PushConst,
    PushVar,
    Add,
    Sub,
    Mul,
    Div,
    Sin,
    Cos,
    Tan,
    Max,
    Min,
    Modi,
}

fn opcode_of(op: ScalarOp) -> OpCode {
    match op {
        ScalarOp::Add => OpCode::Add,
        ScalarOp::Sub => OpCode::Sub,
        ScalarOp::Mul => OpCode::Mul,
        ScalarOp::Div => OpCode::Div,
        ScalarOp::Sin => OpCode::Sin,
        ScalarOp::Cos => OpCode::Cos,
        ScalarOp::Tan => OpCode::Tan,
        ScalarOp::Max => OpCode::Max,
        ScalarOp::Min => OpCode::Min,
    }
}

struct Program {
    instrs: Vec<Instr>,
    stack_need: usize,
}

impl Program {
    fn compile(tree: TreeSlice<'_>, fs: &FunctionSet) -> Result<Program> {
        let len = tree.len();
        if len == 0 || len > tree.max_len() {
            return Err(Error::InvalidEncoding(format!("tree length {len}")));
        }
        let mut instrs = Vec::with_capacity(len);
        let mut sp = 0usize;
        let mut need = 0usize;
        for i in (0..len).rev() {
            let kind = NodeKind::from_raw(tree.types[i])
                .ok_or_else(|| Error::InvalidEncoding(format!("kind tag {}", tree.types[i])))?;
            let v = tree.values[i];
            let instr = match kind {
                NodeKind::Const => {
                    sp += 1;
                    Instr { code: OpCode::PushConst, idx: 0, val: v }
                }
                NodeKind::Var => {
                    sp += 1;
                    Instr { code: OpCode::PushVar, idx: v as u32, val: 0.0 }
                }
                NodeKind::Unary => {
                    let op = fs
                        .op(v as usize)
                        .filter(|o| o.arity() == 1)
                        .ok_or_else(|| Error::InvalidEncoding(format!("unary id {v}")))?;
                    if sp < 1 {
                        return Err(Error::InvalidEncoding("stack underflow".into()));
                    }
                    Instr { code: opcode_of(op), idx: 0, val: 0.0 }
                }
                NodeKind::Binary => {
                    let op = fs
                        .op(v as usize)
                        .filter(|o| o.arity() == 2)
                        .ok_or_else(|| Error::InvalidEncoding(format!("binary id {v}")))?;
                    if sp < 2 {
                        return Err(Error::InvalidEncoding("stack underflow".into()));
                    }
                    sp -= 1;
                    Instr { code: opcode_of(op), idx: 0, val: 0.0 }
                }
                NodeKind::Modi => {
                    if sp < 2 {
                        return Err(Error::InvalidEncoding("stack underflow".into()));
                    }
                    sp -= 1;
                    Instr { code: OpCode::Modi, idx: v as u32, val: 0.0 }
                }
                NodeKind::Empty => {
                    return Err(Error::InvalidEncoding("padding inside tree".into()))
                }
            };
            need = need.max(sp);
            instrs.push(instr);
        }
        if sp != 1 {
            return Err(Error::InvalidEncoding(format!(
                "evaluation leaves {sp} values on the stack"
            )));
        }
        Ok(Program { instrs, stack_need: need })
    }
}

/// Per-task scratch space, reused across the blocks of a chunk.
struct Scratch {
    stack: Vec<f64>,
    acc: Vec<f64>,
}

impl Scratch {
    fn new(stack_slots: usize, m: usize) -> Scratch {
        Scratch {
            stack: vec![0.0; stack_slots * BLOCK],
            acc: vec![0.0; m * BLOCK],
        }
    }
}

/// One block of `B` consecutive points through the promoted program.
fn run_program_block<const B: usize>(
    prog: &Program,
    inputs: &[f64],
    d: usize,
    n0: usize,
    m: usize,
    scratch: &mut Scratch,
    dest: &mut [f64],
) {
    let Scratch { stack, acc } = scratch;
    let mut sp = 0usize;
    if m > 1 {
        acc[..m * BLOCK].fill(0.0);
    }
    for instr in &prog.instrs {
        match instr.code {
            OpCode::PushConst => {
                let s = &mut stack[sp * BLOCK..sp * BLOCK + B];
                for v in s.iter_mut() {
                    *v = instr.val;
                }
                sp += 1;
            }
            OpCode::PushVar => {
                let vi = instr.idx as usize;
                let s = &mut stack[sp * BLOCK..sp * BLOCK + B];
                for (l, v) in s.iter_mut().enumerate() {
                    *v = inputs[(n0 + l) * d + vi];
                }
                sp += 1;
            }
            OpCode::Sin => unary_block::<B>(stack, sp, |a| a.sin()),
            OpCode::Cos => unary_block::<B>(stack, sp, |a| a.cos()),
            OpCode::Tan => unary_block::<B>(stack, sp, |a| a.tan()),
            OpCode::Add => {
                binary_block::<B>(stack, sp, |a, b| a + b);
                sp -= 1;
            }
            OpCode::Sub => {
                binary_block::<B>(stack, sp, |a, b| a - b);
                sp -= 1;
            }
            OpCode::Mul => {
                binary_block::<B>(stack, sp, |a, b| a * b);
                sp -= 1;
            }
            OpCode::Div => {
                binary_block::<B>(stack, sp, |a, b| a / b);
                sp -= 1;
            }
            OpCode::Max => {
                binary_block::<B>(stack, sp, f64::max);
                sp -= 1;
            }
            OpCode::Min => {
                binary_block::<B>(stack, sp, f64::min);
                sp -= 1;
            }
            OpCode::Modi => {
                let oi = instr.idx as usize;
                let left = &stack[(sp - 1) * BLOCK..(sp - 1) * BLOCK + B];
                for (l, &v) in left.iter().enumerate() {
                    acc[oi * BLOCK + l] += v;
                }
                sp -= 1;
            }
        }
    }
    write_dest::<B>(stack, acc, m, dest);
}

/// Same block step, decoding straight from the population matrices.
fn run_direct_block<const B: usize>(
    types: &[u8],
    values: &[f64],
    len: usize,
    ops: &[ScalarOp],
    inputs: &[f64],
    d: usize,
    n0: usize,
    m: usize,
    scratch: &mut Scratch,
    dest: &mut [f64],
) {
    let Scratch { stack, acc } = scratch;
    let mut sp = 0usize;
    if m > 1 {
        acc[..m * BLOCK].fill(0.0);
    }
    for i in (0..len).rev() {
        match types[i] {
            t if t == NodeKind::Const as u8 => {
                let v = values[i];
                let s = &mut stack[sp * BLOCK..sp * BLOCK + B];
                for slot in s.iter_mut() {
                    *slot = v;
                }
                sp += 1;
            }
            t if t == NodeKind::Var as u8 => {
                let vi = values[i] as usize;
                let s = &mut stack[sp * BLOCK..sp * BLOCK + B];
                for (l, slot) in s.iter_mut().enumerate() {
                    *slot = inputs[(n0 + l) * d + vi];
                }
                sp += 1;
            }
            t if t == NodeKind::Unary as u8 => {
                let op = ops[values[i] as usize];
                unary_block::<B>(stack, sp, |a| op.apply1(a));
            }
            t if t == NodeKind::Binary as u8 => {
                let op = ops[values[i] as usize];
                binary_block::<B>(stack, sp, |a, b| op.apply2(a, b));
                sp -= 1;
            }
            t if t == NodeKind::Modi as u8 => {
                let oi = values[i] as usize;
                let left = &stack[(sp - 1) * BLOCK..(sp - 1) * BLOCK + B];
                for (l, &v) in left.iter().enumerate() {
                    acc[oi * BLOCK + l] += v;
                }
                sp -= 1;
            }
            _ => unreachable!("invalid kind in validated tree"),
        }
    }
    write_dest::<B>(stack, acc, m, dest);
}

#[inline(always)]
fn unary_block<const B: usize>(stack: &mut [f64], sp: usize, f: impl Fn(f64) -> f64) {
    let s = &mut stack[(sp - 1) * BLOCK..(sp - 1) * BLOCK + B];
    for v in s.iter_mut() {
        *v = f(*v);
    }
}

/// Combine the top block (left operand) into the one below (right operand).
#[inline(always)]
fn binary_block<const B: usize>(stack: &mut [f64], sp: usize, f: impl Fn(f64, f64) -> f64) {
    let (lo, hi) = stack.split_at_mut((sp - 1) * BLOCK);
    let left = &hi[..B];
    let right = &mut lo[(sp - 2) * BLOCK..(sp - 2) * BLOCK + B];
    for l in 0..B {
        right[l] = f(left[l], right[l]);
    }
}

#[inline(always)]
fn write_dest<const B: usize>(stack: &[f64], acc: &[f64], m: usize, dest: &mut [f64]) {
    if m == 1 {
        dest[..B].copy_from_slice(&stack[..B]);
    } else {
        for l in 0..B {
            for k in 0..m {
                dest[l * m + k] = acc[k * BLOCK + l];
            }
        }
    }
}

/// Evaluate points `[n0, n0 + dest.len()/m)` of one chunk.
fn eval_chunk(
    tree: ChunkTree<'_>,
    inputs: &[f64],
    d: usize,
    n0: usize,
    m: usize,
    stack_slots: usize,
    dest: &mut [f64],
) {
    let count = dest.len() / m;
    let mut scratch = Scratch::new(stack_slots, m);
    let full = count / BLOCK * BLOCK;
    let mut n = 0;
    while n < full {
        let window = &mut dest[n * m..(n + BLOCK) * m];
        match tree {
            ChunkTree::Direct { types, values, len, ops } => run_direct_block::<BLOCK>(
                types, values, len, ops, inputs, d, n0 + n, m, &mut scratch, window,
            ),
            ChunkTree::Promoted(prog) => {
                run_program_block::<BLOCK>(prog, inputs, d, n0 + n, m, &mut scratch, window)
            }
        }
        n += BLOCK;
    }
    while n < count {
        let window = &mut dest[n * m..(n + 1) * m];
        match tree {
            ChunkTree::Direct { types, values, len, ops } => run_direct_block::<1>(
                types, values, len, ops, inputs, d, n0 + n, m, &mut scratch, window,
            ),
            ChunkTree::Promoted(prog) => {
                run_program_block::<1>(prog, inputs, d, n0 + n, m, &mut scratch, window)
            }
        }
        n += 1;
    }
}

#[derive(Clone, Copy)]
enum ChunkTree<'a> {
    Direct {
        types: &'a [u8],
        values: &'a [f64],
        len: usize,
        ops: &'a [ScalarOp],
    },
    Promoted(&'a Program),
}

/// Evaluate one tree at one input point. `m` outputs: for `m == 1` the
/// result is the root value; for `m > 1` it is the modi accumulator vector
/// and the root's residual value is discarded.
pub fn eval_tree(s: TreeSlice<'_>, x: &[f64], fs: &FunctionSet, m: usize) -> Result<Vec<f64>> {
    let bounds = crate::tree::EncodingConfig {
        max_len: s.max_len(),
        n_inputs: x.len(),
        n_outputs: m,
        const_range: (f64::MIN, f64::MAX),
    };
    let violations = crate::tree::validate_slice(s, &bounds, fs);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidEncoding(v.to_string()));
    }
    let prog = Program::compile(s, fs)?;
    let mut scratch = Scratch::new(prog.stack_need, m);
    let mut dest = vec![0.0; m];
    run_program_block::<1>(&prog, x, x.len(), 0, m, &mut scratch, &mut dest);
    Ok(dest)
}

fn check_rows(pop: &PopulationStore, d: usize, fs: &FunctionSet, m: usize) -> Result<()> {
    for i in 0..pop.pop_size() {
        let s = pop.row(i);
        let len = s.len();
        if len == 0 || len > s.max_len() {
            return Err(Error::InvalidEncoding(format!("row {i}: length {len}")));
        }
        for j in 0..len {
            let kind = NodeKind::from_raw(s.types[j])
                .ok_or_else(|| Error::InvalidEncoding(format!("row {i} node {j}: bad kind")))?;
            let ok = match kind {
                NodeKind::Const => true,
                NodeKind::Var => crate::tree::integral(s.values[j]).is_some_and(|v| v < d),
                NodeKind::Unary => crate::tree::integral(s.values[j])
                    .and_then(|v| fs.arity(v))
                    == Some(1),
                NodeKind::Binary => crate::tree::integral(s.values[j])
                    .and_then(|v| fs.arity(v))
                    == Some(2),
                NodeKind::Modi => crate::tree::integral(s.values[j]).is_some_and(|v| v < m),
                NodeKind::Empty => false,
            };
            if !ok {
                return Err(Error::InvalidEncoding(format!(
                    "row {i} node {j}: value {} illegal for its kind",
                    s.values[j]
                )));
            }
        }
    }
    Ok(())
}

fn chunk_plan(points: usize, chunk_cap: usize) -> (usize, usize) {
    let size = points.min(chunk_cap);
    (size, points.div_ceil(size))
}

/// Evaluate one tree over a whole dataset: `n_points x m`, row-major.
pub fn eval_tree_batch(
    s: TreeSlice<'_>,
    ds: &Dataset,
    fs: &FunctionSet,
    m: usize,
    ctx: &EvalContext,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let bounds = crate::tree::EncodingConfig {
        max_len: s.max_len(),
        n_inputs: ds.n_inputs(),
        n_outputs: m,
        const_range: (f64::MIN, f64::MAX),
    };
    if let Some(v) = crate::tree::validate_slice(s, &bounds, fs).first() {
        return Err(Error::InvalidEncoding(v.to_string()));
    }
    let prog = Program::compile(s, fs)?;
    let (chunk_size, _) = chunk_plan(ds.n_points(), ctx.chunk_cap);
    let mut out = vec![0.0; ds.n_points() * m];
    let d = ds.n_inputs();
    ctx.pool.install(|| {
        out.par_chunks_mut(chunk_size * m)
            .enumerate()
            .for_each(|(c, dest)| {
                eval_chunk(
                    ChunkTree::Promoted(&prog),
                    ds.inputs(),
                    d,
                    c * chunk_size,
                    m,
                    prog.stack_need,
                    dest,
                );
            });
    });
    Ok(out)
}

/// Evaluate every individual over every data point.
///
/// The two strategies differ only in scheduling; for any strategy and any
/// lane count the buffer is bit-identical, so everything downstream of
/// this call is reproducible.
pub fn eval_population(
    pop: &PopulationStore,
    ds: &Dataset,
    fs: &FunctionSet,
    strategy: EvalStrategy,
    m: usize,
    ctx: &EvalContext,
) -> Result<OutputBuffer> {
    use rayon::prelude::*;

    if m == 0 {
        return Err(Error::ShapeMismatch("n_outputs must be at least 1".into()));
    }
    check_rows(pop, ds.n_inputs(), fs, m)?;

    let resolved = ctx.resolve(strategy, ds.n_points());
    let points = ds.n_points();
    let d = ds.n_inputs();
    let (chunk_size, _) = chunk_plan(points, ctx.chunk_cap);
    let row_elems = points * m;
    let chunk_elems = chunk_size * m;
    // Stack depth bound for direct interpretation: pending leaves only.
    let stack_slots = pop.max_len() / 2 + 1;
    let mut buf = OutputBuffer::zeroed(pop.pop_size(), points, m);
    let inputs = ds.inputs();
    let ops = fs.ops();

    match resolved {
        ResolvedStrategy::Hybrid => {
            // One flat grid over (individual, chunk); trees read in place.
            ctx.pool.install(|| {
                buf.data
                    .par_chunks_mut(row_elems)
                    .enumerate()
                    .for_each(|(i, row)| {
                        let s = pop.row(i);
                        let tree = ChunkTree::Direct {
                            types: s.types,
                            values: s.values,
                            len: s.len(),
                            ops,
                        };
                        row.par_chunks_mut(chunk_elems)
                            .enumerate()
                            .for_each(|(c, dest)| {
                                eval_chunk(tree, inputs, d, c * chunk_size, m, stack_slots, dest);
                            });
                    });
            });
        }
        ResolvedStrategy::DataParallel => {
            // One pass per individual with the tree promoted to a compact
            // program shared by all lanes.
            ctx.pool.install(|| -> Result<()> {
                for (i, row) in buf.data.chunks_mut(row_elems).enumerate() {
                    let prog = Program::compile(pop.row(i), fs)?;
                    row.par_chunks_mut(chunk_elems)
                        .enumerate()
                        .for_each(|(c, dest)| {
                            eval_chunk(
                                ChunkTree::Promoted(&prog),
                                inputs,
                                d,
                                c * chunk_size,
                                m,
                                prog.stack_need,
                                dest,
                            );
                        });
                }
                Ok(())
            })?;
        }
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::FunctionSet;
    use crate::generate::{generate_population, GenerationConfig};
    use crate::rng::RngKey;
    use crate::tree::{encode_tree, EncodingConfig, RefTree};

    fn ctx1() -> EvalContext {
        EvalContext::new(ParallelWidth::fixed(1).unwrap()).unwrap()
    }

    fn ds_1d(xs: &[f64]) -> Dataset {
        Dataset::new(xs.to_vec(), vec![0.0; xs.len()], xs.len(), 1, 1).unwrap()
    }

    #[test]
    fn scalar_examples() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(16, 1, 1);
        let plus = encode_tree(
            &RefTree::binary(0, RefTree::Var(0), RefTree::Const(1.0)),
            &cfg,
            &fs,
        )
        .unwrap();
        assert_eq!(eval_tree(plus.as_slice(), &[2.0], &fs, 1).unwrap(), vec![3.0]);

        let div = encode_tree(
            &RefTree::binary(3, RefTree::Const(1.0), RefTree::Var(0)),
            &cfg,
            &fs,
        )
        .unwrap();
        assert_eq!(
            eval_tree(div.as_slice(), &[0.0], &fs, 1).unwrap(),
            vec![f64::INFINITY]
        );
    }

    #[test]
    fn operand_order_is_left_then_right() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(16, 2, 1);
        let sub = encode_tree(
            &RefTree::binary(1, RefTree::Var(0), RefTree::Var(1)),
            &cfg,
            &fs,
        )
        .unwrap();
        assert_eq!(
            eval_tree(sub.as_slice(), &[5.0, 3.0], &fs, 1).unwrap(),
            vec![2.0]
        );
        let div = encode_tree(
            &RefTree::binary(3, RefTree::Var(0), RefTree::Var(1)),
            &cfg,
            &fs,
        )
        .unwrap();
        assert_eq!(
            eval_tree(div.as_slice(), &[6.0, 3.0], &fs, 1).unwrap(),
            vec![2.0]
        );
    }

    #[test]
    fn multi_output_zero_law() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(16, 1, 3);
        let t = encode_tree(
            &RefTree::binary(0, RefTree::Var(0), RefTree::Const(1.0)),
            &cfg,
            &fs,
        )
        .unwrap();
        assert_eq!(
            eval_tree(t.as_slice(), &[9.0], &fs, 3).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn modi_accumulates_left_and_passes_right() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(16, 1, 2);
        // modi1(x0, 7.0) under a +1 root: out[1] gets x0, parent sees 7.0.
        let t = encode_tree(
            &RefTree::binary(
                0,
                RefTree::modi(1, RefTree::Var(0), RefTree::Const(7.0)),
                RefTree::Const(1.0),
            ),
            &cfg,
            &fs,
        )
        .unwrap();
        let out = eval_tree(t.as_slice(), &[4.0], &fs, 2).unwrap();
        assert_eq!(out, vec![0.0, 4.0]);
    }

    #[test]
    fn fig_style_three_output_tree() {
        let fs = FunctionSet::with_min_max();
        let cfg = EncodingConfig::new(32, 5, 3);
        // o0 = (a / c) * 0.5, o1 = max(b, c) + (d - 0.5), o2 = e + 0.5
        let t = RefTree::modi(
            0,
            RefTree::binary(
                2,
                RefTree::binary(3, RefTree::Var(0), RefTree::Var(2)),
                RefTree::Const(0.5),
            ),
            RefTree::modi(
                1,
                RefTree::binary(
                    0,
                    RefTree::binary(7, RefTree::Var(1), RefTree::Var(2)),
                    RefTree::binary(1, RefTree::Var(3), RefTree::Const(0.5)),
                ),
                RefTree::modi(
                    2,
                    RefTree::binary(0, RefTree::Var(4), RefTree::Const(0.5)),
                    RefTree::Const(0.0),
                ),
            ),
        );
        let enc = encode_tree(&t, &cfg, &fs).unwrap();
        let out = eval_tree(enc.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0], &fs, 3).unwrap();
        assert!((out[0] - 1.0 / 3.0 * 0.5).abs() < 1e-12);
        assert!((out[1] - 6.5).abs() < 1e-12);
        assert!((out[2] - 5.5).abs() < 1e-12);
    }

    #[test]
    fn eval_rejects_malformed_slices() {
        let fs = FunctionSet::standard();
        let t = crate::tree::Tree::from_parts(&[3, 1, 0], &[0.0, 0.0, 1.0], &[3, 2, 1], 8).unwrap();
        assert!(matches!(
            eval_tree(t.as_slice(), &[1.0], &fs, 1),
            Err(Error::InvalidEncoding(_))
        ));
    }

    #[test]
    fn batch_matches_scalar_loop() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(64, 2, 1);
        let gen = GenerationConfig::default();
        let pop = generate_population(50, &cfg, &gen, &fs, &RngKey::new(33)).unwrap();
        let n = 29; // deliberately not a multiple of the block width
        let mut inputs = Vec::new();
        let mut rng = crate::rng::RngStream::from_seed(1);
        for _ in 0..n * 2 {
            inputs.push(rng.range_f64(-3.0, 3.0));
        }
        let ds = Dataset::new(inputs, vec![0.0; n], n, 2, 1).unwrap();
        let ctx = ctx1();
        for i in 0..50 {
            let s = pop.row(i);
            let batch = eval_tree_batch(s, &ds, &fs, 1, &ctx).unwrap();
            for p in 0..n {
                let single = eval_tree(s, ds.input_row(p), &fs, 1).unwrap()[0];
                assert!(
                    batch[p] == single || (batch[p].is_nan() && single.is_nan()),
                    "tree {i} point {p}: batch {} vs scalar {}",
                    batch[p],
                    single
                );
            }
        }
    }

    #[test]
    fn population_example() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(8, 1, 1);
        let x0 = encode_tree(&RefTree::Var(0), &cfg, &fs).unwrap();
        let one = encode_tree(&RefTree::Const(1.0), &cfg, &fs).unwrap();
        let mut pop = crate::tree::PopulationStore::empty(2, 8);
        pop.set_row(0, x0.as_slice());
        pop.set_row(1, one.as_slice());
        let ds = ds_1d(&[2.0, 3.0]);
        let buf = eval_population(&pop, &ds, &fs, EvalStrategy::Hybrid, 1, &ctx1()).unwrap();
        assert_eq!(buf.row(0), &[2.0, 3.0]);
        assert_eq!(buf.row(1), &[1.0, 1.0]);
    }

    #[test]
    fn strategies_and_lane_counts_agree_bitwise() {
        let fs = FunctionSet::standard();
        let cfg = EncodingConfig::new(64, 3, 1);
        let gen = GenerationConfig::default();
        let pop = generate_population(40, &cfg, &gen, &fs, &RngKey::new(90)).unwrap();
        let n = 333;
        let mut rng = crate::rng::RngStream::from_seed(5);
        let inputs: Vec<f64> = (0..n * 3).map(|_| rng.range_f64(-4.0, 4.0)).collect();
        let ds = Dataset::new(inputs, vec![0.0; n], n, 3, 1).unwrap();

        let ctx_a = EvalContext::new(ParallelWidth::fixed(1).unwrap()).unwrap();
        let ctx_b = EvalContext::new(ParallelWidth::fixed(4).unwrap()).unwrap();
        let hybrid = eval_population(&pop, &ds, &fs, EvalStrategy::Hybrid, 1, &ctx_a).unwrap();
        let data = eval_population(&pop, &ds, &fs, EvalStrategy::DataParallel, 1, &ctx_b).unwrap();
        let auto = eval_population(&pop, &ds, &fs, EvalStrategy::Auto, 1, &ctx_b).unwrap();
        assert_eq!(hybrid.data(), data.data());
        assert_eq!(hybrid.data(), auto.data());
    }

    #[test]
    fn choose_strategy_thresholds() {
        assert_eq!(
            choose_strategy(60, 10_496, 1.0),
            ResolvedStrategy::Hybrid
        );
        assert_eq!(
            choose_strategy(16_384, 10_496, 1.0),
            ResolvedStrategy::DataParallel
        );
        assert_eq!(
            choose_strategy(10_496, 10_496, 1.0),
            ResolvedStrategy::DataParallel
        );
    }

    #[test]
    fn dataset_split_and_standardize() {
        let inputs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let targets: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ds = Dataset::new(inputs, targets, 20, 2, 1).unwrap();
        let (train, hold) = ds.split(0.25, 7).unwrap();
        assert_eq!(train.n_points(), 15);
        assert_eq!(hold.n_points(), 5);

        let z = ds.standardized();
        for c in 0..2 {
            let mean: f64 = (0..20).map(|r| z.input_row(r)[c]).sum::<f64>() / 20.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_rejects_bad_shapes() {
        assert!(Dataset::new(vec![1.0, 2.0], vec![0.0], 2, 1, 1).is_err());
        assert!(Dataset::new(vec![1.0, f64::NAN], vec![0.0, 0.0], 2, 1, 1).is_err());
    }
}
