//! Flat prefix-order tree encoding.
//!
//! A tree is stored as three parallel arrays of length `max_len`:
//! node kinds, node values, and subtree sizes, in depth-first prefix order.
//! `sizes[0]` is the node count of the whole tree; positions past it hold
//! padding (kind [`EMPTY`], size 0, value NaN) so that every tree — and by
//! row-stacking, every population — has the same fixed shape. The size
//! array makes the span of any subtree an O(1) lookup: the subtree rooted
//! at `k` occupies `[k, k + sizes[k])`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcs::FunctionSet;

/// Kind tag padding sentinel for positions past the tree length.
pub const EMPTY: u8 = 255;

/// Node category. Arity is a pure function of the kind: constants and
/// variables are leaves, unary functions take one child, binary functions
/// and modi nodes take two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeKind {
    Const = 0,
    Var = 1,
    Unary = 2,
    Binary = 3,
    Modi = 4,
    Empty = EMPTY,
}

impl NodeKind {
    pub fn from_raw(raw: u8) -> Option<NodeKind> {
        match raw {
            0 => Some(NodeKind::Const),
            1 => Some(NodeKind::Var),
            2 => Some(NodeKind::Unary),
            3 => Some(NodeKind::Binary),
            4 => Some(NodeKind::Modi),
            EMPTY => Some(NodeKind::Empty),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            NodeKind::Const | NodeKind::Var | NodeKind::Empty => 0,
            NodeKind::Unary => 1,
            NodeKind::Binary | NodeKind::Modi => 2,
        }
    }
}

/// Shape and value bounds for encoded trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    /// Maximum number of nodes per tree.
    pub max_len: usize,
    /// Input dimension; variable indices must stay below it.
    pub n_inputs: usize,
    /// Output dimension; above 1 enables modi nodes.
    pub n_outputs: usize,
    /// Closed interval generated constants are drawn from.
    pub const_range: (f64, f64),
}

impl EncodingConfig {
    pub fn new(max_len: usize, n_inputs: usize, n_outputs: usize) -> Self {
        EncodingConfig {
            max_len,
            n_inputs,
            n_outputs,
            const_range: (-1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_len < 1 {
            return Err(Error::ConfigError("max_len must be at least 1".into()));
        }
        if self.n_inputs < 1 {
            return Err(Error::ConfigError("n_inputs must be at least 1".into()));
        }
        if self.n_outputs < 1 {
            return Err(Error::ConfigError("n_outputs must be at least 1".into()));
        }
        let (lo, hi) = self.const_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::ConfigError(format!(
                "const_range [{lo}, {hi}] is not a finite interval"
            )));
        }
        Ok(())
    }
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig::new(512, 1, 1)
    }
}

/// Borrowed view of one encoded tree: three padded arrays of equal length.
#[derive(Debug, Clone, Copy)]
pub struct TreeSlice<'a> {
    pub types: &'a [u8],
    pub values: &'a [f64],
    pub sizes: &'a [u32],
}

impl<'a> TreeSlice<'a> {
    pub fn new(types: &'a [u8], values: &'a [f64], sizes: &'a [u32]) -> Self {
        debug_assert!(types.len() == values.len() && values.len() == sizes.len());
        TreeSlice {
            types,
            values,
            sizes,
        }
    }

    /// Node count of the encoded tree (`sizes[0]`).
    pub fn len(&self) -> usize {
        self.sizes.first().map_or(0, |&s| s as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_len(&self) -> usize {
        self.types.len()
    }

    pub fn kind(&self, i: usize) -> Option<NodeKind> {
        NodeKind::from_raw(self.types[i])
    }

    /// Leaf test; `k` must be below `len()`.
    pub fn is_leaf(&self, k: usize) -> bool {
        self.sizes[k] == 1
    }

    pub fn to_tree(&self) -> Tree {
        Tree {
            types: self.types.into(),
            values: self.values.into(),
            sizes: self.sizes.into(),
        }
    }

    /// View of the subtree rooted at `k`, truncated to its span.
    /// The result is itself a valid tree slice (unpadded).
    pub fn subtree(&self, k: usize) -> Result<TreeSlice<'a>> {
        let (s, e) = subtree_span(*self, k)?;
        Ok(TreeSlice {
            types: &self.types[s..e],
            values: &self.values[s..e],
            sizes: &self.sizes[s..e],
        })
    }

    /// Positions of the direct children of `k`, left to right.
    pub fn children(&self, k: usize) -> Vec<usize> {
        let end = k + self.sizes[k] as usize;
        let mut out = Vec::new();
        let mut c = k + 1;
        while c < end {
            out.push(c);
            c += self.sizes[c] as usize;
        }
        out
    }
}

/// Bitwise float-slice equality: the padding is NaN and determinism
/// contracts compare representations, not numeric values.
pub(crate) fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Owned encoded tree with padded arrays.
#[derive(Debug, Clone)]
pub struct Tree {
    types: Box<[u8]>,
    values: Box<[f64]>,
    sizes: Box<[u32]>,
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.types == other.types
            && self.sizes == other.sizes
            && bits_eq(&self.values, &other.values)
    }
}

impl Tree {
    /// Build from unpadded prefix arrays, padding up to `max_len`.
    pub fn from_parts(types: &[u8], values: &[f64], sizes: &[u32], max_len: usize) -> Result<Self> {
        let n = types.len();
        if n == 0 {
            return Err(Error::InvalidEncoding("empty tree".into()));
        }
        if n > max_len {
            return Err(Error::TooLarge {
                nodes: n,
                max_len,
            });
        }
        if values.len() != n || sizes.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "parts have lengths {}/{}/{}",
                types.len(),
                values.len(),
                sizes.len()
            )));
        }
        let mut t = vec![EMPTY; max_len];
        let mut v = vec![f64::NAN; max_len];
        let mut s = vec![0u32; max_len];
        t[..n].copy_from_slice(types);
        v[..n].copy_from_slice(values);
        s[..n].copy_from_slice(sizes);
        Ok(Tree {
            types: t.into(),
            values: v.into(),
            sizes: s.into(),
        })
    }

    pub fn as_slice(&self) -> TreeSlice<'_> {
        TreeSlice {
            types: &self.types,
            values: &self.values,
            sizes: &self.sizes,
        }
    }

    pub fn len(&self) -> usize {
        self.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max_len(&self) -> usize {
        self.types.len()
    }
}

/// A whole population: three `pop_size x max_len` matrices whose row `i`
/// is individual `i`. Shapes never change once constructed.
#[derive(Debug, Clone)]
pub struct PopulationStore {
    pop_size: usize,
    max_len: usize,
    types: Vec<u8>,
    values: Vec<f64>,
    sizes: Vec<u32>,
}

impl PartialEq for PopulationStore {
    fn eq(&self, other: &Self) -> bool {
        self.pop_size == other.pop_size
            && self.max_len == other.max_len
            && self.types == other.types
            && self.sizes == other.sizes
            && bits_eq(&self.values, &other.values)
    }
}

impl PopulationStore {
    /// All-padding store; rows must be filled with `set_row`.
    pub fn empty(pop_size: usize, max_len: usize) -> Self {
        PopulationStore {
            pop_size,
            max_len,
            types: vec![EMPTY; pop_size * max_len],
            values: vec![f64::NAN; pop_size * max_len],
            sizes: vec![0; pop_size * max_len],
        }
    }

    pub fn pop_size(&self) -> usize {
        self.pop_size
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn row(&self, i: usize) -> TreeSlice<'_> {
        let r = i * self.max_len..(i + 1) * self.max_len;
        TreeSlice {
            types: &self.types[r.clone()],
            values: &self.values[r.clone()],
            sizes: &self.sizes[r],
        }
    }

    pub fn set_row(&mut self, i: usize, tree: TreeSlice<'_>) {
        assert_eq!(tree.types.len(), self.max_len, "row width mismatch");
        let r = i * self.max_len..(i + 1) * self.max_len;
        self.types[r.clone()].copy_from_slice(tree.types);
        self.values[r.clone()].copy_from_slice(tree.values);
        self.sizes[r].copy_from_slice(tree.sizes);
    }

    /// Raw matrices, row-major.
    pub fn matrices(&self) -> (&[u8], &[f64], &[u32]) {
        (&self.types, &self.values, &self.sizes)
    }

    pub fn from_matrices(
        pop_size: usize,
        max_len: usize,
        types: Vec<u8>,
        values: Vec<f64>,
        sizes: Vec<u32>,
    ) -> Result<Self> {
        let n = pop_size * max_len;
        if types.len() != n || values.len() != n || sizes.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} elements per matrix, got {}/{}/{}",
                types.len(),
                values.len(),
                sizes.len()
            )));
        }
        Ok(PopulationStore {
            pop_size,
            max_len,
            types,
            values,
            sizes,
        })
    }

    /// Node counts per row.
    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.pop_size).map(|i| self.row(i).len())
    }

    pub fn mean_size(&self) -> f64 {
        self.lengths().sum::<usize>() as f64 / self.pop_size as f64
    }

    /// First violation across all rows, if any.
    pub fn validate(&self, cfg: &EncodingConfig, fs: &FunctionSet) -> Result<()> {
        for i in 0..self.pop_size {
            let violations = validate_slice(self.row(i), cfg, fs);
            if let Some(v) = violations.first() {
                return Err(Error::InvalidEncoding(format!("row {i}: {v}")));
            }
        }
        Ok(())
    }
}

/// Pointer-form tree: the import/export and differential-testing
/// representation. Children counts always match node arity.
#[derive(Debug, Clone, PartialEq)]
pub enum RefTree {
    Const(f64),
    Var(usize),
    Unary { id: usize, arg: Box<RefTree> },
    Binary {
        id: usize,
        left: Box<RefTree>,
        right: Box<RefTree>,
    },
    Modi {
        out: usize,
        left: Box<RefTree>,
        right: Box<RefTree>,
    },
}

impl RefTree {
    pub fn unary(id: usize, arg: RefTree) -> RefTree {
        RefTree::Unary { id, arg: Box::new(arg) }
    }

    pub fn binary(id: usize, left: RefTree, right: RefTree) -> RefTree {
        RefTree::Binary {
            id,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn modi(out: usize, left: RefTree, right: RefTree) -> RefTree {
        RefTree::Modi {
            out,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            RefTree::Const(_) | RefTree::Var(_) => 1,
            RefTree::Unary { arg, .. } => 1 + arg.node_count(),
            RefTree::Binary { left, right, .. } | RefTree::Modi { left, right, .. } => {
                1 + left.node_count() + right.node_count()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            RefTree::Const(_) | RefTree::Var(_) => 1,
            RefTree::Unary { arg, .. } => 1 + arg.depth(),
            RefTree::Binary { left, right, .. } | RefTree::Modi { left, right, .. } => {
                1 + left.depth().max(right.depth())
            }
        }
    }
}

/// Encode a pointer tree into padded prefix arrays.
pub fn encode_tree(t: &RefTree, cfg: &EncodingConfig, fs: &FunctionSet) -> Result<Tree> {
    let n = t.node_count();
    if n > cfg.max_len {
        return Err(Error::TooLarge {
            nodes: n,
            max_len: cfg.max_len,
        });
    }
    let mut types = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(n);
    encode_into(t, cfg, fs, &mut types, &mut values, &mut sizes)?;
    Tree::from_parts(&types, &values, &sizes, cfg.max_len)
}

fn encode_into(
    t: &RefTree,
    cfg: &EncodingConfig,
    fs: &FunctionSet,
    types: &mut Vec<u8>,
    values: &mut Vec<f64>,
    sizes: &mut Vec<u32>,
) -> Result<u32> {
    let at = types.len();
    let illegal = |reason: String| Error::IllegalValue {
        position: at,
        reason,
    };
    match t {
        RefTree::Const(v) => {
            types.push(NodeKind::Const as u8);
            values.push(*v);
            sizes.push(1);
            Ok(1)
        }
        RefTree::Var(idx) => {
            if *idx >= cfg.n_inputs {
                return Err(illegal(format!(
                    "variable index {idx} out of range (n_inputs {})",
                    cfg.n_inputs
                )));
            }
            types.push(NodeKind::Var as u8);
            values.push(*idx as f64);
            sizes.push(1);
            Ok(1)
        }
        RefTree::Unary { id, arg } => {
            match fs.arity(*id) {
                Some(1) => {}
                Some(a) => {
                    return Err(illegal(format!("function {id} has arity {a}, node expects 1")))
                }
                None => return Err(illegal(format!("unregistered function id {id}"))),
            }
            types.push(NodeKind::Unary as u8);
            values.push(*id as f64);
            sizes.push(0);
            let sub = encode_into(arg, cfg, fs, types, values, sizes)?;
            sizes[at] = 1 + sub;
            Ok(sizes[at])
        }
        RefTree::Binary { id, left, right } => {
            match fs.arity(*id) {
                Some(2) => {}
                Some(a) => {
                    return Err(illegal(format!("function {id} has arity {a}, node expects 2")))
                }
                None => return Err(illegal(format!("unregistered function id {id}"))),
            }
            types.push(NodeKind::Binary as u8);
            values.push(*id as f64);
            sizes.push(0);
            let l = encode_into(left, cfg, fs, types, values, sizes)?;
            let r = encode_into(right, cfg, fs, types, values, sizes)?;
            sizes[at] = 1 + l + r;
            Ok(sizes[at])
        }
        RefTree::Modi { out, left, right } => {
            if *out >= cfg.n_outputs {
                return Err(illegal(format!(
                    "output index {out} out of range (n_outputs {})",
                    cfg.n_outputs
                )));
            }
            types.push(NodeKind::Modi as u8);
            values.push(*out as f64);
            sizes.push(0);
            let l = encode_into(left, cfg, fs, types, values, sizes)?;
            let r = encode_into(right, cfg, fs, types, values, sizes)?;
            sizes[at] = 1 + l + r;
            Ok(sizes[at])
        }
    }
}

/// Decode a slice back into pointer form. Fails with `InvalidEncoding` if
/// the arrays are not a well-formed prefix tree.
pub fn decode_tree(s: TreeSlice<'_>, fs: &FunctionSet) -> Result<RefTree> {
    let len = s.len();
    if len == 0 || len > s.max_len() {
        return Err(Error::InvalidEncoding(format!(
            "tree length {len} out of range"
        )));
    }
    let (root, end) = decode_at(s, 0, len, fs)?;
    if end != len {
        return Err(Error::InvalidEncoding(format!(
            "tree occupies {end} nodes but sizes[0] is {len}"
        )));
    }
    Ok(root)
}

fn decode_at(s: TreeSlice<'_>, i: usize, len: usize, fs: &FunctionSet) -> Result<(RefTree, usize)> {
    if i >= len {
        return Err(Error::InvalidEncoding(format!(
            "node index {i} beyond tree length {len}"
        )));
    }
    let bad = |msg: String| Error::InvalidEncoding(format!("node {i}: {msg}"));
    let kind = s
        .kind(i)
        .ok_or_else(|| bad(format!("unknown kind tag {}", s.types[i])))?;
    let v = s.values[i];
    let span = s.sizes[i] as usize;
    let expect_span = |got: usize| -> Result<()> {
        if span != got {
            Err(bad(format!("size {span} but children imply {got}")))
        } else {
            Ok(())
        }
    };
    match kind {
        NodeKind::Const => {
            expect_span(1)?;
            Ok((RefTree::Const(v), i + 1))
        }
        NodeKind::Var => {
            expect_span(1)?;
            Ok((RefTree::Var(integral(v).ok_or_else(|| bad(format!("non-integral variable index {v}")))?), i + 1))
        }
        NodeKind::Unary => {
            let id = integral(v).ok_or_else(|| bad(format!("non-integral function id {v}")))?;
            if fs.arity(id) != Some(1) {
                return Err(bad(format!("function id {id} is not a registered unary")));
            }
            let (arg, end) = decode_at(s, i + 1, len, fs)?;
            expect_span(end - i)?;
            Ok((RefTree::unary(id, arg), end))
        }
        NodeKind::Binary => {
            let id = integral(v).ok_or_else(|| bad(format!("non-integral function id {v}")))?;
            if fs.arity(id) != Some(2) {
                return Err(bad(format!("function id {id} is not a registered binary")));
            }
            let (left, mid) = decode_at(s, i + 1, len, fs)?;
            let (right, end) = decode_at(s, mid, len, fs)?;
            expect_span(end - i)?;
            Ok((RefTree::binary(id, left, right), end))
        }
        NodeKind::Modi => {
            let out = integral(v).ok_or_else(|| bad(format!("non-integral output index {v}")))?;
            let (left, mid) = decode_at(s, i + 1, len, fs)?;
            let (right, end) = decode_at(s, mid, len, fs)?;
            expect_span(end - i)?;
            Ok((RefTree::modi(out, left, right), end))
        }
        NodeKind::Empty => Err(bad("padding sentinel inside tree".into())),
    }
}

/// Exact integral payload of a value, if it has one.
pub fn integral(v: f64) -> Option<usize> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Some(v as usize)
    } else {
        None
    }
}

/// One failed invariant reported by [`validate_slice`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending node position, or `None` for whole-tree problems.
    pub position: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.position {
            Some(p) => write!(f, "position {p}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Check every slice invariant and return the violations (empty = ok).
pub fn validate_slice(s: TreeSlice<'_>, cfg: &EncodingConfig, fs: &FunctionSet) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut tree_level = |msg: String| {
        out.push(Violation {
            position: None,
            message: msg,
        })
    };

    let len = s.len();
    if len == 0 {
        tree_level("empty tree (sizes[0] = 0)".into());
        return out;
    }
    if len > s.max_len() {
        tree_level(format!("sizes[0] = {len} exceeds max_len {}", s.max_len()));
        return out;
    }

    let mut at = |position: usize, message: String| {
        out.push(Violation {
            position: Some(position),
            message,
        })
    };

    for i in len..s.max_len() {
        if s.types[i] != EMPTY {
            at(i, format!("padding position holds kind tag {}", s.types[i]));
        }
        if s.sizes[i] != 0 {
            at(i, format!("padding position holds size {}", s.sizes[i]));
        }
    }

    for i in 0..len {
        let Some(kind) = s.kind(i) else {
            at(i, format!("unknown kind tag {}", s.types[i]));
            continue;
        };
        let v = s.values[i];
        match kind {
            NodeKind::Empty => at(i, "padding sentinel inside tree".into()),
            NodeKind::Const => {}
            NodeKind::Var => match integral(v) {
                Some(idx) if idx < cfg.n_inputs => {}
                Some(idx) => at(
                    i,
                    format!("variable index {idx} out of range (n_inputs {})", cfg.n_inputs),
                ),
                None => at(i, format!("non-integral variable index {v}")),
            },
            NodeKind::Unary | NodeKind::Binary => match integral(v) {
                Some(id) => {
                    let want = kind.arity() as u8;
                    match fs.arity(id) {
                        Some(a) if a == want => {}
                        Some(a) => at(i, format!("function {id} has arity {a}, node expects {want}")),
                        None => at(i, format!("unregistered function id {id}")),
                    }
                }
                None => at(i, format!("non-integral function id {v}")),
            },
            NodeKind::Modi => match integral(v) {
                Some(o) if o < cfg.n_outputs => {}
                Some(o) => at(
                    i,
                    format!("output index {o} out of range (n_outputs {})", cfg.n_outputs),
                ),
                None => at(i, format!("non-integral output index {v}")),
            },
        }

        // Structural invariant: size = 1 + sizes of the children implied by
        // the node's arity, with all child blocks inside this node's span.
        let span = s.sizes[i] as usize;
        if span == 0 {
            at(i, "size 0 inside tree".into());
            continue;
        }
        if i + span > len {
            at(i, format!("span [{i}, {}) exceeds tree length {len}", i + span));
            continue;
        }
        let arity = kind.arity();
        let mut child = i + 1;
        let mut implied = 1usize;
        let mut broken = false;
        for _ in 0..arity {
            if child >= i + span {
                broken = true;
                break;
            }
            let cs = s.sizes[child] as usize;
            if cs == 0 {
                broken = true;
                break;
            }
            implied += cs;
            child += cs;
        }
        if broken || implied != span {
            at(
                i,
                format!("size {span} does not match arity-{arity} children layout"),
            );
        }
    }

    out
}

/// Half-open span `[k, k + sizes[k])` of the subtree rooted at `k`.
pub fn subtree_span(s: TreeSlice<'_>, k: usize) -> Result<(usize, usize)> {
    let len = s.len();
    if k >= len {
        return Err(Error::IndexOutOfRange { index: k, len });
    }
    Ok((k, k + s.sizes[k] as usize))
}

/// Ascending positions of all ancestors of `k`: exactly the nodes `j < k`
/// whose span contains `k`.
pub fn ancestors(s: TreeSlice<'_>, k: usize) -> Result<Vec<usize>> {
    let len = s.len();
    if k >= len {
        return Err(Error::IndexOutOfRange { index: k, len });
    }
    Ok((0..k)
        .filter(|&j| k < j + s.sizes[j] as usize)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg2() -> EncodingConfig {
        EncodingConfig::new(512, 2, 1)
    }

    fn plus_x0_one() -> RefTree {
        RefTree::binary(0, RefTree::Var(0), RefTree::Const(1.0))
    }

    #[test]
    fn encode_binary_example() {
        let t = encode_tree(&plus_x0_one(), &cfg2(), &FunctionSet::standard()).unwrap();
        let s = t.as_slice();
        assert_eq!(&s.types[..3], &[3, 1, 0]);
        assert_eq!(&s.values[..3], &[0.0, 0.0, 1.0]);
        assert_eq!(&s.sizes[..3], &[3, 1, 1]);
        assert_eq!(s.types[3], EMPTY);
        assert_eq!(s.sizes[3], 0);
        assert!(s.values[3].is_nan());
    }

    #[test]
    fn encode_unary_example() {
        let sin_x1 = RefTree::unary(4, RefTree::Var(1));
        let t = encode_tree(&sin_x1, &cfg2(), &FunctionSet::standard()).unwrap();
        let s = t.as_slice();
        assert_eq!(&s.types[..2], &[2, 1]);
        assert_eq!(&s.values[..2], &[4.0, 1.0]);
        assert_eq!(&s.sizes[..2], &[2, 1]);
    }

    #[test]
    fn encode_rejects_oversized_tree() {
        // A left-leaning chain of 513 nodes against max_len 512.
        let mut t = RefTree::Const(0.5);
        for _ in 0..256 {
            t = RefTree::binary(0, t, RefTree::Const(1.0));
        }
        assert_eq!(t.node_count(), 513);
        let err = encode_tree(&t, &cfg2(), &FunctionSet::standard()).unwrap_err();
        assert!(matches!(err, Error::TooLarge { nodes: 513, max_len: 512 }));
    }

    #[test]
    fn encode_rejects_illegal_values() {
        let fs = FunctionSet::standard();
        let bad_var = RefTree::Var(2);
        assert!(matches!(
            encode_tree(&bad_var, &cfg2(), &fs),
            Err(Error::IllegalValue { .. })
        ));
        let bad_fn = RefTree::unary(99, RefTree::Var(0));
        assert!(matches!(
            encode_tree(&bad_fn, &cfg2(), &fs),
            Err(Error::IllegalValue { .. })
        ));
        let bad_out = RefTree::modi(3, RefTree::Var(0), RefTree::Const(0.0));
        assert!(matches!(
            encode_tree(&bad_out, &cfg2(), &fs),
            Err(Error::IllegalValue { .. })
        ));
    }

    #[test]
    fn decode_inverts_encode() {
        let fs = FunctionSet::standard();
        let t = plus_x0_one();
        let enc = encode_tree(&t, &cfg2(), &fs).unwrap();
        assert_eq!(decode_tree(enc.as_slice(), &fs).unwrap(), t);

        let leaf = RefTree::Const(2.5);
        let enc = encode_tree(&leaf, &cfg2(), &fs).unwrap();
        assert_eq!(decode_tree(enc.as_slice(), &fs).unwrap(), leaf);
    }

    #[test]
    fn decode_rejects_bad_layout() {
        // Binary root whose size array claims a single 2-node child block.
        let fs = FunctionSet::standard();
        let t = Tree::from_parts(&[3, 1, 0], &[0.0, 0.0, 1.0], &[3, 2, 1], 8).unwrap();
        assert!(matches!(
            decode_tree(t.as_slice(), &fs),
            Err(Error::InvalidEncoding(_))
        ));
    }

    #[test]
    fn validate_flags_empty_tree() {
        let fs = FunctionSet::standard();
        let store = PopulationStore::empty(1, 8);
        let v = validate_slice(store.row(0), &cfg2(), &fs);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("empty tree"));
    }

    #[test]
    fn validate_flags_out_of_range_variable() {
        let fs = FunctionSet::standard();
        let t = Tree::from_parts(&[1], &[2.0], &[1], 8).unwrap();
        let v = validate_slice(t.as_slice(), &cfg2(), &fs);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].position, Some(0));
        assert!(v[0].message.contains("variable index 2 out of range"));
    }

    #[test]
    fn validate_accepts_encoder_output() {
        let fs = FunctionSet::standard();
        let enc = encode_tree(&plus_x0_one(), &cfg2(), &fs).unwrap();
        assert!(validate_slice(enc.as_slice(), &cfg2(), &fs).is_empty());
    }

    #[test]
    fn span_and_ancestors_examples() {
        let fs = FunctionSet::standard();
        // +(sin(x1), 1.0): sizes [4, 2, 1, 1]
        let t = RefTree::binary(0, RefTree::unary(4, RefTree::Var(1)), RefTree::Const(1.0));
        let enc = encode_tree(&t, &cfg2(), &fs).unwrap();
        let s = enc.as_slice();
        assert_eq!(&s.sizes[..4], &[4, 2, 1, 1]);
        assert_eq!(subtree_span(s, 1).unwrap(), (1, 3));
        assert_eq!(subtree_span(s, 0).unwrap(), (0, 4));
        assert!(matches!(
            subtree_span(s, 4),
            Err(Error::IndexOutOfRange { index: 4, len: 4 })
        ));
        assert_eq!(ancestors(s, 2).unwrap(), vec![0, 1]);
        assert_eq!(ancestors(s, 0).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn subtree_view_is_well_formed() {
        let fs = FunctionSet::standard();
        let t = RefTree::binary(0, RefTree::unary(4, RefTree::Var(1)), RefTree::Const(1.0));
        let enc = encode_tree(&t, &cfg2(), &fs).unwrap();
        let sub = enc.as_slice().subtree(1).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(
            decode_tree(sub, &fs).unwrap(),
            RefTree::unary(4, RefTree::Var(1))
        );
    }

    #[test]
    fn children_enumeration() {
        let fs = FunctionSet::standard();
        let t = RefTree::binary(0, RefTree::unary(4, RefTree::Var(1)), RefTree::Const(1.0));
        let enc = encode_tree(&t, &cfg2(), &fs).unwrap();
        assert_eq!(enc.as_slice().children(0), vec![1, 3]);
        assert_eq!(enc.as_slice().children(1), vec![2]);
        assert_eq!(enc.as_slice().children(2), Vec::<usize>::new());
    }

    #[test]
    fn population_store_round_trips_rows() {
        let fs = FunctionSet::standard();
        let enc = encode_tree(&plus_x0_one(), &cfg2(), &fs).unwrap();
        let mut store = PopulationStore::empty(3, 512);
        store.set_row(1, enc.as_slice());
        assert_eq!(store.row(1).to_tree(), enc);
        assert_eq!(store.row(0).len(), 0);
    }
}
