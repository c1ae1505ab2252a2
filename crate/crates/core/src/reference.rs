//! Plain pointer-tree implementations of the interpreter and every genetic
//! operator, used to cross-check the flat-array engine in differential
//! tests. Nothing here is on any production path; the code favors
//! obviousness over speed and shares no logic with the array kernels.

use crate::funcs::FunctionSet;
use crate::rng::RngStream;
use crate::tree::RefTree;

/// Recursive evaluation. `res` of a modi node is its right child; the left
/// child's value is queued for its output slot. Queued contributions are
/// applied in descending prefix position, which is the order a back-to-front
/// pass over the prefix encoding produces them in.
pub fn eval_ref(t: &RefTree, x: &[f64], fs: &FunctionSet, m: usize) -> Vec<f64> {
    let mut contributions: Vec<(usize, usize, f64)> = Vec::new();
    let mut next_index = 0usize;
    let root = eval_node(t, x, fs, &mut next_index, &mut contributions);
    if m == 1 {
        return vec![root];
    }
    contributions.sort_by(|a, b| b.0.cmp(&a.0));
    let mut out = vec![0.0; m];
    for (_, slot, v) in contributions {
        out[slot] += v;
    }
    out
}

fn eval_node(
    t: &RefTree,
    x: &[f64],
    fs: &FunctionSet,
    index: &mut usize,
    contributions: &mut Vec<(usize, usize, f64)>,
) -> f64 {
    let my_index = *index;
    *index += 1;
    match t {
        RefTree::Const(v) => *v,
        RefTree::Var(i) => x[*i],
        RefTree::Unary { id, arg } => {
            let a = eval_node(arg, x, fs, index, contributions);
            fs.op(*id).expect("registered id").apply1(a)
        }
        RefTree::Binary { id, left, right } => {
            let l = eval_node(left, x, fs, index, contributions);
            let r = eval_node(right, x, fs, index, contributions);
            fs.op(*id).expect("registered id").apply2(l, r)
        }
        RefTree::Modi { out, left, right } => {
            let l = eval_node(left, x, fs, index, contributions);
            let r = eval_node(right, x, fs, index, contributions);
            contributions.push((my_index, *out, l));
            r
        }
    }
}

/// Children of a node, left to right.
pub fn children(t: &RefTree) -> Vec<&RefTree> {
    match t {
        RefTree::Const(_) | RefTree::Var(_) => vec![],
        RefTree::Unary { arg, .. } => vec![arg],
        RefTree::Binary { left, right, .. } | RefTree::Modi { left, right, .. } => {
            vec![left, right]
        }
    }
}

/// Subtree rooted at prefix position `k`.
pub fn subtree_at(t: &RefTree, k: usize) -> &RefTree {
    fn walk<'a>(t: &'a RefTree, k: usize, at: &mut usize) -> Option<&'a RefTree> {
        if *at == k {
            return Some(t);
        }
        *at += 1;
        for c in children(t) {
            if let Some(hit) = walk(c, k, at) {
                return Some(hit);
            }
        }
        None
    }
    let mut at = 0;
    walk(t, k, &mut at).expect("prefix index in range")
}

/// Copy of `t` with the subtree at prefix position `k` replaced.
pub fn replace_at(t: &RefTree, k: usize, repl: &RefTree) -> RefTree {
    fn walk(t: &RefTree, k: usize, repl: &RefTree, at: &mut usize) -> RefTree {
        if *at == k {
            *at += t.node_count();
            return repl.clone();
        }
        *at += 1;
        match t {
            RefTree::Const(v) => RefTree::Const(*v),
            RefTree::Var(i) => RefTree::Var(*i),
            RefTree::Unary { id, arg } => RefTree::unary(*id, walk(arg, k, repl, at)),
            RefTree::Binary { id, left, right } => {
                let l = walk(left, k, repl, at);
                let r = walk(right, k, repl, at);
                RefTree::binary(*id, l, r)
            }
            RefTree::Modi { out, left, right } => {
                let l = walk(left, k, repl, at);
                let r = walk(right, k, repl, at);
                RefTree::modi(*out, l, r)
            }
        }
    }
    let mut at = 0;
    walk(t, k, repl, &mut at)
}

/// Prefix positions of the ancestors of `k`, ascending: the parent chain
/// from the root down to (but excluding) `k`.
pub fn ancestors_of(t: &RefTree, k: usize) -> Vec<usize> {
    let mut chain = Vec::new();
    let mut idx = 0usize;
    let mut node = t;
    while idx != k {
        chain.push(idx);
        let mut child_start = idx + 1;
        let mut descended = false;
        for c in children(node) {
            let size = c.node_count();
            if k < child_start + size {
                node = c;
                idx = child_start;
                descended = true;
                break;
            }
            child_start += size;
        }
        assert!(descended, "index {k} not under node {idx}");
    }
    chain
}

/// Subtree exchange with the max-size rejection rule. Returns the new tree
/// and whether the exchange was rejected.
pub fn exchange_ref(old: &RefTree, k: usize, repl: &RefTree, max_len: usize) -> (RefTree, bool) {
    let removed = subtree_at(old, k).node_count();
    let new_count = old.node_count() - removed + repl.node_count();
    if new_count > max_len {
        return (old.clone(), true);
    }
    (replace_at(old, k, repl), false)
}

pub fn crossover_ref(
    p1: &RefTree,
    k: usize,
    p2: &RefTree,
    j: usize,
    max_len: usize,
) -> (RefTree, bool) {
    exchange_ref(p1, k, subtree_at(p2, j), max_len)
}

pub fn hoist_ref(t: &RefTree, k: usize, j: usize, max_len: usize) -> (RefTree, bool) {
    exchange_ref(t, k, &subtree_at(t, j).clone(), max_len)
}

pub fn delete_ref(t: &RefTree, k: usize, child_ordinal: usize, max_len: usize) -> (RefTree, bool) {
    let kept = children(subtree_at(t, k))[child_ordinal].clone();
    exchange_ref(t, k, &kept, max_len)
}

/// Insert: the old subtree at `k` becomes the first child of a new node.
pub fn insert_ref(
    t: &RefTree,
    k: usize,
    node: crate::variation::InternalDraw,
    leaves: &[crate::variation::LeafDraw],
    fs: &FunctionSet,
    max_len: usize,
) -> (RefTree, bool) {
    use crate::variation::{InternalDraw, LeafDraw};
    let old = subtree_at(t, k).clone();
    let leaf = |l: &LeafDraw| match l {
        LeafDraw::Const(v) => RefTree::Const(*v),
        LeafDraw::Var(i) => RefTree::Var(*i),
    };
    let wrapped = match node {
        InternalDraw::Fun(id) => match fs.arity(id).expect("registered id") {
            1 => RefTree::unary(id, old),
            _ => RefTree::binary(id, old, leaf(&leaves[0])),
        },
        InternalDraw::Modi(out) => RefTree::modi(out, old, leaf(&leaves[0])),
    };
    exchange_ref(t, k, &wrapped, max_len)
}

/// Point mutation on the pointer form; shape is untouched.
pub fn point_ref(t: &RefTree, replacements: &[(usize, crate::variation::NodeDraw)]) -> RefTree {
    use crate::variation::{LeafDraw, NodeDraw};
    let mut out = t.clone();
    for &(k, draw) in replacements {
        let old = subtree_at(&out, k).clone();
        let new_node = match (draw, &old) {
            (NodeDraw::Leaf(LeafDraw::Const(v)), _) => RefTree::Const(v),
            (NodeDraw::Leaf(LeafDraw::Var(i)), _) => RefTree::Var(i),
            (NodeDraw::Fun(id), RefTree::Unary { arg, .. }) => RefTree::unary(id, (**arg).clone()),
            (NodeDraw::Fun(id), RefTree::Binary { left, right, .. }) => {
                RefTree::binary(id, (**left).clone(), (**right).clone())
            }
            (NodeDraw::Modi(o), RefTree::Modi { left, right, .. }) => {
                RefTree::modi(o, (**left).clone(), (**right).clone())
            }
            (draw, old) => panic!("arity-incompatible point replacement {draw:?} over {old:?}"),
        };
        out = replace_at(&out, k, &new_node);
    }
    out
}

/// Constant perturbation on the pointer form.
pub fn const_ref(t: &RefTree, deltas: &[(usize, f64)]) -> RefTree {
    let mut out = t.clone();
    for &(k, delta) in deltas {
        let RefTree::Const(v) = subtree_at(&out, k) else {
            panic!("const mutation addressed a non-constant node");
        };
        let bumped = RefTree::Const(v + delta);
        out = replace_at(&out, k, &bumped);
    }
    out
}

/// Tournament winner given the recorded draws: best fitness, ties to the
/// lowest index.
pub fn tournament_ref(fitness: &[f64], draws: &[usize]) -> usize {
    let mut best = draws[0];
    for &i in &draws[1..] {
        if fitness[i] < fitness[best] || (fitness[i] == fitness[best] && i < best) {
            best = i;
        }
    }
    best
}

/// Independent well-formedness check of prefix arrays: consume nodes
/// recursively by arity and require every recorded size to match.
pub fn is_well_formed_prefix(
    types: &[u8],
    values: &[f64],
    sizes: &[u32],
    n_inputs: usize,
    n_outputs: usize,
    fs: &FunctionSet,
) -> bool {
    fn consume(
        types: &[u8],
        values: &[f64],
        sizes: &[u32],
        at: usize,
        len: usize,
        n_inputs: usize,
        n_outputs: usize,
        fs: &FunctionSet,
    ) -> Option<usize> {
        if at >= len {
            return None;
        }
        let payload = values[at];
        let int_payload = || {
            (payload.is_finite() && payload >= 0.0 && payload.fract() == 0.0)
                .then_some(payload as usize)
        };
        let arity = match types[at] {
            0 => 0,
            1 => {
                let v = int_payload()?;
                if v >= n_inputs {
                    return None;
                }
                0
            }
            2 => {
                if fs.arity(int_payload()?) != Some(1) {
                    return None;
                }
                1
            }
            3 => {
                if fs.arity(int_payload()?) != Some(2) {
                    return None;
                }
                2
            }
            4 => {
                let v = int_payload()?;
                if v >= n_outputs {
                    return None;
                }
                2
            }
            _ => return None,
        };
        let mut end = at + 1;
        for _ in 0..arity {
            end = consume(types, values, sizes, end, len, n_inputs, n_outputs, fs)?;
        }
        if sizes[at] as usize != end - at {
            return None;
        }
        Some(end)
    }

    if sizes.is_empty() {
        return false;
    }
    let len = sizes[0] as usize;
    if len == 0 || len > types.len() {
        return false;
    }
    // Padding must be sentinel kinds and zero sizes.
    for i in len..types.len() {
        if types[i] != crate::tree::EMPTY || sizes[i] != 0 {
            return false;
        }
    }
    consume(types, values, sizes, 0, len, n_inputs, n_outputs, fs) == Some(len)
}

/// Random pointer tree for differential tests, independent of the engine's
/// generation logic.
pub fn random_ref_tree(
    rng: &mut RngStream,
    fs: &FunctionSet,
    n_inputs: usize,
    n_outputs: usize,
    max_depth: usize,
) -> RefTree {
    if max_depth <= 1 || rng.coin(0.3) {
        return if rng.coin(0.5) {
            RefTree::Const((rng.below(41) as f64 - 20.0) / 4.0)
        } else {
            RefTree::Var(rng.below(n_inputs))
        };
    }
    if n_outputs > 1 && rng.coin(0.2) {
        let out = rng.below(n_outputs);
        let left = random_ref_tree(rng, fs, n_inputs, n_outputs, max_depth - 1);
        let right = random_ref_tree(rng, fs, n_inputs, n_outputs, max_depth - 1);
        return RefTree::modi(out, left, right);
    }
    let id = rng.below(fs.len());
    match fs.arity(id).unwrap() {
        1 => RefTree::unary(id, random_ref_tree(rng, fs, n_inputs, n_outputs, max_depth - 1)),
        _ => {
            let left = random_ref_tree(rng, fs, n_inputs, n_outputs, max_depth - 1);
            let right = random_ref_tree(rng, fs, n_inputs, n_outputs, max_depth - 1);
            RefTree::binary(id, left, right)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RefTree {
        // +(sin(x1), 1.0) in prefix positions 0..=3
        RefTree::binary(0, RefTree::unary(4, RefTree::Var(1)), RefTree::Const(1.0))
    }

    #[test]
    fn prefix_indexing() {
        let t = sample();
        assert_eq!(subtree_at(&t, 0).node_count(), 4);
        assert_eq!(subtree_at(&t, 1), &RefTree::unary(4, RefTree::Var(1)));
        assert_eq!(subtree_at(&t, 2), &RefTree::Var(1));
        assert_eq!(subtree_at(&t, 3), &RefTree::Const(1.0));
        assert_eq!(ancestors_of(&t, 2), vec![0, 1]);
        assert_eq!(ancestors_of(&t, 0), Vec::<usize>::new());
    }

    #[test]
    fn replace_keeps_structure() {
        let t = sample();
        let replaced = replace_at(&t, 3, &RefTree::Var(0));
        assert_eq!(
            replaced,
            RefTree::binary(0, RefTree::unary(4, RefTree::Var(1)), RefTree::Var(0))
        );
    }

    #[test]
    fn exchange_rejects_on_overflow() {
        let t = sample();
        let big = RefTree::binary(0, sample(), sample());
        let (out, rejected) = exchange_ref(&t, 3, &big, 4);
        assert!(rejected);
        assert_eq!(out, t);
    }

    #[test]
    fn eval_matches_hand_computation() {
        let fs = FunctionSet::standard();
        let t = sample();
        let got = eval_ref(&t, &[0.0, 2.0], &fs, 1)[0];
        assert!((got - (2.0f64.sin() + 1.0)).abs() < 1e-15);
    }
}
