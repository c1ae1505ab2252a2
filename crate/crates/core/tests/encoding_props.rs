//! Structural properties of the flat encoding, checked against the
//! pointer-tree oracle and by exhaustive enumeration of small arrays.

use proptest::prelude::*;
use tgp_core::reference::{ancestors_of, is_well_formed_prefix, random_ref_tree, subtree_at};
use tgp_core::rng::RngStream;
use tgp_core::tree::{
    ancestors, decode_tree, encode_tree, subtree_span, validate_slice, EncodingConfig, Tree,
    EMPTY,
};
use tgp_core::FunctionSet;

fn cfg() -> EncodingConfig {
    let mut c = EncodingConfig::new(256, 3, 2);
    c.const_range = (-5.0, 5.0);
    c
}

#[test]
fn random_round_trip() {
    let fs = FunctionSet::standard();
    let c = cfg();
    let mut rng = RngStream::from_seed(0xE0C0DE);
    for case in 0..2000 {
        let t = random_ref_tree(&mut rng, &fs, c.n_inputs, c.n_outputs, 7);
        let enc = encode_tree(&t, &c, &fs).unwrap();
        assert!(
            validate_slice(enc.as_slice(), &c, &fs).is_empty(),
            "case {case} fails validation"
        );
        let back = decode_tree(enc.as_slice(), &fs).unwrap();
        assert_eq!(back, t, "case {case} does not round-trip");
    }
}

#[test]
fn spans_and_ancestors_match_pointer_oracle() {
    let fs = FunctionSet::standard();
    let c = cfg();
    let mut rng = RngStream::from_seed(0xA11CE);
    for _ in 0..500 {
        let t = random_ref_tree(&mut rng, &fs, c.n_inputs, c.n_outputs, 7);
        let enc = encode_tree(&t, &c, &fs).unwrap();
        let s = enc.as_slice();
        for k in 0..s.len() {
            let (start, end) = subtree_span(s, k).unwrap();
            assert_eq!(start, k);
            assert_eq!(end - start, subtree_at(&t, k).node_count());
            assert_eq!(ancestors(s, k).unwrap(), ancestors_of(&t, k));
        }
    }
}

#[test]
fn validator_agrees_with_enumeration_oracle() {
    let fs = FunctionSet::standard();
    let c = EncodingConfig::new(3, 2, 1);
    // (kind, value) palette covering legal nodes, out-of-range payloads,
    // wrong-arity function ids, and the padding sentinel.
    let palette: &[(u8, f64)] = &[
        (0, 1.5),
        (1, 0.0),
        (1, 5.0),
        (1, 0.25),
        (2, 4.0),
        (2, 0.0),
        (3, 0.0),
        (3, 4.0),
        (4, 0.0),
        (EMPTY, f64::NAN),
    ];
    let sizes_range = 0u32..=4;
    let mut accepted = 0usize;
    for &(t0, v0) in palette {
        for &(t1, v1) in palette {
            for &(t2, v2) in palette {
                for s0 in sizes_range.clone() {
                    for s1 in sizes_range.clone() {
                        for s2 in sizes_range.clone() {
                            let types = [t0, t1, t2];
                            let values = [v0, v1, v2];
                            let sizes = [s0, s1, s2];
                            let slice = tgp_core::tree::TreeSlice::new(&types, &values, &sizes);
                            let validator_ok = validate_slice(slice, &c, &fs).is_empty();
                            let oracle_ok = is_well_formed_prefix(
                                &types,
                                &values,
                                &sizes,
                                c.n_inputs,
                                c.n_outputs,
                                &fs,
                            );
                            assert_eq!(
                                validator_ok, oracle_ok,
                                "disagreement on types {types:?} values {values:?} sizes {sizes:?}"
                            );
                            if validator_ok {
                                accepted += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    assert!(accepted > 0, "enumeration accepted nothing");
}

#[test]
fn length_counts_non_empty_positions() {
    let fs = FunctionSet::standard();
    let c = cfg();
    let mut rng = RngStream::from_seed(0x5EED);
    for _ in 0..500 {
        let t = random_ref_tree(&mut rng, &fs, c.n_inputs, c.n_outputs, 6);
        let enc = encode_tree(&t, &c, &fs).unwrap();
        let s = enc.as_slice();
        let non_empty = s.types.iter().filter(|&&k| k != EMPTY).count();
        assert_eq!(s.len(), non_empty);
    }
}

proptest! {
    // Every subtree segment of a valid slice is itself a valid slice.
    #[test]
    fn self_similarity(seed in any::<u64>()) {
        let fs = FunctionSet::standard();
        let c = cfg();
        let mut rng = RngStream::from_seed(seed);
        let t = random_ref_tree(&mut rng, &fs, c.n_inputs, c.n_outputs, 6);
        let enc = encode_tree(&t, &c, &fs).unwrap();
        let s = enc.as_slice();
        for k in 0..s.len() {
            let sub = s.subtree(k).unwrap();
            let owned = Tree::from_parts(
                &sub.types[..sub.len()],
                &sub.values[..sub.len()],
                &sub.sizes[..sub.len()],
                c.max_len,
            ).unwrap();
            prop_assert!(validate_slice(owned.as_slice(), &c, &fs).is_empty());
        }
    }

    // Text round trip: print then parse reproduces the tree.
    #[test]
    fn infix_text_round_trip(seed in any::<u64>()) {
        let fs = FunctionSet::with_min_max();
        let c = cfg();
        let mut rng = RngStream::from_seed(seed);
        let t = random_ref_tree(&mut rng, &fs, c.n_inputs, c.n_outputs, 6);
        let text = tgp_core::text::ref_to_string(&t, &fs);
        let parsed = tgp_core::text::parse_infix(&text, &fs).unwrap();
        prop_assert_eq!(parsed, t);
    }
}
