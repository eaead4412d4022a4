use std::collections::{BTreeSet, HashMap};

use fairaudit_core::alignment::{align, corpus_wer, normalize_text, score_pair, wer, AlignError, AlignmentCounts};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Top-down memoized edit distance, written independently of the
/// library's bottom-up table.
fn edit_distance(r: &[u8], h: &[u8]) -> u32 {
    fn go(r: &[u8], h: &[u8], memo: &mut HashMap<(usize, usize), u32>) -> u32 {
        if r.is_empty() {
            return h.len() as u32;
        }
        if h.is_empty() {
            return r.len() as u32;
        }
        if let Some(&d) = memo.get(&(r.len(), h.len())) {
            return d;
        }
        let sub = go(&r[1..], &h[1..], memo) + u32::from(r[0] != h[0]);
        let del = go(&r[1..], h, memo) + 1;
        let ins = go(r, &h[1..], memo) + 1;
        let d = sub.min(del).min(ins);
        memo.insert((r.len(), h.len()), d);
        d
    }
    go(r, h, &mut HashMap::new())
}

/// Every (S, D, I) triple reachable by some alignment path.
fn all_alignments(r: &[u8], h: &[u8]) -> BTreeSet<(u32, u32, u32)> {
    fn go(r: &[u8], h: &[u8], acc: (u32, u32, u32), out: &mut BTreeSet<(u32, u32, u32)>) {
        match (r.split_first(), h.split_first()) {
            (None, None) => {
                out.insert(acc);
            }
            (Some((a, rr)), Some((b, hh))) => {
                let s = acc.0 + u32::from(a != b);
                go(rr, hh, (s, acc.1, acc.2), out);
                go(rr, h, (acc.0, acc.1 + 1, acc.2), out);
                go(r, hh, (acc.0, acc.1, acc.2 + 1), out);
            }
            (Some((_, rr)), None) => go(rr, h, (acc.0, acc.1 + 1, acc.2), out),
            (None, Some((_, hh))) => go(r, hh, (acc.0, acc.1, acc.2 + 1), out),
        }
    }
    let mut out = BTreeSet::new();
    go(r, h, (0, 0, 0), &mut out);
    out
}

fn random_seq(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> Vec<u8> {
    let len = rng.random_range(min_len..=max_len);
    (0..len).map(|_| rng.random_range(0..4u8)).collect()
}

#[test]
fn matches_memoized_oracle_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let r = random_seq(&mut rng, 1, 8);
        let h = random_seq(&mut rng, 0, 8);
        let c = align(&r, &h).unwrap();
        assert_eq!(c.errors(), edit_distance(&r, &h), "{r:?} vs {h:?}");
    }
}

#[test]
fn counts_are_an_optimal_enumerated_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let r = random_seq(&mut rng, 1, 5);
        let h = random_seq(&mut rng, 0, 5);
        let options = all_alignments(&r, &h);
        let best = options.iter().map(|(s, d, i)| s + d + i).min().unwrap();
        let c = align(&r, &h).unwrap();
        assert_eq!(c.errors(), best);
        assert!(options.contains(&(c.substitutions, c.deletions, c.insertions)));
    }
}

#[test]
fn worked_examples() {
    let abc = ["a", "b", "c"];
    let c = align(&abc, &abc).unwrap();
    assert_eq!(
        c,
        AlignmentCounts {
            substitutions: 0,
            deletions: 0,
            insertions: 0,
            matches: 3,
            ref_len: 3
        }
    );
    let c = align(&abc, &["a", "x", "c"]).unwrap();
    assert_eq!((c.substitutions, c.deletions, c.insertions, c.matches), (1, 0, 0, 2));
    let c = align(&["a", "b"], &[] as &[&str]).unwrap();
    assert_eq!((c.substitutions, c.deletions, c.insertions, c.matches), (0, 2, 0, 0));
    assert_eq!(align(&[] as &[&str], &["a"]), Err(AlignError::EmptyReference));

    assert_eq!(normalize_text("Hello, World!"), ["hello", "world"]);
    assert!(normalize_text("").is_empty());
    assert_eq!(normalize_text("it's 5 o'clock"), ["its", "5", "oclock"]);

    let one_sub = AlignmentCounts {
        substitutions: 1,
        matches: 2,
        ref_len: 3,
        ..Default::default()
    };
    assert!((wer(&one_sub).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let four_ins = AlignmentCounts {
        insertions: 4,
        matches: 2,
        ref_len: 2,
        ..Default::default()
    };
    assert_eq!(wer(&four_ins).unwrap(), 2.0);

    let a = score_pair("a", "w w w w w w w w w w", "w w w w w w w w w x", true).unwrap();
    let b = score_pair("b", "w w w w w w w w w w", "x x x w w w w w w w", true).unwrap();
    assert_eq!(corpus_wer([&a]).unwrap(), a.wer);
    assert!((corpus_wer([&a, &b]).unwrap() - 0.2).abs() < 1e-15);
}

fn token_seq(min: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, min..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn conservation(r in token_seq(1), h in token_seq(0)) {
        let c = align(&r, &h).unwrap();
        prop_assert_eq!(c.ref_len as usize, r.len());
        prop_assert_eq!(c.substitutions + c.deletions + c.matches, c.ref_len);
        prop_assert_eq!(c.hyp_len() as usize, h.len());
        prop_assert!(c.errors() as usize <= r.len() + h.len());
    }

    #[test]
    fn identity_has_no_errors(r in token_seq(1)) {
        prop_assert_eq!(align(&r, &r).unwrap().errors(), 0);
    }

    #[test]
    fn swapping_sequences_swaps_deletions_and_insertions(r in token_seq(1), h in token_seq(1)) {
        let fwd = align(&r, &h).unwrap();
        let back = align(&h, &r).unwrap();
        prop_assert_eq!(fwd.deletions, back.insertions);
        prop_assert_eq!(fwd.insertions, back.deletions);
        prop_assert_eq!(fwd.errors(), back.errors());
    }
}
