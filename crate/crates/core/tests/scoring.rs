use std::collections::BTreeMap;

use fairaudit_core::fairness::{
    adjusted_score, category_score, classify_tier, faas, overall_score, raw_fairness_scores, Tier,
};
use proptest::prelude::*;

fn levels(n: usize, values: &[f64]) -> BTreeMap<String, f64> {
    (0..n).map(|i| (format!("g{i}"), values[i])).collect()
}

#[test]
fn cascade_arithmetic() {
    assert!((faas(50.0, 0.5).unwrap() - 20.0).abs() < 1e-9);
    assert!((faas(100.0, 0.01).unwrap() - 40.0).abs() < 1e-9);
    assert_eq!(adjusted_score(80.0, 0.025), 40.0);
    let raw = raw_fairness_scores(&levels(4, &[0.31, 0.12, 0.2, 0.44])).unwrap();
    assert_eq!(raw["g1"], 100.0);
    assert_eq!(raw["g3"], 0.0);
    assert_eq!(classify_tier(50.0), Tier::ModeratelyFair);
}

fn wers() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..2.0, 2..7)
}

fn proportions(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

proptest! {
    #[test]
    fn faas_is_monotone(o1 in 0.01f64..100.0, o2 in 0.01f64..100.0, w1 in 1e-4f64..3.0, w2 in 1e-4f64..3.0) {
        if o1 < o2 {
            prop_assert!(faas(o1, w1).unwrap() < faas(o2, w1).unwrap());
        }
        if w1 < w2 {
            prop_assert!(faas(o1, w1).unwrap() > faas(o1, w2).unwrap());
        }
    }

    #[test]
    fn faas_order_equals_ratio_order(o1 in 0.01f64..100.0, o2 in 0.01f64..100.0, w1 in 1e-4f64..3.0, w2 in 1e-4f64..3.0) {
        let by_faas = faas(o1, w1).unwrap().partial_cmp(&faas(o2, w2).unwrap());
        let by_ratio = (o1 / w1).partial_cmp(&(o2 / w2));
        if ((o1 / w1) / (o2 / w2) - 1.0).abs() > 1e-12 {
            prop_assert_eq!(by_faas, by_ratio);
        }
    }

    #[test]
    fn raw_scores_are_scale_invariant(v in wers(), scale in 0.01f64..100.0) {
        let base = raw_fairness_scores(&levels(v.len(), &v)).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let other = raw_fairness_scores(&levels(v.len(), &scaled)).unwrap();
        for (k, s) in &base {
            prop_assert!((s - other[k]).abs() < 1e-9);
        }
        let lo = base.values().copied().fold(f64::INFINITY, f64::min);
        let hi = base.values().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(hi, 100.0);
        let distinct = v.iter().any(|x| *x != v[0]);
        prop_assert_eq!(lo, if distinct { 0.0 } else { 100.0 });
    }

    #[test]
    fn category_score_is_monotone(
        (scores, p, bump, idx) in (2usize..6).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..100.0, n),
            proportions(n),
            0.0f64..50.0,
            0..n,
        ))
    ) {
        let s = levels(scores.len(), &scores);
        let props = levels(p.len(), &p);
        let before = category_score(&s, &props).unwrap();
        let mut raised = scores.clone();
        raised[idx] = (raised[idx] + bump).min(100.0);
        let after = category_score(&levels(raised.len(), &raised), &props).unwrap();
        prop_assert!(after >= before - 1e-9);
        prop_assert!((0.0..=100.0 + 1e-9).contains(&before));
    }

    #[test]
    fn adjusted_score_is_continuous_at_threshold(score in 0.0f64..100.0) {
        prop_assert_eq!(adjusted_score(score, 0.05), score);
        prop_assert!((adjusted_score(score, 0.05 - 1e-12) - score).abs() < 1e-8);
        prop_assert!(adjusted_score(score, 0.01) <= score);
    }

    #[test]
    fn overall_is_a_weighted_mean(
        (s, w) in (1usize..5).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..100.0, n),
            prop::collection::vec(0.1f64..5.0, n),
        ))
    ) {
        let v = overall_score(&levels(s.len(), &s), &levels(w.len(), &w)).unwrap();
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }
}
