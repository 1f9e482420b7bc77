mod common;

use proptest::prelude::*;
use sds_core::metrics::{compute_diversity, shannon_entropy, top_k_mean, MetricsError};
use sds_core::search::{EngineConfig, SearchMode, SearchTrace};

#[test]
fn reference_entropies() {
    assert!((shannon_entropy(&[1; 8]) - 8f64.ln()).abs() < 1e-12);
    // -(0.5 ln 0.5 + 2 * 0.25 ln 0.25) = 1.5 ln 2
    let want = 1.5 * 2f64.ln();
    assert!((shannon_entropy(&[2, 1, 1]) - want).abs() < 1e-12);
    assert!((shannon_entropy(&[2, 1, 1]) - 1.0397).abs() < 1e-4);
    assert_eq!(shannon_entropy(&[5]), 0.0);
}

#[test]
fn empty_trace_is_an_error() {
    let t = SearchTrace::new("x".into(), SearchMode::Naive, 0);
    assert!(matches!(compute_diversity(&t), Err(MetricsError::EmptyTrace)));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn entropy_is_bounded(counts in prop::collection::vec(1usize..50, 1..30)) {
        let h = shannon_entropy(&counts);
        let max = (counts.len() as f64).ln();
        prop_assert!(h >= 0.0);
        prop_assert!(h <= max + 1e-12);
        let uniform = counts.iter().all(|&c| c == counts[0]);
        if uniform {
            prop_assert!((h - max).abs() < 1e-12);
        } else {
            prop_assert!(h < max);
        }
    }

    #[test]
    fn entropy_ignores_order(mut counts in prop::collection::vec(1usize..50, 1..30), k in 0usize..30) {
        let h = shannon_entropy(&counts);
        let k = k % counts.len();
        counts.rotate_left(k);
        prop_assert!((shannon_entropy(&counts) - h).abs() < 1e-12);
    }

    #[test]
    fn top10_rises_with_a_better_candidate(values in prop::collection::vec(0.0f64..100.0, 10..40), bump in 0.01f64..50.0) {
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let tenth = sorted[9];
        let mut more = values.clone();
        more.push(tenth + bump);
        prop_assert!(top_k_mean(&more, 10) > top_k_mean(&values, 10));
    }
}

#[test]
fn trace_metrics_ignore_entry_order() {
    let mut cfg = EngineConfig::default();
    cfg.search.max_iterations = 40;
    let mut trace = common::heuristic_search(&common::demo_library(), &cfg);
    let a = compute_diversity(&trace).unwrap();
    assert!(a.pv_rate.is_some_and(|r| (0.0..=1.0).contains(&r)));
    assert!((0.0..=1.0).contains(&a.top5_concentration));
    assert!(a.shannon_entropy <= (a.unique_topologies as f64).ln() + 1e-12);
    trace.entries.reverse();
    let b = compute_diversity(&trace).unwrap();
    assert_eq!(a.unique_topologies, b.unique_topologies);
    assert_eq!(a.surfaced, b.surfaced);
    assert!((a.shannon_entropy - b.shannon_entropy).abs() < 1e-12);
    assert!((a.top10_mean - b.top10_mean).abs() < 1e-9);
    assert!((a.top5_concentration - b.top5_concentration).abs() < 1e-12);
}

#[test]
fn naive_twice_gives_identical_rows() {
    let (n1, _) = common::diversity_direction(20, 4);
    let (n2, _) = common::diversity_direction(20, 4);
    assert_eq!(n1, n2);
}
