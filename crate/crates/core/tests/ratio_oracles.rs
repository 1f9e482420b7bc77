mod common;

use proptest::prelude::*;
use sds_core::ratio::loss::LossModel;
use sds_core::ratio::{optimize_ratios, LossConfig, OptimizerConfig};

#[test]
fn analytic_gradient_matches_central_differences() {
    let r = common::gradient_check(100, 1e-5, 2024);
    assert!(r.max_rel_err < 1e-4, "max relative error {:e}", r.max_rel_err);
    for (name, n) in ["ratio", "diff", "penalty", "swelling", "kinetics", "entropy"].iter().zip(r.active) {
        assert!(n > 0, "term {name} never active");
    }
}

#[test]
fn optimizer_reaches_grid_minimum_on_pairs() {
    for (i, c) in common::grid_oracle(20, 99).iter().enumerate() {
        assert!(
            c.optimized <= c.grid_min + 1e-3,
            "instance {i}: optimizer {} vs grid {} at phi {}",
            c.optimized,
            c.grid_min,
            c.grid_argmin
        );
    }
}

#[test]
fn softmax_stays_on_simplex() {
    common::prop_softmax_simplex(1000).unwrap();
}

#[test]
fn softmax_is_shift_invariant() {
    common::prop_softmax_shift(1000).unwrap();
}

#[test]
fn discretization_fixed_point() {
    common::prop_simplify_fixed_point(1000).unwrap();
}

#[test]
fn discretization_is_largest_remainder() {
    common::prop_largest_remainder(1000).unwrap();
}

#[test]
fn hamilton_oracle_sanity() {
    assert_eq!(common::hamilton(&[0.5417, 0.4583], 20), vec![11, 9]);
    assert_eq!(common::hamilton(&[1.0 / 3.0; 3], 20), vec![7, 7, 6]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn loss_trace_never_increases(seed in any::<u64>(), n in 2usize..=5) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (lib, topo) = common::random_instance(&mut rng, n);
        let cfg = common::all_terms_config(&mut rng);
        let r = optimize_ratios(&topo, &lib, &common::target(), &common::protect(), &cfg, &OptimizerConfig::default()).unwrap();
        for w in r.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        let sum: f64 = r.formulation.fractions.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(r.formulation.fractions.iter().all(|p| *p > 0.0));
    }

    #[test]
    fn optimizer_is_deterministic(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (lib, topo) = common::random_instance(&mut rng, 3);
        let cfg = LossConfig::default();
        let run = || optimize_ratios(&topo, &lib, &common::target(), &common::protect(), &cfg, &OptimizerConfig::default()).unwrap();
        prop_assert_eq!(run().formulation, run().formulation);
    }
}

#[test]
fn breakdown_total_equals_sum_of_terms() {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (lib, topo) = common::random_instance(&mut rng, 4);
    let cfg = common::all_terms_config(&mut rng);
    let m = LossModel::new(&topo, &lib, &common::target(), &common::protect(), &cfg).unwrap();
    let b = m.evaluate_fractions(&[0.1, 0.2, 0.3, 0.4]);
    assert_eq!(b.total(), b.ratio + b.diff + b.penalty + b.swelling + b.kinetics + b.entropy);
}
