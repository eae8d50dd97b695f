mod common;

use common::*;
use proptest::prelude::*;
use supstab::NormIndex;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn multiplier_is_a_subgradient((seed, m, n, k) in small_instance(), loss in 0usize..3) {
        check_subgradient(seed, m, n, k, LOSSES[loss])?;
    }

    #[test]
    fn multiplier_signs_oppose_correlations((seed, m, n, k) in small_instance(), loss in 0usize..3) {
        check_sign_relation(seed, m, n, k, LOSSES[loss])?;
    }

    #[test]
    fn primal_dominates_every_dual_point(
        seed in any::<u64>(),
        m in 3usize..8,
        extra in 1usize..8,
        loss in 0usize..3,
        tau_frac in 0.05f64..0.95,
    ) {
        check_weak_duality(seed, m, m + extra, LOSSES[loss], tau_frac)?;
    }

    #[test]
    fn pseudo_inverse_satisfies_penrose(seed in any::<u64>(), rows in 1usize..9, cols in 1usize..9, r in 1usize..9) {
        check_moore_penrose(seed, rows, cols, r.min(rows).min(cols))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn curves_are_nested_in_threshold(seed in any::<u64>(), trials in 3usize..60) {
        check_nested(seed, trials)?;
    }

    #[test]
    fn active_set_reaches_the_optimum(
        (seed, m, n, k) in small_instance(),
        beta in prop_oneof![Just(1.1f64), Just(1.5), Just(2.0), Just(3.0), Just(10.0)],
    ) {
        check_active_set(seed, m, n, k, beta)?;
    }
}

#[test]
fn losses_cover_the_three_cases() {
    assert_eq!(LOSSES, [NormIndex::One, NormIndex::Two, NormIndex::Inf]);
}
