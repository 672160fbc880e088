mod common;

use common::{d2, dual_reference, primal_objective};
use ecg_abcde::trend::{
    auto_lambda, extract_keypoints, fit_with_policy, kink_indices, l1_trend_filter, lambda_max, LambdaBounds,
    LambdaPolicy, TrendOptions, DEFAULT_KINK_TOL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            level += rng.random_range(-1.0..1.0);
            level + rng.random_range(-0.5..0.5)
        })
        .collect()
}

#[test]
fn matches_dual_reference_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let n = rng.random_range(10..=50);
        let y = random_signal(&mut rng, n);
        for lambda in [0.1, 1.0, 10.0] {
            let fit = l1_trend_filter(&y, lambda, &TrendOptions::default()).unwrap();
            assert!(fit.converged);
            let (_, p_ref, gap) = dual_reference(&y, lambda, 1e-12, 200_000);
            let p = primal_objective(&y, &fit.x, lambda);
            // The reference is a certified upper bound within `gap` of optimal.
            assert!(p <= p_ref + 1e-9 * p_ref.max(1.0), "n={n} λ={lambda}: {p} vs {p_ref}");
            assert!(p >= p_ref - gap - 1e-9 * p_ref.max(1.0));
        }
    }
}

#[test]
fn piecewise_linear_input_is_recovered_kinks() {
    // A noiseless hinge has its kink at the hinge for moderate λ.
    let y: Vec<f64> = (0..40)
        .map(|i| if i < 20 { i as f64 } else { 40.0 - i as f64 })
        .collect();
    let fit = l1_trend_filter(&y, 0.5, &TrendOptions::default()).unwrap();
    let kinks: Vec<usize> = kink_indices(&fit.x, DEFAULT_KINK_TOL)
        .into_iter()
        .filter(|&k| k != 0 && k != 39)
        .collect();
    assert!(!kinks.is_empty());
    assert!(kinks.iter().all(|&k| (18..=21).contains(&k)), "{kinks:?}");
}

#[test]
fn keypoints_include_endpoints() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y = random_signal(&mut rng, 200);
    let fit = l1_trend_filter(&y, 2.0, &TrendOptions::default()).unwrap();
    let kp = extract_keypoints(&fit, DEFAULT_KINK_TOL);
    assert_eq!(kp.indices[0], 0);
    assert_eq!(*kp.indices.last().unwrap(), 199);
    assert!(kp.indices.windows(2).all(|w| w[0] < w[1]));
    for (i, v) in kp.indices.iter().zip(&kp.values) {
        assert_eq!(fit.x[*i], *v);
    }
}

#[test]
fn auto_lambda_lands_in_band_on_long_signal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let y: Vec<f64> = (0..2500)
        .map(|i| (i as f64 * 0.05).sin() + 0.05 * rng.random_range(-1.0..1.0))
        .collect();
    let opts = TrendOptions {
        tol: 1e-6,
        ..Default::default()
    };
    let found = auto_lambda(&y, 0.08, LambdaBounds::default(), &opts, DEFAULT_KINK_TOL).unwrap();
    assert!(found.bound.is_none());
    assert!((0.04..=0.16).contains(&found.density), "{}", found.density);
    let fit = fit_with_policy(&y, &LambdaPolicy::default(), &TrendOptions::default(), DEFAULT_KINK_TOL).unwrap();
    assert!(fit.converged);
    assert!(fit.stationarity_residual(&y) <= 1e-7);
}

#[test]
fn rejects_bad_input() {
    assert!(l1_trend_filter(&[1.0, 2.0], 1.0, &TrendOptions::default()).is_err());
    assert!(l1_trend_filter(&[1.0, 2.0, 3.0], -1.0, &TrendOptions::default()).is_err());
    assert!(l1_trend_filter(&[1.0, f64::NAN, 3.0], 1.0, &TrendOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certificate_and_feasibility(y in prop::collection::vec(-5.0f64..5.0, 3..60), lambda in 0.0f64..20.0) {
        let opts = TrendOptions::default();
        let fit = l1_trend_filter(&y, lambda, &opts).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(fit.dual.iter().all(|s| s.abs() <= 1.0 + 1e-9));
        prop_assert!(fit.stationarity_residual(&y) <= 10.0 * opts.tol);
    }

    #[test]
    fn above_lambda_max_is_affine(y in prop::collection::vec(-5.0f64..5.0, 3..60)) {
        let lmax = lambda_max(&y).unwrap();
        let fit = l1_trend_filter(&y, lmax * 1.01 + 1e-12, &TrendOptions::default()).unwrap();
        prop_assert!(d2(&fit.x).iter().all(|v| v.abs() <= 1e-6));
    }
}
