use fsreg::estimators::{expected_error, observe, realized_error, regularize, sample_noise, ObservationCoefficients};
use fsreg::math::logspace;
use fsreg::selection::{critical_point_residual, oracle_lambda, LambdaGrid};
use fsreg::series::{series_a, series_b};
use fsreg::spectrum::{
    build_spectrum, build_true_function, CoefficientLaw, DecayFamily, PerturbationBounds, Spectrum, TrueFunction,
};
use proptest::prelude::*;

fn setup(n: usize, theta: f64, r: f64, seed: u64) -> (Spectrum, TrueFunction) {
    let sp = build_spectrum(DecayFamily::Exponential { theta }, n, PerturbationBounds::UNIT, seed).unwrap();
    let tf = build_true_function(
        &sp,
        r,
        PerturbationBounds::UNIT,
        seed + 1,
        vec![],
        CoefficientLaw::Rademacher,
    )
    .unwrap();
    (sp, tf)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_factors_lie_in_unit_interval(
        n in 1usize..40, s in 0.0f64..3.0, log_l in -20.0f64..2.0, seed in any::<u64>(),
    ) {
        let (sp, tf) = setup(n, 1.5, 1.2, seed);
        let noise = sample_noise(0.1, n, seed).unwrap();
        let obs = observe(&sp, &tf, &noise).unwrap();
        let est = regularize(&sp, &obs, s, 10f64.powf(log_l)).unwrap();
        for ((a, b), lam) in est.a.iter().zip(&obs.b).zip(sp.eigenvalues()) {
            if *b != 0.0 {
                let f = lam * a / b;
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            }
        }
    }

    #[test]
    fn estimates_shrink_as_lambda_grows(
        n in 1usize..30, s in 0.0f64..3.0, l1 in -15.0f64..1.0, dl in 0.01f64..5.0, seed in any::<u64>(),
    ) {
        let (sp, tf) = setup(n, 1.5, 1.2, seed);
        let obs = observe(&sp, &tf, &sample_noise(0.05, n, seed ^ 7).unwrap()).unwrap();
        let small = regularize(&sp, &obs, s, 10f64.powf(l1)).unwrap();
        let large = regularize(&sp, &obs, s, 10f64.powf(l1 + dl)).unwrap();
        for (a, b) in small.a.iter().zip(&large.a) {
            prop_assert!(b.abs() <= a.abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn error_splits_into_variance_and_bias(
        s in 0.0f64..3.0, log_l in -12.0f64..1.0, log_sigma in -7.0f64..0.0, seed in any::<u64>(),
    ) {
        let (sp, tf) = setup(50, 1.5, 1.2, seed);
        let (l, sigma) = (10f64.powf(log_l), 10f64.powf(log_sigma));
        let e = expected_error(&sp, &tf, sigma, s, l).unwrap();
        let via = sigma * sigma * series_a(&sp, s, l).unwrap() + l * l * series_b(&sp, &tf, s, l).unwrap();
        prop_assert!((e / via - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realized_error_is_nonnegative_and_zero_without_noise_at_zero_lambda(
        n in 1usize..30, s in 0.0f64..3.0, seed in any::<u64>(),
    ) {
        let (sp, tf) = setup(n, 1.0, 1.0, seed);
        let quiet = sample_noise(0.0, n, seed).unwrap();
        prop_assert_eq!(realized_error(&sp, &tf, &quiet, s, 0.0).unwrap(), 0.0);
        let noisy = sample_noise(0.3, n, seed).unwrap();
        prop_assert!(realized_error(&sp, &tf, &noisy, s, 1e-3).unwrap() >= 0.0);
    }

    #[test]
    fn oracle_single_mode_scales_with_sigma_squared(log_sigma in -3.0f64..-1.0) {
        let sp = Spectrum::explicit(vec![1.0]).unwrap();
        let tf = TrueFunction::from_coefficients(vec![1.0], vec![], 1.0).unwrap();
        let grid = LambdaGrid::new(1e-10, 1e2, 121).unwrap();
        let sigma = 10f64.powf(log_sigma);
        let a = oracle_lambda(&sp, &tf, sigma, 0.0, &grid).unwrap().lambda_star;
        let b = oracle_lambda(&sp, &tf, 2.0 * sigma, 0.0, &grid).unwrap().lambda_star;
        prop_assert!((b / a / 4.0 - 1.0).abs() < 0.05);
    }
}

#[test]
fn oracle_is_optimal_on_its_grid() {
    let (sp, tf) = setup(100, 1.5, 1.2, 3);
    let grid = LambdaGrid::new(1e-20, 1e1, 121).unwrap();
    for s in [0.0, 1.0, 2.5] {
        let r = oracle_lambda(&sp, &tf, 1e-3, s, &grid).unwrap();
        let star = expected_error(&sp, &tf, 1e-3, s, r.lambda_star).unwrap();
        for l in grid.points() {
            assert!(star <= expected_error(&sp, &tf, 1e-3, s, l).unwrap());
        }
    }
}

#[test]
fn critical_point_residual_brackets_the_oracle() {
    let (sp, tf) = setup(120, 1.5, 1.2, 5);
    let grid = LambdaGrid::new(1e-20, 1e1, 151).unwrap();
    for (s, sigma) in [(1.0, 1e-3), (0.0, 1e-5), (2.0, 1e-2)] {
        let r = oracle_lambda(&sp, &tf, sigma, s, &grid).unwrap();
        assert!(!r.diagnostics.at_boundary);
        let k = r.diagnostics.grid_index;
        let pts = grid.points();
        let left = critical_point_residual(&sp, &tf, sigma, s, pts[k - 1]).unwrap();
        let right = critical_point_residual(&sp, &tf, sigma, s, pts[k + 1]).unwrap();
        assert!(left < 0.0 && right > 0.0, "{left} {right}");
        // bisection on the residual agrees with the refined minimizer
        let (mut a, mut b) = (pts[k - 1].ln(), pts[k + 1].ln());
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if critical_point_residual(&sp, &tf, sigma, s, m.exp()).unwrap() < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let root = 0.5 * (a + b);
        assert!((root - r.lambda_star.ln()).abs() <= 1e-3 * root.abs().max(1.0));
    }
}

#[test]
fn zero_data_gives_zero_estimate() {
    let sp = Spectrum::explicit(logspace(1.0, 1e-6, 7)).unwrap();
    let obs = ObservationCoefficients::from_values(vec![0.0; 7]);
    let est = regularize(&sp, &obs, 1.0, 1e-3).unwrap();
    assert!(est.a.iter().all(|a| *a == 0.0));
}
