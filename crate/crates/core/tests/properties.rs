use proptest::prelude::*;

use srelab::analytics::solve_kappa;
use srelab::laws::CoefficientLaw;
use srelab::par::map_reps;
use srelab::rng::{make_stream, split};
use srelab::slowvary::{bruin_bn, truncated_mean, BnMode, Ell, PositiveLawY};
use srelab::sre::{chi_h, forward_path, perpetuity_sample, PathConfig, Record, U0Mode};
use srelab::stats::{quantile, sorted};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streams_are_pure_functions_of_seed_and_path(seed: u64, a in 0u64..1000, b in 0u64..1000) {
        let s = make_stream(seed);
        let x = split(&split(&s, a), b).rng().next_raw();
        let _ = split(&s, b).rng().next_raw();
        prop_assert_eq!(x, split(&split(&s, a), b).rng().next_raw());
    }

    #[test]
    fn uniforms_lie_in_unit_interval(seed: u64) {
        let mut r = make_stream(seed).rng();
        for _ in 0..1000 {
            let u = r.uniform();
            prop_assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn replication_map_ignores_thread_count(seed: u64, reps in 1u64..200, threads in 1usize..9) {
        let f = |i: u64, s: &srelab::rng::Stream| s.rng().next_raw() ^ i;
        let one = map_reps(&make_stream(seed), reps, Some(1), f).unwrap();
        let many = map_reps(&make_stream(seed), reps, Some(threads), f).unwrap();
        prop_assert_eq!(one, many);
    }

    #[test]
    fn constant_perpetuity_is_geometric(a in 0.0f64..0.9, b in 0.01f64..10.0, seed: u64) {
        let law = CoefficientLaw::constant(a, b).unwrap();
        let p = perpetuity_sample(&make_stream(seed), &law, 1e-14, 1_000_000);
        let exact = b / (1.0 - a);
        prop_assert!((p.value - exact).abs() <= 1e-12 * exact.max(1.0));
    }

    #[test]
    fn constant_forward_path_matches_closed_form(a in 0.0f64..2.0, b in 0.0f64..5.0, n in 1u64..40) {
        let law = CoefficientLaw::constant(a, b).unwrap();
        let cfg = PathConfig { n, u0: U0Mode::Zero, record: Record::Sums, lindeberg: None };
        let p = forward_path(&make_stream(0), &law, &cfg, 1.0).unwrap();
        let exact: f64 = (0..n as i32).map(|k| b * a.powi(k)).sum();
        prop_assert!((p.last - exact).abs() <= 1e-9 * exact.max(1.0));
    }

    #[test]
    fn clipping_is_odd_and_bounded(x in -1e6f64..1e6, h in 1e-3f64..1e3) {
        let c = chi_h(x, h);
        prop_assert!(c.abs() <= h);
        prop_assert_eq!(chi_h(-x, h), -c);
        if x.abs() <= h {
            prop_assert_eq!(c, x);
        }
    }

    #[test]
    fn lognormal_kappa_has_closed_form(mu in -2.0f64..-0.05, sigma in 0.2f64..2.0) {
        let law = CoefficientLaw::lognormal(mu, sigma, 1.0).unwrap();
        let k = solve_kappa(&law).unwrap();
        let exact = -2.0 * mu / (sigma * sigma);
        prop_assume!(exact < 50.0);
        prop_assert!((k - exact).abs() <= 1e-6 * exact, "{} vs {}", k, exact);
    }

    #[test]
    fn truncated_mean_is_nondecreasing(x in 1.0f64..1e12, f in 1.0f64..100.0) {
        for y in [PositiveLawY::StPetersburg, PositiveLawY::ParetoOne] {
            prop_assert!(truncated_mean(&y, x * f) >= truncated_mean(&y, x));
        }
    }

    #[test]
    fn constant_ell_normalizer_is_linear(c in 0.1f64..10.0, k in 2u32..15) {
        let n = 10u64.pow(k);
        let r = bruin_bn(&Ell::Const(c), n, BnMode::FixedPoint).unwrap();
        prop_assert!((r.b / (c * n as f64) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quantiles_are_monotone(mut x in prop::collection::vec(-1e3f64..1e3, 2..200), q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(quantile(&x, lo) <= quantile(&x, hi));
        x = sorted(&x);
        prop_assert!(quantile(&x, 0.0) == x[0] && quantile(&x, 1.0) == x[x.len() - 1]);
    }
}
