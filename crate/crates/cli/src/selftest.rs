//! Fast checks with exact or degenerate answers across every module.

use srelab::analytics::{d_constant, fit_profile, g_a, h_a, kesten_constant, psi, SlowVariationProfile};
use srelab::laws::{build_kevei_law, Atoms, check_conditions, garch_to_sre, Check, CoefficientLaw, NoiseLaw, PairSpec};
use srelab::limitlab::{
    covariance_decay_probe, fclt_experiment, gof_normal, wlln_experiment, CovSpec, ExperimentReport, FcltSpec,
    GarchParams, Normalizer, Verdict, WllnSource, WllnSpec,
};
use srelab::rng::{make_stream, split};
use srelab::slowvary::{
    bruin_bn, pick_an, probe_condition, tail_prob, truncated_mean, BnMode, Ell, PositiveLawY, ProbeVerdict, Which,
};
use srelab::sre::{chi_h, forward_path, garch_path, perpetuity_sample, PathConfig, Record, U0Mode};
use srelab::stats::mean_se;
use srelab::Result;

type SelfCheck = (&'static str, fn(u64) -> Result<bool>);

fn first(seed: u64, n: usize) -> Vec<u64> {
    let mut r = make_stream(seed).rng();
    (0..n).map(|_| r.next_raw()).collect()
}

fn rng_checks(_: u64) -> Result<bool> {
    let s = make_stream(42);
    let before = split(&s, 5).rng().next_raw();
    let _ = split(&s, 7).rng().next_raw();
    let after = split(&s, 5).rng().next_raw();
    let nested = split(&split(&s, 1), 1).rng().next_raw() != split(&s, 1).rng().next_raw();
    let zero = first(0, 4).iter().any(|&v| v != 0);
    Ok(first(42, 100) == first(42, 100) && before == after && nested && zero)
}

fn noise_and_coefficients(seed: u64) -> Result<bool> {
    let mut rng = make_stream(seed).rng();
    let z: Vec<f64> = (0..1_000_000).map(|_| {
        let v = NoiseLaw::standard_normal().sample(&mut rng);
        v * v
    }).collect();
    let (m, se) = mean_se(&z);
    let point = Atoms::new(&[(0.0, 1.0)])?;
    let all_zero = (0..100).all(|_| point.sample(&mut rng) == 0.0);
    let ln = CoefficientLaw::lognormal(-0.5, 1.0, 1.0)?;
    let la: Vec<f64> = (0..100_000).map(|_| ln.sample(&mut rng).0.ln()).collect();
    let (lm, lse) = mean_se(&la);
    let fd = CoefficientLaw::finite_discrete(&[
        PairSpec { a: 0.5, b: 1.0, p: 0.6 },
        PairSpec { a: 1.5, b: 1.0, p: 0.4 },
    ])?;
    let hits = (0..100_000).filter(|_| fd.sample(&mut rng).0 == 0.5).count() as f64 / 1e5;
    let g = garch_to_sre(1.0, 0.0, 0.5, NoiseLaw::three_point())?;
    let degenerate = (0..100).all(|_| g.sample(&mut rng) == (0.5, 1.0));
    Ok((m - 1.0).abs() < 4.0 * se
        && all_zero
        && (lm + 0.5).abs() < 4.0 * lse
        && (hits - 0.6).abs() < 4.0 * (0.24f64 / 1e5).sqrt()
        && degenerate)
}

fn kevei_and_conditions(_: u64) -> Result<bool> {
    let rejected = build_kevei_law(0.5, 1.0, 1.0, 0.5, 1.0).is_err();
    let beta0 = CoefficientLaw::garch(0.0, 1.0, 0.0, NoiseLaw::three_point())?;
    Ok(rejected && check_conditions(&beta0, None).b_nonzero.status == Check::Fail)
}

fn perpetuities_and_paths(seed: u64) -> Result<bool> {
    let s = make_stream(seed);
    let half = CoefficientLaw::constant(0.5, 1.0)?;
    let p = perpetuity_sample(&s, &half, 1e-12, 1_000_000);
    let zero = CoefficientLaw::constant(0.0, 3.0)?;
    let z = perpetuity_sample(&s, &zero, 1e-12, 1_000_000);
    let cfg = PathConfig {
        n: 3,
        u0: U0Mode::Zero,
        record: Record::Full,
        lindeberg: None,
    };
    let path = forward_path(&s, &half, &cfg, 1.0)?;
    let again = forward_path(&s, &half, &cfg, 1.0)?;
    let g_cfg = PathConfig {
        n: 20,
        u0: U0Mode::Fixed(3.0),
        record: Record::Full,
        lindeberg: None,
    };
    let g = garch_path(&s, 1.0, 0.0, 0.5, &NoiseLaw::standard_normal(), &g_cfg)?;
    let closed = g
        .full
        .as_ref()
        .expect("full path")
        .iter()
        .enumerate()
        .all(|(j, &(_, s2))| (s2 - (2.0 + 0.5f64.powi(j as i32 + 1))).abs() < 1e-12);
    Ok((p.value - 2.0).abs() < 1e-11
        && z.value == 3.0
        && path.last == 1.75
        && path.sum_u_kappa == 4.25
        && path == again
        && closed
        && chi_h(1.0, 2.0) == 1.0)
}

fn analytics_checks(seed: u64) -> Result<bool> {
    let two = CoefficientLaw::constant(2.0, 1.0)?;
    let small = CoefficientLaw::finite_discrete(&[
        PairSpec { a: 0.2, b: 1.0, p: 0.5 },
        PairSpec { a: 1.0, b: 2.0, p: 0.5 },
    ])?;
    let bounded = CoefficientLaw::finite_discrete(&[
        PairSpec { a: 0.5, b: 1.0, p: 0.5 },
        PairSpec { a: 1.5, b: 3.0, p: 0.5 },
    ])?;
    let grid: Vec<f64> = (0..=20).map(|i| 10f64.powf(0.2 * i as f64)).collect();
    let finite = matches!(fit_profile(&bounded, 1.0, &grid, 0.5)?, SlowVariationProfile::Finite { .. });
    let flat = SlowVariationProfile::RegVar {
        rho: 0.0,
        ell: Ell::Const(1.0),
    };
    let d = d_constant(&bounded, 1.0, &make_stream(seed), 0)?;
    let k = kesten_constant(2.0, 1.0, 0.5, Check::Unknown)?;
    Ok(psi(&two, 3.0)?.value == 8.0
        && [1.0, 10.0, 1e3].iter().all(|&x| h_a(&small, 1.0, x) == 0.0)
        && finite
        && (g_a(&flat, 2f64.exp())? - 2.0).abs() < 1e-12
        && d.value == 2.0
        && k.c_prime == 4.0)
}

fn slowvary_checks(_: u64) -> Result<bool> {
    let five = PositiveLawY::bounded(&[(5.0, 1.0)])?;
    let mixed = PositiveLawY::bounded(&[(1.0, 0.5), (4.0, 0.5)])?;
    let ones = (2..8).all(|k| {
        let n = 10u64.pow(k);
        [BnMode::FixedPoint, BnMode::Direct]
            .iter()
            .all(|&m| bruin_bn(&Ell::Const(1.0), n, m).is_ok_and(|r| (r.b / n as f64 - 1.0).abs() < 1e-9))
    });
    let schedule = pick_an(&mixed, |n| n * truncated_mean(&mixed, n))?;
    let probes_vanish = schedule.probes.iter().all(|p| p.2 == 0.0);
    let grid = [30.0, 60.0, 90.0, 120.0];
    let constant = [Which::SelfComposed, Which::LogShifted]
        .iter()
        .all(|&w| probe_condition(&Ell::Const(3.0), w, &grid, 0.05).is_ok_and(|r| r.verdict == ProbeVerdict::ConvergesTo1));
    Ok(truncated_mean(&five, 10.0) == 5.0 && tail_prob(&mixed, 5.0) == 0.0 && ones && probes_vanish && constant)
}

fn limitlab_checks(seed: u64) -> Result<bool> {
    let s = make_stream(seed);
    let src = WllnSource::Iid {
        law: PositiveLawY::bounded(&[(2.5, 1.0)])?,
        normalizer: Normalizer::TruncatedMean,
    };
    let spec = WllnSpec {
        n_grid: vec![10, 100, 1000],
        reps: 20,
        ..Default::default()
    };
    let w = wlln_experiment(&src, &spec, &s.split(0), None)?;
    let degenerate = w.series("median").iter().all(|l| (l.value - 1.0).abs() < 1e-12);
    let iid = CoefficientLaw::finite_discrete(&[
        PairSpec { a: 0.0, b: 1.0, p: 0.5 },
        PairSpec { a: 0.0, b: 4.0, p: 0.5 },
    ])?;
    let cov = covariance_decay_probe(
        &iid,
        Some(1.0),
        &CovSpec {
            h: 2.0,
            h2: None,
            max_lag: 5,
            reps: 20_000,
            ..Default::default()
        },
        &s.split(1),
        None,
    )?;
    let quiet = cov.find("lags_within_3se", 2.0).is_some_and(|l| l.value == 5.0);
    let (_, zero) = gof_normal(&[0.0; 100], 1.0)?;
    let mut rng = s.split(2).rng();
    let x: Vec<f64> = (0..20_000).map(|_| NoiseLaw::standard_normal().sample(&mut rng)).collect();
    let (_, quarter) = gof_normal(&x, 4.0)?;
    let fclt = fclt_experiment(
        &GarchParams {
            beta: 1.0,
            lambda: 1.0,
            delta: 0.0,
        },
        &NoiseLaw::three_point(),
        &FcltSpec {
            n: 1 << 18,
            reps: 1000,
            ..Default::default()
        },
        &s.split(3),
        None,
    )?;
    let brownian = fclt.rule("scale_ratio").is_some_and(|v| v.status == srelab::limitlab::Status::Pass);
    Ok(degenerate && quiet && zero == 0.0 && (quarter - 0.5).abs() < 0.02 && brownian)
}

const CHECKS: &[SelfCheck] = &[
    ("rng_determinism_and_paths", rng_checks),
    ("noise_and_coefficient_laws", noise_and_coefficients),
    ("kevei_rejection_and_conditions", kevei_and_conditions),
    ("perpetuities_and_paths", perpetuities_and_paths),
    ("analytics_closed_forms", analytics_checks),
    ("slowvary_degenerate_cases", slowvary_checks),
    ("limitlab_degenerate_cases", limitlab_checks),
];

/// Run every check; an error inside a check counts as a failure.
pub fn selftest(seed: u64) -> ExperimentReport {
    let mut rep = ExperimentReport::new("selftest");
    for (name, check) in CHECKS {
        match check(seed) {
            Ok(ok) => rep.verdict(Verdict::check(name, "exact or within 4 SE", ok as u8 as f64, ok)),
            Err(e) => {
                rep.note(format!("{name}: {e}"));
                rep.verdict(Verdict::check(name, "exact or within 4 SE", 0.0, false));
            }
        }
    }
    rep.finalize()
}
