//! Weak laws of large numbers for SRE partial sums and i.i.d. sums.

use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, Level, Verdict};
use crate::analytics::{d_constant, fit_profile, g_a, solve_kappa};
use crate::error::{Error, Result};
use crate::laws::CoefficientLaw;
use crate::par::map_reps;
use crate::rng::Stream;
use crate::slowvary::{bruin_bn, pick_an, truncated_mean, BnMode, Ell, PositiveLawY};
use crate::sre::{forward_path, PathConfig};
use crate::stats::{bootstrap_difference, iqr_scale, median, median_ci, quantile_sorted};

/// How i.i.d. sums are normalized.
#[derive(Debug, Clone)]
pub enum Normalizer {
    /// `n ℓ(n)` with `ℓ(x) = E Y I(Y ≤ x)`.
    TruncatedMean,
    /// `b_n` solving `n ℓ(b_n) = b_n` for the given `ℓ`.
    Bruin(Ell),
}

#[derive(Debug, Clone)]
pub enum WllnSource {
    /// `Σ_{j≤n} U_j^κ / (n g_A(n) D)` from a stationary start.
    Sre { law: CoefficientLaw, kappa: Option<f64> },
    Iid { law: PositiveLawY, normalizer: Normalizer },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WllnSpec {
    pub n_grid: Vec<u64>,
    pub reps: u64,
    /// Relative tolerance on the median at the largest `n`.
    pub tolerance: f64,
    pub bootstrap: usize,
    pub d_reps: u64,
    pub profile_grid: Vec<f64>,
    /// Also sum `χ_h(Y_j)` with `h = a_n b_n / ln n` at the largest `n`
    /// (i.i.d. sources only).
    pub truncation_check: bool,
}

impl Default for WllnSpec {
    fn default() -> Self {
        WllnSpec {
            n_grid: vec![1 << 14, 1 << 18, 1 << 22],
            reps: 200,
            tolerance: 0.15,
            bootstrap: 2000,
            d_reps: 100_000,
            profile_grid: (0..=20).map(|i| 10f64.powf(2.0 + 0.1 * i as f64)).collect(),
            truncation_check: false,
        }
    }
}

/// Bootstrap comparison of the error `|median - 1|` at the largest and the
/// smallest `n`: the observed difference `err(last) - err(first)` and the
/// 5% and 95% quantiles of its bootstrap distribution.
pub fn error_trend(first: &[f64], last: &[f64], resamples: usize, stream: &Stream) -> (f64, f64, f64) {
    let err = |x: &[f64]| (median(x) - 1.0).abs();
    let reps = bootstrap_difference(first, last, err, resamples, &mut stream.rng());
    (
        err(last) - err(first),
        quantile_sorted(&reps, 0.05),
        quantile_sorted(&reps, 0.95),
    )
}

pub fn wlln_experiment(
    source: &WllnSource,
    spec: &WllnSpec,
    stream: &Stream,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let grid = &spec.n_grid;
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 2 {
        return Err(Error::Parameter("n_grid must be increasing with n >= 2".into()));
    }
    if spec.reps < 2 {
        return Err(Error::Parameter("reps must be >= 2".into()));
    }
    let mut report;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    match source {
        WllnSource::Sre { law, kappa } => {
            report = ExperimentReport::new(&format!("wlln/sre/{}", law.label()));
            let kappa = match kappa {
                Some(k) => *k,
                None => solve_kappa(law)?,
            };
            let profile = fit_profile(law, kappa, &spec.profile_grid, 0.5)?;
            let d = d_constant(law, kappa, &stream.split(0), spec.d_reps)?;
            report.flags.unreliable |= d.unreliable;
            report.push(Level::new("D", 0.0, d.value, d.std_error));
            for (k, &n) in grid.iter().enumerate() {
                let norm = n as f64 * g_a(&profile, n as f64)? * d.value;
                report.push(Level::exact("normalizer", n as f64, norm));
                let cfg = PathConfig::sums(n);
                let runs = map_reps(&stream.split(1).split(k as u64), spec.reps, threads, |_, s| {
                    forward_path(s, law, &cfg, kappa)
                })?;
                let mut w = Vec::with_capacity(runs.len());
                for r in runs {
                    let r = r?;
                    if r.overflow {
                        report.flags.overflow += 1;
                    } else {
                        w.push(r.sum_u_kappa / norm);
                    }
                }
                samples.push(w);
            }
        }
        WllnSource::Iid { law, normalizer } => {
            if !law.can_sample() {
                return Err(Error::Unsupported(format!("cannot sample {}", law.label())));
            }
            report = ExperimentReport::new(&format!("wlln/iid/{}", law.label()));
            let norm_of = |n: u64| -> Result<f64> {
                match normalizer {
                    Normalizer::TruncatedMean => Ok(n as f64 * truncated_mean(law, n as f64)),
                    Normalizer::Bruin(ell) => Ok(bruin_bn(ell, n, BnMode::FixedPoint)?.b),
                }
            };
            let last_n = *grid.last().expect("non-empty");
            let clip = if spec.truncation_check {
                let b_last = norm_of(last_n)?;
                let schedule = pick_an(law, |n| match normalizer {
                    Normalizer::TruncatedMean => n * truncated_mean(law, n),
                    Normalizer::Bruin(ell) => bruin_bn(ell, n as u64, BnMode::FixedPoint).map_or(f64::NAN, |r| r.b),
                })?;
                let ln_n = (last_n as f64).ln();
                let h = schedule.a(last_n as f64) * b_last / ln_n;
                report.push(Level::exact("a_n", last_n as f64, schedule.a(last_n as f64)));
                report.push(Level::exact("clip_level", last_n as f64, h));
                Some(h)
            } else {
                None
            };
            for (k, &n) in grid.iter().enumerate() {
                let norm = norm_of(n)?;
                if !(norm > 0.0) {
                    return Err(Error::Domain(format!("normalizer vanishes at n = {n}")));
                }
                report.push(Level::exact("normalizer", n as f64, norm));
                let h = if n == last_n { clip } else { None };
                let runs = map_reps(&stream.split(1).split(k as u64), spec.reps, threads, |_, s| {
                    let mut rng = s.rng();
                    let (mut sum, mut clipped) = (0.0, 0.0);
                    for _ in 0..n {
                        let y = law.sample(&mut rng);
                        sum += y;
                        if let Some(h) = h {
                            clipped += y.min(h);
                        }
                    }
                    (sum / norm, clipped / norm)
                })?;
                let w: Vec<f64> = runs.iter().map(|r| r.0).collect();
                if h.is_some() {
                    let wc: Vec<f64> = runs.iter().map(|r| r.1).collect();
                    truncation_verdict(&mut report, n, &w, &wc);
                }
                report.flags.overflow += w.iter().filter(|v| !v.is_finite()).count() as u64;
                samples.push(w.into_iter().filter(|v| v.is_finite()).collect());
            }
        }
    }

    for (&n, w) in grid.iter().zip(&samples) {
        if w.len() < 2 {
            return Err(Error::Numeric(format!("fewer than two usable replications at n = {n}")));
        }
        let med = median(w);
        let (lo, hi) = median_ci(w);
        let level = n as f64;
        report.push(Level {
            series: "median".into(),
            level,
            value: med,
            std_error: (hi - lo) / 3.919_927_969_080_108,
            ci_lo: lo,
            ci_hi: hi,
        });
        report.push(Level::exact("iqr_scale", level, iqr_scale(w)));
        report.push(Level::exact("rel_error", level, (med - 1.0).abs()));
    }
    let last = samples.last().expect("non-empty");
    let err = (median(last) - 1.0).abs();
    report.verdict(Verdict::check(
        "median_within_tolerance",
        format!("|median - 1| <= {}", spec.tolerance),
        err,
        err <= spec.tolerance,
    ));
    if samples.len() >= 2 {
        let (diff, lower, upper) = error_trend(&samples[0], last, spec.bootstrap, &stream.split(2));
        report.push(Level {
            series: "error_difference".into(),
            level: *grid.last().expect("non-empty") as f64,
            value: diff,
            std_error: (upper - lower) / 3.289_707_253_902_945,
            ci_lo: lower,
            ci_hi: upper,
        });
        report.verdict(Verdict::check(
            "error_trend",
            "5% bootstrap quantile of err(n_max) - err(n_min) <= 0",
            lower,
            lower <= 0.0,
        ));
    }
    report.verdict(Verdict::check(
        "no_overflow",
        "0",
        report.flags.overflow as f64,
        report.flags.overflow == 0,
    ));
    Ok(report.finalize())
}

fn truncation_verdict(report: &mut ExperimentReport, n: u64, w: &[f64], clipped: &[f64]) {
    let (lo, hi) = median_ci(w);
    let se = (hi - lo) / 3.919_927_969_080_108;
    let shift = (median(clipped) - median(w)).abs();
    report.push(Level::exact("median_clipped", n as f64, median(clipped)));
    report.verdict(Verdict::check(
        "truncation_equivalence",
        format!("|median shift| < 3 SE = {}", 3.0 * se),
        shift,
        shift < 3.0 * se,
    ));
}
