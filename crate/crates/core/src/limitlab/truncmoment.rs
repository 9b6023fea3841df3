//! `ℓ(t) = E U^κ I(U ≤ t)` against its normalizer `D g_A(t)`.

use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, Level, Verdict};
use crate::analytics::{d_constant, fit_profile, g_a, solve_kappa, SlowVariationProfile};
use crate::error::{Error, Result};
use crate::laws::{CoefficientLaw, SizeBiased};
use crate::numeric::ols;
use crate::par::map_reps;
use crate::rng::{Stream, StreamRng};
use crate::sre::{perpetuity_draw, DEFAULT_MAX_DEPTH, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Mean of `U^κ I(U ≤ t)` over perpetuity draws.
    Plain,
    /// Size-biased spine decomposition (needs `κ = 1`).
    Spine,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruncMomentSpec {
    pub t_grid: Vec<f64>,
    pub reps: u64,
    pub estimator: Estimator,
    pub d_reps: u64,
    /// Accepted band for `ℓ̂(t)/(D g_A(t))` at the largest `t` (finite branch).
    pub ratio_band: (f64, f64),
    /// Tolerance on the fitted growth exponent in `ln t` (regularly varying branch).
    pub exponent_tol: f64,
    /// Grid for fitting `h_A(x) = x^ρ ℓ(x)`.
    pub profile_grid: Vec<f64>,
}

impl Default for TruncMomentSpec {
    fn default() -> Self {
        TruncMomentSpec {
            t_grid: (5..=20).step_by(5).map(|m| 2f64.powi(m)).collect(),
            reps: 100_000,
            estimator: Estimator::Both,
            d_reps: 100_000,
            ratio_band: (0.85, 1.05),
            exponent_tol: 0.1,
            profile_grid: (0..=20).map(|i| 10f64.powf(2.0 + 0.1 * i as f64)).collect(),
        }
    }
}

/// One spine replication: adds `Σ_k B_k I(U^{(k)} ≤ t)` into `acc` for
/// every `t` with `ln t` in `log_t` (ascending). `U^{(k)} = P_k + Π_k U'_k`
/// where the prefix pairs are drawn size-biased and `U'_k` is a fresh
/// perpetuity whose first `B` is `B_k`. Returns `true` if the step cap hit.
fn spine_replication(
    rng: &mut StreamRng,
    law: &CoefficientLaw,
    tilted: &SizeBiased,
    log_t: &[f64],
    acc: &mut [f64],
) -> (bool, u64) {
    let log_max = *log_t.last().expect("non-empty grid");
    let mut log_prefix = f64::NEG_INFINITY;
    let mut log_prod = 0.0f64;
    let mut flagged = 0u64;
    for _ in 0..DEFAULT_MAX_DEPTH {
        if log_prefix > log_max {
            return (false, flagged);
        }
        let tail = perpetuity_draw(rng, law, DEFAULT_TOL, DEFAULT_MAX_DEPTH);
        flagged += tail.flagged() as u64;
        let log_u = log_add(log_prefix, log_prod + tail.value.ln());
        let start = log_t.partition_point(|&l| l < log_u);
        for a in &mut acc[start..] {
            *a += tail.first_b;
        }
        let (log_a, b) = tilted.sample_log(rng);
        log_prefix = log_add(log_prefix, log_prod + b.ln());
        log_prod += log_a;
    }
    (true, flagged)
}

#[inline]
fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn mean_se_columns(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    let k = rows[0].len();
    (0..k)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
            (m, (v / n).sqrt())
        })
        .collect()
}

pub fn truncated_moment_experiment(
    law: &CoefficientLaw,
    kappa: Option<f64>,
    spec: &TruncMomentSpec,
    stream: &Stream,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let grid = &spec.t_grid;
    if grid.len() < 2 || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] <= 1.0 {
        return Err(Error::Parameter("t_grid must be increasing with t > 1".into()));
    }
    if grid[grid.len() - 1] / grid[0] < 1e4 {
        return Err(Error::Parameter("t_grid must span at least four decades".into()));
    }
    if spec.reps < 2 {
        return Err(Error::Parameter("reps must be >= 2".into()));
    }
    let kappa = match kappa {
        Some(k) => k,
        None => solve_kappa(law)?,
    };
    let mut report = ExperimentReport::new(&format!("truncmoment/{}", law.label()));
    let profile = fit_profile(law, kappa, &spec.profile_grid, 0.5)?;
    let d = d_constant(law, kappa, &stream.split(0), spec.d_reps)?;
    report.flags.unreliable |= d.unreliable;
    report.push(Level::new("D", 0.0, d.value, d.std_error));
    match &profile {
        SlowVariationProfile::Finite { m } => report.push(Level::exact("m", 0.0, *m)),
        SlowVariationProfile::RegVar { rho, .. } => report.push(Level::exact("rho_hat", 0.0, *rho)),
    }

    let want_plain = spec.estimator != Estimator::Spine;
    let want_spine = spec.estimator != Estimator::Plain;
    let mut estimates: Vec<(&str, Vec<(f64, f64)>)> = Vec::new();

    if want_plain {
        let rows = map_reps(&stream.split(1), spec.reps, threads, |_, s| {
            let p = perpetuity_draw(&mut s.rng(), law, DEFAULT_TOL, DEFAULT_MAX_DEPTH);
            let y = if kappa == 1.0 { p.value } else { p.value.powf(kappa) };
            let row: Vec<f64> = grid.iter().map(|&t| if p.value <= t { y } else { 0.0 }).collect();
            (row, p.flagged())
        })?;
        report.flags.truncated += rows.iter().filter(|r| r.1).count() as u64;
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
        estimates.push(("ell_plain", mean_se_columns(&rows)));
    }
    if want_spine {
        let tilted = if kappa == 1.0 { law.size_biased() } else { Err(Error::Unsupported("spine needs kappa = 1".into())) };
        match tilted {
            Ok(tilted) => {
                let log_t: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
                let rows = map_reps(&stream.split(2), spec.reps, threads, |_, s| {
                    let mut acc = vec![0.0; log_t.len()];
                    let (capped, flagged) = spine_replication(&mut s.rng(), law, &tilted, &log_t, &mut acc);
                    (acc, capped as u64 + flagged)
                })?;
                report.flags.truncated += rows.iter().map(|r| r.1).sum::<u64>();
                let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
                estimates.push(("ell_spine", mean_se_columns(&rows)));
            }
            Err(e) if spec.estimator == Estimator::Spine => return Err(e),
            Err(e) => report.note(format!("spine estimator skipped: {e}")),
        }
    }

    for (name, est) in &estimates {
        for (t, (m, se)) in grid.iter().zip(est) {
            report.push(Level::new(name, *t, *m, *se));
        }
    }
    let (best_name, best) = estimates.last().expect("at least one estimator");
    report.note(format!("ratio and trend use {best_name}"));
    let mut ratios = Vec::new();
    for (t, (m, se)) in grid.iter().zip(best) {
        let target = d.value * g_a(&profile, *t)?;
        report.push(Level::exact("target", *t, target));
        report.push(Level::new("ratio", *t, m / target, se / target));
        ratios.push(m / target);
    }

    match &profile {
        SlowVariationProfile::Finite { .. } => {
            let (lo, hi) = spec.ratio_band;
            let last = *ratios.last().expect("non-empty");
            report.verdict(Verdict::check(
                "ratio_in_band_at_max_t",
                format!("[{lo}, {hi}]"),
                last,
                last >= lo && last <= hi,
            ));
            let (first_err, last_err) = ((ratios[0] - 1.0).abs(), (last - 1.0).abs());
            report.verdict(Verdict::check(
                "ratio_trend",
                format!("|ratio(t_max) - 1| < |ratio(t_min) - 1| = {first_err}"),
                last_err,
                last_err < first_err,
            ));
        }
        SlowVariationProfile::RegVar { rho, .. } => {
            let exponent = growth_exponent(grid, best);
            report.push(Level::exact("growth_exponent", 0.0, exponent));
            let target = 1.0 - rho;
            report.verdict(Verdict::check(
                "growth_exponent",
                format!("{target} +/- {}", spec.exponent_tol),
                exponent,
                (exponent - target).abs() <= spec.exponent_tol,
            ));
        }
    }
    report.verdict(Verdict::check(
        "no_flagged_samples",
        "0",
        report.flags.truncated as f64,
        report.flags.truncated == 0,
    ));
    Ok(report.finalize())
}

/// Slope of `ln ℓ̂(t)` against `ln ln t` over the upper half of the grid
/// (in `ln ln t`).
pub fn growth_exponent(grid: &[f64], est: &[(f64, f64)]) -> f64 {
    let llt: Vec<f64> = grid.iter().map(|t| t.ln().ln()).collect();
    let cut = 0.5 * (llt[0] + llt[llt.len() - 1]);
    let (x, y): (Vec<f64>, Vec<f64>) = llt
        .iter()
        .zip(est)
        .filter(|(&l, (m, _))| l >= cut - 1e-12 && *m > 0.0)
        .map(|(&l, (m, _))| (l, m.ln()))
        .unzip();
    ols(&x, &y).0
}
