//! Central and functional limit theorems for GARCH(1,1) partial sums.

use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, Level, Verdict};
use crate::analytics::{fit_profile, g_a, SlowVariationProfile};
use crate::error::{Error, Result};
use crate::laws::{CoefficientLaw, NoiseLaw};
use crate::par::map_reps;
use crate::rng::Stream;
use crate::sre::{garch_path, PathConfig, Record, U0Mode};
use crate::stats::{iqr_scale, ks_normal, spearman, variance};

/// KS distance of `sample` to `N(0, variance)` and
/// `(IQR/1.34898)/√variance`.
pub fn gof_normal(sample: &[f64], variance: f64) -> Result<(f64, f64)> {
    if !(variance > 0.0) {
        return Err(Error::Domain(format!("variance must be > 0, got {variance}")));
    }
    if sample.len() < 50 {
        return Err(Error::Parameter(format!("need at least 50 values, got {}", sample.len())));
    }
    Ok((ks_normal(sample, variance), iqr_scale(sample) / variance.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub beta: f64,
    pub lambda: f64,
    pub delta: f64,
}

impl GarchParams {
    /// Parameters and noise of a GARCH-derived coefficient law.
    pub fn from_law(law: &CoefficientLaw) -> Result<(Self, NoiseLaw)> {
        match law {
            CoefficientLaw::Garch(g) => Ok((
                GarchParams {
                    beta: g.beta,
                    lambda: g.lambda,
                    delta: g.delta,
                },
                g.noise.clone(),
            )),
            _ => Err(Error::Parameter(format!("`{}` is not a GARCH law", law.label()))),
        }
    }

    pub fn is_critical(&self) -> bool {
        (self.lambda + self.delta - 1.0).abs() < 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    SqrtN,
    SqrtNLnN,
    SqrtNGA,
}

/// How `S_n` is scaled and what variance the limit has.
#[derive(Debug, Clone, Serialize)]
pub struct Normalization {
    pub kind: NormKind,
    /// Target variance of the normalized sum.
    pub variance: f64,
    #[serde(skip)]
    profile: Option<SlowVariationProfile>,
}

impl Normalization {
    pub fn for_params(p: &GarchParams, noise: &NoiseLaw, profile_grid: &[f64]) -> Result<Self> {
        let total = p.lambda + p.delta;
        if p.is_critical() {
            let law = crate::laws::garch_to_sre(p.beta, p.lambda, p.delta, noise.clone())?;
            let profile = fit_profile(&law, 1.0, profile_grid, 0.5)?;
            Ok(match profile {
                SlowVariationProfile::Finite { m } => Normalization {
                    kind: NormKind::SqrtNLnN,
                    variance: p.beta / m,
                    profile: None,
                },
                other => Normalization {
                    kind: NormKind::SqrtNGA,
                    variance: p.beta,
                    profile: Some(other),
                },
            })
        } else if total < 1.0 {
            CoefficientLaw::garch(p.beta, p.lambda, p.delta, noise.clone())?;
            Ok(Normalization {
                kind: NormKind::SqrtN,
                variance: p.beta / (1.0 - total),
                profile: None,
            })
        } else {
            Err(Error::Parameter(format!("lambda + delta = {total} > 1 has no stationary regime")))
        }
    }

    /// The divisor of `S_n`.
    pub fn scale(&self, n: f64) -> Result<f64> {
        match self.kind {
            NormKind::SqrtN => Ok(n.sqrt()),
            NormKind::SqrtNLnN => Ok((n * n.ln()).sqrt()),
            NormKind::SqrtNGA => Ok((n * g_a(self.profile.as_ref().expect("profile"), n)?).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CltSpec {
    pub n_grid: Vec<u64>,
    pub reps: u64,
    /// Relative tolerance on the quantile scale (critical case).
    pub scale_tolerance: f64,
    /// Relative tolerance on the sample variance (subcritical case).
    pub variance_tolerance: f64,
    /// Report `Σ X_j² I(|X_j| > ε s_n)/s_n²` for this `ε`.
    pub lindeberg: Option<f64>,
    pub profile_grid: Vec<f64>,
}

impl Default for CltSpec {
    fn default() -> Self {
        CltSpec {
            n_grid: vec![1 << 12, 1 << 16, 1 << 20],
            reps: 1000,
            scale_tolerance: 0.15,
            variance_tolerance: 0.05,
            lindeberg: None,
            profile_grid: (0..=20).map(|i| 10f64.powf(2.0 + 0.1 * i as f64)).collect(),
        }
    }
}

fn scenario(tag: &str, p: &GarchParams, noise: &NoiseLaw) -> String {
    format!("{tag}/{}/b{}_l{}_d{}", noise.label(), p.beta, p.lambda, p.delta)
}

pub fn clt_experiment(
    params: &GarchParams,
    noise: &NoiseLaw,
    spec: &CltSpec,
    stream: &Stream,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let grid = &spec.n_grid;
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 2 {
        return Err(Error::Parameter("n_grid must be increasing with n >= 2".into()));
    }
    if spec.reps < 50 {
        return Err(Error::Parameter("reps must be >= 50".into()));
    }
    let norm = Normalization::for_params(params, noise, &spec.profile_grid)?;
    let mut report = ExperimentReport::new(&scenario("clt", params, noise));
    report.note(format!("normalization {:?}", norm.kind));
    report.push(Level::exact("target_variance", 0.0, norm.variance));
    let mut ks = Vec::new();
    let mut last = Vec::new();
    for (k, &n) in grid.iter().enumerate() {
        let s_n = norm.scale(n as f64)?;
        let cfg = PathConfig {
            lindeberg: spec.lindeberg.map(|e| e * s_n * norm.variance.sqrt()),
            ..PathConfig::sums(n)
        };
        let runs = map_reps(&stream.split(k as u64), spec.reps, threads, |_, s| {
            garch_path(s, params.beta, params.lambda, params.delta, noise, &cfg)
        })?;
        let mut values = Vec::with_capacity(runs.len());
        let mut lind = Vec::new();
        for r in runs {
            let r = r?;
            if r.overflow {
                report.flags.overflow += 1;
                continue;
            }
            values.push(r.sum_x / s_n);
            lind.push(r.sum_x2_above / (s_n * s_n * norm.variance));
        }
        let level = n as f64;
        let (d, ratio) = gof_normal(&values, norm.variance)?;
        report.push(Level::exact("scale", level, ratio * norm.variance.sqrt()));
        report.push(Level::exact("scale_ratio", level, ratio));
        report.push(Level::exact("ks", level, d));
        let v = variance(&values);
        let v_se = v * (2.0 / (values.len() as f64 - 1.0)).sqrt();
        report.push(Level::new("variance", level, v, v_se));
        if spec.lindeberg.is_some() {
            let (m, se) = crate::stats::mean_se(&lind);
            report.push(Level::new("lindeberg", level, m, se));
        }
        ks.push(d);
        last = values;
    }
    let n_max = *grid.last().expect("non-empty") as f64;
    if params.is_critical() {
        let ratio = iqr_scale(&last) / norm.variance.sqrt();
        report.verdict(Verdict::check(
            "scale_within_tolerance",
            format!("|scale/target - 1| <= {}", spec.scale_tolerance),
            ratio,
            (ratio - 1.0).abs() <= spec.scale_tolerance,
        ));
        if ks.len() >= 2 {
            let (first, end) = (ks[0], ks[ks.len() - 1]);
            report.verdict(Verdict::check(
                "ks_trend",
                format!("ks(n_max) < ks(n_min) = {first}"),
                end,
                end < first,
            ));
        }
    } else {
        let v = report.find("variance", n_max).expect("recorded").value;
        let rel = v / norm.variance - 1.0;
        report.verdict(Verdict::check(
            "variance_within_tolerance",
            format!("|variance/target - 1| <= {}", spec.variance_tolerance),
            v,
            rel.abs() <= spec.variance_tolerance,
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcltSpec {
    pub n: u64,
    pub time_grid: Vec<f64>,
    pub reps: u64,
    pub scale_tolerance: f64,
    pub correlation_tolerance: f64,
    pub profile_grid: Vec<f64>,
}

impl Default for FcltSpec {
    fn default() -> Self {
        FcltSpec {
            n: 1 << 18,
            time_grid: vec![0.25, 0.5, 0.75, 1.0],
            reps: 1000,
            scale_tolerance: 0.15,
            correlation_tolerance: 0.1,
            profile_grid: CltSpec::default().profile_grid,
        }
    }
}

fn grid_index(grid: &[f64], t: f64) -> Option<usize> {
    grid.iter().position(|&g| (g - t).abs() < 1e-12)
}

pub fn fclt_experiment(
    params: &GarchParams,
    noise: &NoiseLaw,
    spec: &FcltSpec,
    stream: &Stream,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    if !params.is_critical() {
        return Err(Error::Parameter("the functional experiment needs lambda + delta = 1".into()));
    }
    if spec.reps < 50 {
        return Err(Error::Parameter("reps must be >= 50".into()));
    }
    let cfg = PathConfig {
        n: spec.n,
        u0: U0Mode::Stationary,
        record: Record::Grid(spec.time_grid.clone()),
        lindeberg: None,
    };
    cfg.validate()?;
    let norm = Normalization::for_params(params, noise, &spec.profile_grid)?;
    let s_n = norm.scale(spec.n as f64)?;
    let mut report = ExperimentReport::new(&scenario("fclt", params, noise));
    report.note(format!("normalization {:?}", norm.kind));
    report.push(Level::exact("target_variance", 0.0, norm.variance));
    let runs = map_reps(stream, spec.reps, threads, |_, s| garch_path(s, params.beta, params.lambda, params.delta, noise, &cfg))?;
    let k = spec.time_grid.len();
    let mut at: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut inc: Vec<Vec<f64>> = vec![Vec::new(); k];
    for r in runs {
        let r = r?;
        if r.overflow {
            report.flags.overflow += 1;
            continue;
        }
        let mut prev = 0.0;
        for (i, &(_, s)) in r.snapshots.iter().enumerate() {
            at[i].push(s / s_n);
            inc[i].push((s - prev) / s_n);
            prev = s;
        }
    }
    let sd = norm.variance.sqrt();
    let mut prev_t = 0.0;
    for (i, &t) in spec.time_grid.iter().enumerate() {
        report.push(Level::exact("scale", t, iqr_scale(&at[i])));
        report.push(Level::exact("target_scale", t, sd * t.sqrt()));
        report.push(Level::exact("increment_scale", t, iqr_scale(&inc[i])));
        report.push(Level::exact("increment_target_scale", t, sd * (t - prev_t).sqrt()));
        prev_t = t;
    }
    let grid = &spec.time_grid;
    if let (Some(q), Some(one)) = (grid_index(grid, 0.25), grid_index(grid, 1.0)) {
        let ratio = iqr_scale(&at[one]) / iqr_scale(&at[q]);
        report.verdict(Verdict::check(
            "scale_ratio",
            format!("|ratio/2 - 1| <= {}", spec.scale_tolerance),
            ratio,
            (ratio / 2.0 - 1.0).abs() <= spec.scale_tolerance,
        ));
    }
    if let (Some(h), Some(one)) = (grid_index(grid, 0.5), grid_index(grid, 1.0)) {
        let first = &at[h];
        let second: Vec<f64> = at[one].iter().zip(first).map(|(b, a)| b - a).collect();
        let rho = spearman(first, &second);
        report.push(Level::exact("increment_rank_correlation", 0.5, rho));
        report.verdict(Verdict::check(
            "increment_rank_correlation",
            format!("|rho| <= {}", spec.correlation_tolerance),
            rho,
            rho.abs() <= spec.correlation_tolerance,
        ));
    }
    let end = k - 1;
    let marginal = iqr_scale(&at[end]) / (sd * grid[end].sqrt());
    report.verdict(Verdict::check(
        "marginal_scale",
        format!("|scale/target - 1| <= {} at t = {}", spec.scale_tolerance, grid[end]),
        marginal,
        (marginal - 1.0).abs() <= spec.scale_tolerance,
    ));
    report.verdict(Verdict::check(
        "no_overflow",
        "0",
        report.flags.overflow as f64,
        report.flags.overflow == 0,
    ));
    Ok(report.finalize())
}
