//! Perpetuities, forward recursions `U_j = A_j U_{j-1} + B_j` and GARCH(1,1)
//! paths.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{CoefficientLaw, NoiseLaw};
use crate::rng::{Stream, StreamRng};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_DEPTH: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopKind {
    /// The running product hit zero, so the series is exact.
    Exact,
    /// The running product fell below the tolerance.
    Tolerance,
    /// Depth limit reached with the product still above tolerance.
    MaxDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perpetuity {
    pub value: f64,
    pub depth: u64,
    pub stop: StopKind,
    /// Running product `Π_{j≤K} A_j` at the stop.
    pub residual: f64,
    /// `B_1`, the first summand.
    pub first_b: f64,
}

impl Perpetuity {
    /// Counted as a flagged sample: depth exhausted or non-finite value.
    pub fn flagged(&self) -> bool {
        self.stop == StopKind::MaxDepth || !self.value.is_finite()
    }
}

/// One draw of `Σ_k B_k Π_{j<k} A_j`, truncated when the running product
/// drops below `tol` or reaches zero.
pub fn perpetuity_sample(stream: &Stream, law: &CoefficientLaw, tol: f64, max_depth: u64) -> Perpetuity {
    perpetuity_draw(&mut stream.rng(), law, tol, max_depth)
}

/// [`perpetuity_sample`] consuming draws from an existing generator.
#[inline]
pub fn perpetuity_draw(rng: &mut StreamRng, law: &CoefficientLaw, tol: f64, max_depth: u64) -> Perpetuity {
    let mut value = 0.0;
    let mut prod = 1.0;
    let mut first_b = 0.0;
    let mut depth = 0u64;
    loop {
        let (a, b) = law.sample(rng);
        depth += 1;
        if depth == 1 {
            first_b = b;
        }
        let next = value + prod * b;
        debug_assert!(next >= value, "partial sums must be nondecreasing");
        value = next;
        prod *= a;
        let stop = if prod == 0.0 {
            StopKind::Exact
        } else if prod < tol {
            StopKind::Tolerance
        } else if depth >= max_depth || !value.is_finite() {
            StopKind::MaxDepth
        } else {
            continue;
        };
        return Perpetuity {
            value,
            depth,
            stop,
            residual: prod,
            first_b,
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum U0Mode {
    Stationary,
    Fixed(f64),
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Record {
    Sums,
    Full,
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub n: u64,
    pub u0: U0Mode,
    pub record: Record,
    /// GARCH paths also accumulate `Σ X_j² I(|X_j| > c)` for this `c`.
    #[serde(default)]
    pub lindeberg: Option<f64>,
}

impl PathConfig {
    pub fn sums(n: u64) -> Self {
        PathConfig {
            n,
            u0: U0Mode::Stationary,
            record: Record::Sums,
            lindeberg: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::Parameter("path length n must be >= 1".into()));
        }
        if let Record::Grid(times) = &self.record {
            let inside = times.iter().all(|&t| t > 0.0 && t <= 1.0);
            let increasing = times.windows(2).all(|w| w[0] < w[1]);
            if !inside || !increasing || times.is_empty() {
                return Err(Error::Parameter(
                    "grid times must be strictly increasing in (0, 1]".into(),
                ));
            }
        }
        if let U0Mode::Fixed(v) = self.u0 {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("initial value {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Step indices `⌊n t⌋` at which snapshots are taken.
    fn snapshot_steps(&self) -> Vec<u64> {
        match &self.record {
            Record::Grid(times) => times
                .iter()
                .map(|&t| (self.n as f64 * t).floor() as u64)
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub n: u64,
    pub sum_u_kappa: f64,
    pub sum_x: f64,
    pub sum_x2: f64,
    pub sum_sigma2: f64,
    /// `Σ X_j² I(|X_j| > c)` when a Lindeberg level `c` was requested.
    pub sum_x2_above: f64,
    pub last: f64,
    /// `(t, partial sum up to ⌊nt⌋)`: of `U_j^κ` for SRE paths, of `X_j`
    /// for GARCH paths.
    pub snapshots: Vec<(f64, f64)>,
    /// `(U_j)` or `(X_j, σ_j²)` for `j = 1..n` when the full path is recorded.
    pub full: Option<Vec<(f64, f64)>>,
    pub init_depth: u64,
    pub init_residual: f64,
    pub overflow: bool,
    pub stationary_start: bool,
}

impl PathSummary {
    fn new(cfg: &PathConfig) -> Self {
        PathSummary {
            n: cfg.n,
            sum_u_kappa: 0.0,
            sum_x: 0.0,
            sum_x2: 0.0,
            sum_sigma2: 0.0,
            sum_x2_above: 0.0,
            last: 0.0,
            snapshots: Vec::new(),
            full: matches!(cfg.record, Record::Full).then(Vec::new),
            init_depth: 0,
            init_residual: 0.0,
            overflow: false,
            stationary_start: cfg.u0 == U0Mode::Stationary,
        }
    }
}

fn initial_value(stream: &Stream, law: &CoefficientLaw, mode: U0Mode, summary: &mut PathSummary) -> f64 {
    match mode {
        U0Mode::Zero => 0.0,
        U0Mode::Fixed(v) => v,
        U0Mode::Stationary => {
            let p = perpetuity_sample(&stream.split(0), law, DEFAULT_TOL, DEFAULT_MAX_DEPTH);
            summary.init_depth = p.depth;
            summary.init_residual = p.residual;
            summary.overflow |= p.flagged();
            p.value
        }
    }
}

/// Iterate the recursion `n` steps, accumulating `Σ U_j^κ`.
pub fn forward_path(stream: &Stream, law: &CoefficientLaw, cfg: &PathConfig, kappa: f64) -> Result<PathSummary> {
    cfg.validate()?;
    let mut out = PathSummary::new(cfg);
    let mut u = initial_value(stream, law, cfg.u0, &mut out);
    let steps = cfg.snapshot_steps();
    let times = match &cfg.record {
        Record::Grid(t) => t.clone(),
        _ => Vec::new(),
    };
    let mut next_snap = 0;
    let mut rng = stream.split(1).rng();
    let unit = kappa == 1.0;
    let mut sum = 0.0;
    while next_snap < steps.len() && steps[next_snap] == 0 {
        out.snapshots.push((times[next_snap], 0.0));
        next_snap += 1;
    }
    for j in 1..=cfg.n {
        let (a, b) = law.sample(&mut rng);
        u = a * u + b;
        sum += if unit { u } else { u.powf(kappa) };
        if let Some(full) = out.full.as_mut() {
            full.push((u, 0.0));
        }
        while next_snap < steps.len() && steps[next_snap] == j {
            out.snapshots.push((times[next_snap], sum));
            next_snap += 1;
        }
    }
    out.sum_u_kappa = sum;
    out.last = u;
    out.overflow |= !sum.is_finite();
    Ok(out)
}

/// GARCH(1,1): `X_j = σ_j Z_j`, `σ_j² = β + λ X_{j-1}² + δ σ_{j-1}²`.
///
/// The stationary start draws `σ_0²` from the perpetuity of the reduced
/// recursion; sums run over `j = 1..n`.
pub fn garch_path(
    stream: &Stream,
    beta: f64,
    lambda: f64,
    delta: f64,
    noise: &NoiseLaw,
    cfg: &PathConfig,
) -> Result<PathSummary> {
    cfg.validate()?;
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!("beta = {beta} must be > 0")));
    }
    let reduced = CoefficientLaw::garch(beta, lambda, delta, noise.clone())?;
    let mut out = PathSummary::new(cfg);
    let mut sigma2 = initial_value(stream, &reduced, cfg.u0, &mut out);
    let steps = cfg.snapshot_steps();
    let times = match &cfg.record {
        Record::Grid(t) => t.clone(),
        _ => Vec::new(),
    };
    let mut next_snap = 0;
    while next_snap < steps.len() && steps[next_snap] == 0 {
        out.snapshots.push((times[next_snap], 0.0));
        next_snap += 1;
    }
    let mut rng = stream.split(1).rng();
    let mut x = sigma2.sqrt() * noise.sample(&mut rng);
    let (mut sx, mut sx2, mut ss, mut above) = (0.0, 0.0, 0.0, 0.0);
    let level2 = cfg.lindeberg.map_or(f64::INFINITY, |c| c * c);
    for j in 1..=cfg.n {
        sigma2 = beta + lambda * x * x + delta * sigma2;
        x = sigma2.sqrt() * noise.sample(&mut rng);
        sx += x;
        sx2 += x * x;
        if x * x > level2 {
            above += x * x;
        }
        ss += sigma2;
        if let Some(full) = out.full.as_mut() {
            full.push((x, sigma2));
        }
        while next_snap < steps.len() && steps[next_snap] == j {
            out.snapshots.push((times[next_snap], sx));
            next_snap += 1;
        }
    }
    out.sum_x = sx;
    out.sum_x2 = sx2;
    out.sum_sigma2 = ss;
    out.sum_x2_above = above;
    out.sum_u_kappa = ss;
    out.last = sigma2;
    out.overflow |= !(sx2.is_finite() && ss.is_finite());
    Ok(out)
}

/// `x` clipped to `[-h, h]`.
#[inline]
pub fn chi_h(x: f64, h: f64) -> f64 {
    debug_assert!(h > 0.0);
    x.clamp(-h, h)
}

/// Write a recorded path as CSV: `j,U_j` for SRE paths or
/// `j,X_j,sigma2_j` for GARCH paths.
pub fn write_path_csv(path: &Path, summary: &PathSummary, garch: bool) -> Result<()> {
    let full = summary
        .full
        .as_ref()
        .ok_or_else(|| Error::Parameter("path was not recorded in full".into()))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    if garch {
        writeln!(w, "j,X_j,sigma2_j")?;
        for (j, (x, s)) in full.iter().enumerate() {
            writeln!(w, "{},{},{}", j + 1, x, s)?;
        }
    } else {
        writeln!(w, "j,U_j")?;
        for (j, (u, _)) in full.iter().enumerate() {
            writeln!(w, "{},{}", j + 1, u)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::NoiseLaw;
    use crate::rng::make_stream;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn discrete_garch() -> CoefficientLaw {
        CoefficientLaw::garch_critical(1.0, 1.0, NoiseLaw::three_point()).unwrap()
    }

    /// Chi-square p-value of values `2^m - 1` against `P(m) = 2^{-m}`, with
    /// a pooled tail bin.
    fn geometric_gof(values: &[f64], last: u32) -> f64 {
        let mut counts = vec![0u64; last as usize + 1];
        for &u in values {
            let m = (u + 1.0).log2().round() as u32;
            let lattice = 2f64.powi(m as i32) - 1.0;
            assert!((u - lattice).abs() <= 1e-12 * lattice, "{u} is off the lattice");
            counts[(m.min(last + 1) - 1) as usize] += 1;
        }
        let n = values.len() as f64;
        let stat: f64 = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let m = i as i32 + 1;
                let p = if m as u32 <= last { 0.5f64.powi(m) } else { 0.5f64.powi(last as i32) };
                (c as f64 - n * p).powi(2) / (n * p)
            })
            .sum();
        1.0 - ChiSquared::new(last as f64).unwrap().cdf(stat)
    }

    #[test]
    fn geometric_series() {
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let p = perpetuity_sample(&make_stream(1), &law, 1e-12, DEFAULT_MAX_DEPTH);
        assert!((p.value - 2.0).abs() < 2.0 * 1e-12 + 1e-15);
        assert_eq!(p.stop, StopKind::Tolerance);
    }

    #[test]
    fn zero_multiplier_collapses() {
        let law = CoefficientLaw::constant(0.0, 3.5).unwrap();
        let p = perpetuity_sample(&make_stream(1), &law, 1e-12, DEFAULT_MAX_DEPTH);
        assert_eq!(p.value, 3.5);
        assert_eq!(p.stop, StopKind::Exact);
        assert_eq!(p.depth, 1);
    }

    #[test]
    fn discrete_garch_perpetuity_is_geometric() {
        let law = discrete_garch();
        let root = make_stream(11);
        let mut rng = root.rng();
        let draws: Vec<Perpetuity> = (0..200_000)
            .map(|_| perpetuity_draw(&mut rng, &law, DEFAULT_TOL, DEFAULT_MAX_DEPTH))
            .collect();
        assert!(draws.iter().all(|p| p.stop == StopKind::Exact && !p.flagged()));
        let values: Vec<f64> = draws.iter().map(|p| p.value).collect();
        assert!(geometric_gof(&values, 12) > 0.001);
    }

    #[test]
    fn hand_iteration() {
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let cfg = PathConfig {
            lindeberg: None,
            n: 3,
            u0: U0Mode::Zero,
            record: Record::Full,
        };
        let s = forward_path(&make_stream(0), &law, &cfg, 1.0).unwrap();
        assert_eq!(s.last, 1.75);
        assert_eq!(s.sum_u_kappa, 4.25);
        assert!(!s.stationary_start);
    }

    #[test]
    fn stationary_start_stays_stationary() {
        let law = discrete_garch();
        let root = make_stream(5);
        let cfg = PathConfig {
            lindeberg: None,
            n: 100,
            u0: U0Mode::Stationary,
            record: Record::Sums,
        };
        let lasts: Vec<f64> = (0..50_000)
            .map(|i| forward_path(&root.split(i), &law, &cfg, 1.0).unwrap().last)
            .collect();
        assert!(geometric_gof(&lasts, 10) > 0.001);
    }

    #[test]
    fn same_seed_same_summary() {
        let law = discrete_garch();
        let cfg = PathConfig {
            lindeberg: None,
            n: 1000,
            u0: U0Mode::Stationary,
            record: Record::Grid(vec![0.25, 0.5, 1.0]),
        };
        let a = forward_path(&make_stream(3), &law, &cfg, 1.0).unwrap();
        let b = forward_path(&make_stream(3), &law, &cfg, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.snapshots.len(), 3);
        assert_eq!(a.snapshots[2].1, a.sum_u_kappa);
    }

    #[test]
    fn garch_without_arch_term_is_deterministic() {
        let cfg = PathConfig {
            lindeberg: None,
            n: 20,
            u0: U0Mode::Fixed(3.0),
            record: Record::Full,
        };
        let s = garch_path(&make_stream(9), 1.0, 0.0, 0.5, &NoiseLaw::standard_normal(), &cfg).unwrap();
        for (j, &(_, s2)) in s.full.as_ref().unwrap().iter().enumerate() {
            let expect = 2.0 + 0.5f64.powi(j as i32 + 1);
            assert!((s2 - expect).abs() < 1e-12, "j={} {s2} {expect}", j + 1);
        }
    }

    #[test]
    fn zero_noise_resets_variance() {
        let cfg = PathConfig {
            lindeberg: None,
            n: 2000,
            u0: U0Mode::Stationary,
            record: Record::Full,
        };
        let s = garch_path(&make_stream(4), 1.5, 1.0, 0.0, &NoiseLaw::three_point(), &cfg).unwrap();
        let full = s.full.unwrap();
        let mut resets = 0;
        for w in full.windows(2) {
            if w[0].0 == 0.0 {
                assert_eq!(w[1].1, 1.5);
                resets += 1;
            }
        }
        assert!(resets > 500);
    }

    #[test]
    fn garch_increments_have_mean_zero() {
        let cfg = PathConfig {
            lindeberg: None,
            n: 100_000,
            u0: U0Mode::Stationary,
            record: Record::Sums,
        };
        let s = garch_path(&make_stream(6), 1.0, 0.5, 0.5, &NoiseLaw::standard_normal(), &cfg).unwrap();
        // Martingale differences: Var(Σ X_j) = Σ E X_j², estimated by Σ X_j².
        let se = s.sum_x2.sqrt();
        assert!(s.sum_x.abs() < 4.0 * se, "{} vs {}", s.sum_x, se);
    }

    #[test]
    fn clipping() {
        assert_eq!(chi_h(3.0, 2.0), 2.0);
        assert_eq!(chi_h(-3.0, 2.0), -2.0);
        assert_eq!(chi_h(1.0, 2.0), 1.0);
    }

    #[test]
    fn invalid_grid_rejected() {
        let cfg = PathConfig {
            lindeberg: None,
            n: 10,
            u0: U0Mode::Zero,
            record: Record::Grid(vec![0.5, 0.5]),
        };
        assert!(cfg.validate().is_err());
        assert!(PathConfig::sums(0).validate().is_err());
    }

    #[test]
    fn full_path_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PathConfig {
            lindeberg: None,
            n: 4,
            u0: U0Mode::Zero,
            record: Record::Full,
        };
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let s = forward_path(&make_stream(0), &law, &cfg, 1.0).unwrap();
        let file = dir.path().join("path.csv");
        write_path_csv(&file, &s, false).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        assert_eq!(text, "j,U_j\n1,1\n2,1.5\n3,1.75\n4,1.875\n");
    }
}
