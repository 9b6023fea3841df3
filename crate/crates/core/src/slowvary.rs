//! Truncated means of positive laws, slowly varying normalizers and probes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{load_column, Column};
use crate::numeric::integrate_to_infinity;
use crate::rng::{Stream, StreamRng};

/// A positive function evaluated through `ln x ↦ ln ℓ(x)`, so that
/// arguments like `10^300` and values like `exp((ln x)^β)` stay in range.
#[derive(Clone)]
pub enum Ell {
    Const(f64),
    /// `ℓ(x) = ln x`.
    Log,
    /// `ℓ(x) = exp((ln x)^β)`.
    ExpPower(f64),
    /// Piecewise linear in `(ln x, ln ℓ)`, flat beyond the ends.
    Table { log_x: Vec<f64>, log_y: Vec<f64> },
    /// Arbitrary `x ↦ ℓ(x)`.
    Func { label: String, f: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl fmt::Debug for Ell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Ell {
    pub fn func(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Ell::Func {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn table(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Input("table needs at least two rows".into()));
        }
        if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
            return Err(Error::Input("table entries must be positive".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Input("table x values must be strictly increasing".into()));
        }
        Ok(Ell::Table {
            log_x: points.iter().map(|p| p.0.ln()).collect(),
            log_y: points.iter().map(|p| p.1.ln()).collect(),
        })
    }

    /// `const`, `const:<c>`, `log`, `exp_power:<beta>` or `table:<file>` where the
    /// file holds `x,ell` rows (a non-numeric header line is skipped).
    pub fn parse(text: &str) -> Result<Self> {
        let (head, arg) = match text.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (text, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Input(format!("`{text}` needs a parameter")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Input(format!("`{text}`: {e}")))
        };
        match head {
            "const" => {
                let c = if arg.is_some() { number(arg)? } else { 1.0 };
                if !(c > 0.0) {
                    return Err(Error::Input("constant must be positive".into()));
                }
                Ok(Ell::Const(c))
            }
            "log" => Ok(Ell::Log),
            "exp_power" => {
                let b = number(arg)?;
                if !(b > 0.0 && b < 1.0) {
                    return Err(Error::Input(format!("exp_power exponent must lie in (0,1), got {b}")));
                }
                Ok(Ell::ExpPower(b))
            }
            "table" => {
                let path = arg.ok_or_else(|| Error::Input("table needs a file".into()))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Input(format!("{path}: {e}")))?;
                let mut rows = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    let mut it = line.split([',', ' ', '\t']).filter(|s| !s.is_empty());
                    let parsed = (it.next().map(str::parse::<f64>), it.next().map(str::parse::<f64>));
                    match parsed {
                        (Some(Ok(x)), Some(Ok(y))) => rows.push((x, y)),
                        _ if i == 0 => continue,
                        _ => return Err(Error::Input(format!("{path}:{}: bad row `{line}`", i + 1))),
                    }
                }
                Ell::table(&rows)
            }
            _ => Err(Error::Input(format!("unknown ell `{text}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Ell::Const(c) => format!("const:{c}"),
            Ell::Log => "log".into(),
            Ell::ExpPower(b) => format!("exp_power:{b}"),
            Ell::Table { .. } => "table".into(),
            Ell::Func { label, .. } => label.clone(),
        }
    }

    /// `ln ℓ(e^{lx})`.
    pub fn ln_at_log(&self, lx: f64) -> f64 {
        match self {
            Ell::Const(c) => c.ln(),
            Ell::Log => lx.ln(),
            Ell::ExpPower(b) => lx.powf(*b),
            Ell::Table { log_x, log_y } => {
                let n = log_x.len();
                if lx <= log_x[0] {
                    return log_y[0];
                }
                if lx >= log_x[n - 1] {
                    return log_y[n - 1];
                }
                let k = log_x.partition_point(|&v| v <= lx) - 1;
                let w = (lx - log_x[k]) / (log_x[k + 1] - log_x[k]);
                log_y[k] + w * (log_y[k + 1] - log_y[k])
            }
            Ell::Func { f, .. } => f(lx.exp()).ln(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Ell::Const(c) => *c,
            Ell::Log => x.ln(),
            Ell::Func { f, .. } => f(x),
            _ => self.ln_at_log(x.ln()).exp(),
        }
    }
}

/// A nonnegative random variable `Y`.
#[derive(Debug, Clone)]
pub enum PositiveLawY {
    /// `P(Y > x) = 1/x` for `x ≥ 1`.
    ParetoOne,
    /// `Y = 2^T` with `P(T = m) = 2^{-m}`, `m ≥ 1`.
    StPetersburg,
    /// Finite atoms `(value, probability)`.
    Bounded(Vec<(f64, f64)>),
    /// Empirical law of a sample.
    Sampled(Arc<Vec<f64>>),
    /// The law whose truncated mean is `ℓ`, so `dF(y) = ℓ'(y)/y dy`.
    Analytic(Ell),
}

/// Serializable description of a [`PositiveLawY`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PositiveLawSpec {
    ParetoOne,
    StPetersburg,
    Bounded {
        points: Vec<(f64, f64)>,
    },
    Sampled {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<Column>,
    },
    /// `ell` in the syntax of [`Ell::parse`].
    Analytic {
        ell: String,
    },
}

impl PositiveLawSpec {
    pub fn build(&self) -> Result<PositiveLawY> {
        match self {
            PositiveLawSpec::ParetoOne => Ok(PositiveLawY::ParetoOne),
            PositiveLawSpec::StPetersburg => Ok(PositiveLawY::StPetersburg),
            PositiveLawSpec::Bounded { points } => PositiveLawY::bounded(points),
            PositiveLawSpec::Sampled { path, column } => {
                PositiveLawY::sampled(load_column(std::path::Path::new(path), column.as_ref())?)
            }
            PositiveLawSpec::Analytic { ell } => Ok(PositiveLawY::Analytic(Ell::parse(ell)?)),
        }
    }
}

impl PositiveLawY {
    pub fn bounded(points: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = points.iter().map(|p| p.1).sum();
        if points.iter().any(|&(v, p)| !(v >= 0.0) || !(p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter("bounded law needs Y >= 0 and probabilities summing to 1".into()));
        }
        Ok(PositiveLawY::Bounded(points.to_vec()))
    }

    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Parameter("sampled law needs nonnegative values".into()));
        }
        Ok(PositiveLawY::Sampled(Arc::new(values)))
    }

    pub fn label(&self) -> String {
        match self {
            PositiveLawY::ParetoOne => "pareto_one".into(),
            PositiveLawY::StPetersburg => "st_petersburg".into(),
            PositiveLawY::Bounded(_) => "bounded".into(),
            PositiveLawY::Sampled(_) => "sampled".into(),
            PositiveLawY::Analytic(e) => format!("analytic({})", e.label()),
        }
    }

    /// One draw, for the variants that can be simulated directly.
    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            PositiveLawY::ParetoOne => 1.0 / rng.uniform(),
            PositiveLawY::StPetersburg => {
                // T - 1 = number of leading zero bits of a uniform word.
                let mut t = 1;
                loop {
                    let z = rng.next_raw().leading_zeros();
                    t += z;
                    if z < 64 {
                        break;
                    }
                }
                2f64.powi(t as i32)
            }
            PositiveLawY::Bounded(atoms) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().expect("non-empty").0
            }
            PositiveLawY::Sampled(v) => v[((rng.next_raw() as u128 * v.len() as u128) >> 64) as usize],
            PositiveLawY::Analytic(_) => panic!("analytic laws are not sampled"),
        }
    }

    pub fn can_sample(&self) -> bool {
        !matches!(self, PositiveLawY::Analytic(_))
    }

    /// Bounded supremum of the support, if any.
    pub fn sup(&self) -> Option<f64> {
        match self {
            PositiveLawY::Bounded(a) => a.iter().filter(|p| p.1 > 0.0).map(|p| p.0).reduce(f64::max),
            PositiveLawY::Sampled(v) => v.iter().copied().reduce(f64::max),
            _ => None,
        }
    }
}

/// `ℓ(x) = E Y I(Y ≤ x)`.
pub fn truncated_mean(y: &PositiveLawY, x: f64) -> f64 {
    match y {
        PositiveLawY::ParetoOne => x.max(1.0).ln(),
        PositiveLawY::StPetersburg => {
            if x < 2.0 {
                0.0
            } else {
                x.log2().floor()
            }
        }
        PositiveLawY::Bounded(a) => a.iter().filter(|p| p.0 <= x).map(|p| p.0 * p.1).sum(),
        PositiveLawY::Sampled(v) => v.iter().filter(|&&s| s <= x).sum::<f64>() / v.len() as f64,
        PositiveLawY::Analytic(e) => e.eval(x),
    }
}

/// `P(Y > x)`.
pub fn tail_prob(y: &PositiveLawY, x: f64) -> f64 {
    match y {
        PositiveLawY::ParetoOne => (1.0 / x).min(1.0),
        PositiveLawY::StPetersburg => {
            if x < 2.0 {
                1.0
            } else {
                0.5f64.powf(x.log2().floor())
            }
        }
        PositiveLawY::Bounded(a) => a.iter().filter(|p| p.0 > x).map(|p| p.1).sum(),
        PositiveLawY::Sampled(v) => v.iter().filter(|&&s| s > x).count() as f64 / v.len() as f64,
        PositiveLawY::Analytic(e) => e.eval(x) / x * (analytic_tail_ratio(e, x.ln()).unwrap_or(f64::NAN)),
    }
}

/// `x P(Y > x) / ℓ(x) = ∫_0^∞ (ℓ(x e^s)/ℓ(x) - 1) e^{-s} ds` for the law
/// with truncated mean `ℓ`.
fn analytic_tail_ratio(e: &Ell, lx: f64) -> Option<f64> {
    let base = e.ln_at_log(lx);
    integrate_to_infinity(|s| (e.ln_at_log(lx + s) - base).exp_m1() * (-s).exp(), 0.0)
}

/// `x P(Y > x) / E Y I(Y ≤ x)`.
pub fn tail_ratio(y: &PositiveLawY, x: f64) -> Result<f64> {
    if let PositiveLawY::Analytic(e) = y {
        return analytic_tail_ratio(e, x.ln())
            .ok_or_else(|| Error::Numeric(format!("tail integral diverged at x = {x}")));
    }
    let ell = truncated_mean(y, x);
    if !(ell > 0.0) {
        return Err(Error::Domain(format!("truncated mean vanishes at x = {x}")));
    }
    Ok(x * tail_prob(y, x) / ell)
}

/// `ℓ_1(x) = E(Y ∧ x) = ℓ(x) + x P(Y > x)`.
pub fn ell1(y: &PositiveLawY, x: f64) -> f64 {
    truncated_mean(y, x) + x * tail_prob(y, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRatioMc {
    pub ratio: f64,
    pub std_error: f64,
    pub ell: f64,
    pub tail: f64,
    /// Direct mean of `Y ∧ x`.
    pub ell1_direct: f64,
    pub ell1_direct_se: f64,
    pub draws: u64,
}

/// Monte Carlo `x P(Y > x)/ℓ(x)` and `E(Y ∧ x)` from `chunks × per_chunk`
/// draws, one child stream per chunk.
pub fn tail_ratio_mc(
    y: &PositiveLawY,
    x: f64,
    chunks: u64,
    per_chunk: u64,
    stream: &Stream,
    threads: Option<usize>,
) -> Result<TailRatioMc> {
    if !y.can_sample() {
        return Err(Error::Unsupported(format!("{} cannot be sampled", y.label())));
    }
    // Per chunk: sums of I, Y·1{Y≤x}, their squares and cross products, and of min(Y,x).
    let parts = crate::par::map_reps(stream, chunks, threads, |_, s| {
        let mut rng = s.rng();
        let mut acc = [0.0f64; 7];
        for _ in 0..per_chunk {
            let v = y.sample(&mut rng);
            let i = if v > x { 1.0 } else { 0.0 };
            let t = if v > x { 0.0 } else { v };
            let m = v.min(x);
            acc[0] += i;
            acc[1] += t;
            acc[2] += t * t;
            acc[3] += m;
            acc[4] += m * m;
            acc[5] += i * t;
        }
        acc
    })?;
    let mut s = [0.0f64; 7];
    for p in &parts {
        for k in 0..7 {
            s[k] += p[k];
        }
    }
    let n = (chunks * per_chunk) as f64;
    let p = s[0] / n;
    let ell = s[1] / n;
    let var_i = p * (1.0 - p);
    let var_t = s[2] / n - ell * ell;
    let cov = s[5] / n - p * ell;
    let ratio = x * p / ell;
    // Delta method for a ratio of means.
    let rel_var = var_i / (p * p) + var_t / (ell * ell) - 2.0 * cov / (p * ell);
    let m1 = s[3] / n;
    Ok(TailRatioMc {
        ratio,
        std_error: ratio * (rel_var.max(0.0) / n).sqrt(),
        ell,
        tail: p,
        ell1_direct: m1,
        ell1_direct_se: ((s[4] / n - m1 * m1).max(0.0) / n).sqrt(),
        draws: n as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BnMode {
    FixedPoint,
    /// `n ℓ(n)` with no iteration.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BruinResult {
    pub b: f64,
    /// Achieved `n ℓ(b)/b`.
    pub ratio: f64,
    pub iterations: u32,
}

/// `b_n` with `n ℓ(b_n)/b_n ≈ 1`.
pub fn bruin_bn(ell: &Ell, n: u64, mode: BnMode) -> Result<BruinResult> {
    if n < 2 {
        return Err(Error::Domain(format!("n = {n} must be >= 2")));
    }
    let ln_n = (n as f64).ln();
    let step = |lb: f64| ln_n + ell.ln_at_log(lb);
    let start = step(ln_n);
    let finish = |lb: f64, iterations| {
        let ratio = (step(lb) - lb).exp();
        Ok(BruinResult {
            b: lb.exp(),
            ratio,
            iterations,
        })
    };
    if mode == BnMode::Direct {
        return finish(start, 0);
    }
    let mut lb = start;
    let mut damping = 1.0;
    let mut last_move = 0.0f64;
    let mut trace = Vec::new();
    for it in 1..=10_000u32 {
        let target = step(lb);
        let mv = damping * (target - lb);
        if mv * last_move < 0.0 {
            damping *= 0.5;
        }
        let next = lb + mv;
        if trace.len() < 8 {
            trace.push(next.exp());
        }
        // Relative change in b is |Δ ln b| to first order.
        if (next - lb).abs() < 1e-9 && (target - lb).abs() < 1e-9 {
            return finish(next, it);
        }
        last_move = mv;
        lb = next;
    }
    Err(Error::Numeric(format!(
        "b_n fixed point did not converge for n = {n}; first iterates {trace:?}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnSchedule {
    /// `a_n = (ln n)^{-exponent}`.
    pub exponent: f64,
    /// `(n, a_n, n P(Y > a_n b_n))` for every probe tried, in order.
    pub probes: Vec<(f64, f64, f64)>,
}

impl AnSchedule {
    pub fn a(&self, n: f64) -> f64 {
        n.ln().powf(-self.exponent)
    }
}

/// Choose `a_n = (ln n)^{-e}`, halving `e` from `1/2` until the probe
/// `n P(Y > a_n b_n)` decreases over `n ∈ {10^3, 10^6, 10^9}`.
pub fn pick_an<B: Fn(f64) -> f64>(y: &PositiveLawY, b: B) -> Result<AnSchedule> {
    let mut exponent = 0.5;
    let mut all = Vec::new();
    for _ in 0..=6 {
        let rows: Vec<(f64, f64, f64)> = [1e3f64, 1e6, 1e9]
            .iter()
            .map(|&n| {
                let a = n.ln().powf(-exponent);
                (n, a, n * tail_prob(y, a * b(n)))
            })
            .collect();
        all.extend_from_slice(&rows);
        let v: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let decreasing = v.windows(2).all(|w| w[1] <= w[0]) && (v[2] < v[0] || v[2] == 0.0);
        if decreasing {
            return Ok(AnSchedule {
                exponent,
                probes: all,
            });
        }
        exponent *= 0.5;
    }
    Err(Error::Numeric(format!(
        "no schedule a_n makes n P(Y > a_n b_n) decrease; probes (n, a_n, value): {all:?}"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// `ℓ(x ℓ(x))/ℓ(x)`.
    SelfComposed,
    /// `ℓ(x/ln x)/ℓ(x)`.
    LogShifted,
    /// Tail ratio of the law whose truncated mean is `ℓ`.
    TailRatio,
}

impl std::str::FromStr for Which {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self_composed" => Ok(Which::SelfComposed),
            "log_shifted" => Ok(Which::LogShifted),
            "tail_ratio" => Ok(Which::TailRatio),
            _ => Err(Error::Input(format!("unknown probe `{s}` (expected self_composed, log_shifted or tail_ratio)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    ConvergesTo1,
    ConvergesTo0,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub which: Which,
    pub ell: String,
    /// `(log10 x, ratio)`.
    pub rows: Vec<(f64, f64)>,
    pub tolerance: f64,
    pub verdict: ProbeVerdict,
}

/// Default probe grid `x = 10^{30k}`, `k = 1..10`.
pub fn default_probe_grid() -> Vec<f64> {
    (1..=10).map(|k| 30.0 * k as f64).collect()
}

/// Ratios `ℓ(xℓ(x))/ℓ(x)`, `ℓ(x/ln x)/ℓ(x)` or the tail ratio of the law
/// with truncated mean `ℓ`, along `x = 10^{g}` for `g` in
/// `log10_grid`, with a trend verdict from the last three points.
pub fn probe_condition(ell: &Ell, which: Which, log10_grid: &[f64], tolerance: f64) -> Result<ProbeReport> {
    if log10_grid.len() < 3 || log10_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("probe grid needs at least three increasing points".into()));
    }
    if log10_grid[log10_grid.len() - 1] - log10_grid[0] < 3.0 {
        return Err(Error::Parameter("probe grid must span at least three decades".into()));
    }
    let ln10 = std::f64::consts::LN_10;
    let mut rows = Vec::with_capacity(log10_grid.len());
    for &g in log10_grid {
        let lx = g * ln10;
        let base = ell.ln_at_log(lx);
        let r = match which {
            Which::SelfComposed => (ell.ln_at_log(lx + base) - base).exp(),
            Which::LogShifted => (ell.ln_at_log(lx - lx.ln()) - base).exp(),
            Which::TailRatio => analytic_tail_ratio(ell, lx)
                .ok_or_else(|| Error::Numeric(format!("tail integral diverged at 10^{g}")))?,
        };
        rows.push((g, r));
    }
    let tail: Vec<f64> = rows[rows.len() - 3..].iter().map(|r| r.1).collect();
    let verdict = match which {
        Which::SelfComposed | Which::LogShifted => {
            let dev: Vec<f64> = tail.iter().map(|r| (r - 1.0).abs()).collect();
            if dev.iter().all(|&d| d < tolerance) {
                ProbeVerdict::ConvergesTo1
            } else if dev.iter().all(|&d| d >= tolerance) && dev.windows(2).all(|w| w[1] > w[0]) {
                ProbeVerdict::Diverges
            } else {
                ProbeVerdict::Inconclusive
            }
        }
        Which::TailRatio => {
            let first = rows[0].1;
            let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
            if decreasing && tail[2] < first / 2.0 {
                ProbeVerdict::ConvergesTo0
            } else if tail.windows(2).all(|w| w[1] >= w[0]) {
                ProbeVerdict::Diverges
            } else {
                ProbeVerdict::Inconclusive
            }
        }
    };
    Ok(ProbeReport {
        which,
        ell: ell.label(),
        rows,
        tolerance,
        verdict,
    })
}
