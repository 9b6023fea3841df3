//! The multiplicative GARCH noise `Z` (mean 0, variance 1).

use std::path::Path;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate_to_infinity, normal_expectation};
use crate::rng::StreamRng;

const PROB_TOL: f64 = 1e-12;
const MOMENT_TOL: f64 = 1e-8;

/// Column selector for CSV noise files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

/// Serializable description of a noise law, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum NoiseSpec {
    StandardNormal,
    Discrete {
        points: Vec<(f64, f64)>,
    },
    StudentTNormalized {
        df: f64,
    },
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<Column>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
    },
}

/// A finite law given by atoms and probabilities, sampled by inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Atoms {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Parameter("discrete law needs at least one atom".into()));
        }
        if points.iter().any(|&(v, p)| !(p >= 0.0) || !v.is_finite()) {
            return Err(Error::Parameter("atoms need finite values and probabilities >= 0".into()));
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Parameter(format!(
                "probabilities sum to {total}, not 1 within {PROB_TOL}"
            )));
        }
        let mut acc = 0.0;
        let cumulative = points
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(Atoms {
            values: points.iter().map(|p| p.0).collect(),
            probs: points.iter().map(|p| p.1).collect(),
            cumulative,
        })
    }

    #[inline]
    pub fn sample_index(&self, rng: &mut StreamRng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.uniform() * total;
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.values.len() - 1)
    }

    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        self.values[self.sample_index(rng)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A loaded, studentized sample; draws are uniform over its points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalNoise {
    values: Arc<Vec<f64>>,
    source: NoiseSpec,
}

impl EmpiricalNoise {
    /// Shift and scale `raw` to mean 0 and (population) variance 1.
    pub fn studentize(raw: Vec<f64>, source: NoiseSpec) -> Result<Self> {
        if raw.len() < 2 {
            return Err(Error::Input("empirical noise needs at least two values".into()));
        }
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::Input("empirical noise has zero or non-finite variance".into()));
        }
        let sd = var.sqrt();
        let values = raw.iter().map(|x| (x - mean) / sd).collect();
        Ok(EmpiricalNoise {
            values: Arc::new(values),
            source,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Distribution of the multiplicative noise `Z`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseLaw {
    StandardNormal,
    Discrete(Atoms),
    /// Student t with `df > 2` degrees of freedom scaled to unit variance.
    StudentT { df: f64, scale: f64 },
    Empirical(EmpiricalNoise),
}

impl NoiseLaw {
    pub fn standard_normal() -> Self {
        NoiseLaw::StandardNormal
    }

    /// Finite law, validated for unit variance and zero mean.
    pub fn discrete(points: &[(f64, f64)]) -> Result<Self> {
        let atoms = Atoms::new(points)?;
        let mean: f64 = atoms.iter().map(|(v, p)| v * p).sum();
        let second: f64 = atoms.iter().map(|(v, p)| v * v * p).sum();
        if mean.abs() > MOMENT_TOL || (second - 1.0).abs() > MOMENT_TOL {
            return Err(Error::Parameter(format!(
                "noise must have E Z = 0 and E Z^2 = 1 (got {mean}, {second})"
            )));
        }
        Ok(NoiseLaw::Discrete(atoms))
    }

    /// The three-point law `{±√2 w.p. 1/4, 0 w.p. 1/2}`.
    pub fn three_point() -> Self {
        let r = std::f64::consts::SQRT_2;
        NoiseLaw::discrete(&[(r, 0.25), (0.0, 0.5), (-r, 0.25)]).expect("valid law")
    }

    pub fn student_t(df: f64) -> Result<Self> {
        if !(df > 2.0) {
            return Err(Error::Parameter(format!("student t needs df > 2, got {df}")));
        }
        Ok(NoiseLaw::StudentT {
            df,
            scale: ((df - 2.0) / df).sqrt(),
        })
    }

    pub fn from_spec(spec: &NoiseSpec) -> Result<Self> {
        match spec {
            NoiseSpec::StandardNormal => Ok(NoiseLaw::StandardNormal),
            NoiseSpec::Discrete { points } => NoiseLaw::discrete(points),
            NoiseSpec::StudentTNormalized { df } => NoiseLaw::student_t(*df),
            NoiseSpec::Empirical {
                path,
                column,
                values,
            } => {
                let raw = match (path, values) {
                    (Some(p), None) => load_column(Path::new(p), column.as_ref())?,
                    (None, Some(v)) => v.clone(),
                    _ => {
                        return Err(Error::Parameter(
                            "empirical noise needs exactly one of `path` or `values`".into(),
                        ))
                    }
                };
                Ok(NoiseLaw::Empirical(EmpiricalNoise::studentize(raw, spec.clone())?))
            }
        }
    }

    pub fn spec(&self) -> NoiseSpec {
        match self {
            NoiseLaw::StandardNormal => NoiseSpec::StandardNormal,
            NoiseLaw::Discrete(a) => NoiseSpec::Discrete {
                points: a.iter().collect(),
            },
            NoiseLaw::StudentT { df, .. } => NoiseSpec::StudentTNormalized { df: *df },
            NoiseLaw::Empirical(e) => e.source.clone(),
        }
    }

    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        match self {
            NoiseLaw::StandardNormal => StandardNormal.sample(rng),
            NoiseLaw::Discrete(a) => a.sample(rng),
            NoiseLaw::StudentT { df, scale } => {
                let t: f64 = StudentT::new(*df).expect("validated df").sample(rng);
                t * scale
            }
            NoiseLaw::Empirical(e) => {
                let n = e.values.len() as u64;
                // Lemire-style multiply-shift; bias is below 2^-40 for realistic n.
                let idx = ((rng.next_raw() as u128 * n as u128) >> 64) as usize;
                e.values[idx]
            }
        }
    }

    /// Atoms of `Z` for finite-support variants.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            NoiseLaw::Discrete(a) => Some(a.iter().collect()),
            NoiseLaw::Empirical(e) => {
                let w = 1.0 / e.values.len() as f64;
                Some(e.values.iter().map(|&v| (v, w)).collect())
            }
            _ => None,
        }
    }

    /// `E f(Z)` by enumeration or quadrature. `None` when the integral diverges.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Option<f64> {
        match self {
            NoiseLaw::Discrete(_) | NoiseLaw::Empirical(_) => {
                let atoms = self.atoms().expect("finite law");
                let v: f64 = atoms.iter().map(|&(z, p)| if p > 0.0 { p * f(z) } else { 0.0 }).sum();
                v.is_finite().then_some(v)
            }
            NoiseLaw::StandardNormal => {
                let v = normal_expectation(f);
                v.is_finite().then_some(v)
            }
            NoiseLaw::StudentT { df, scale } => {
                let c = student_t_norm(*df);
                let dens = |t: f64| c * (1.0 + t * t / df).powf(-0.5 * (df + 1.0));
                integrate_to_infinity(|t| (f(scale * t) + f(-scale * t)) * dens(t), 0.0)
            }
        }
    }

    /// `P(Z^2 != 1)`, exact for finite laws and 1 for continuous ones.
    pub fn prob_z2_ne_one(&self) -> f64 {
        match self.atoms() {
            Some(atoms) => atoms
                .iter()
                .filter(|(z, _)| (z * z - 1.0).abs() > 1e-12)
                .map(|(_, p)| p)
                .sum(),
            None => 1.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NoiseLaw::StandardNormal => "standard_normal",
            NoiseLaw::Discrete(_) => "discrete",
            NoiseLaw::StudentT { .. } => "student_t_normalized",
            NoiseLaw::Empirical(_) => "empirical",
        }
    }
}

fn student_t_norm(df: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    (ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df)).exp() / (df * std::f64::consts::PI).sqrt()
}

/// Read one numeric column: plain text (one value per line) or CSV with a
/// header row when `column` names a field.
pub fn load_column(path: &Path, column: Option<&Column>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let idx = match column {
        None => 0,
        Some(Column::Index(i)) => *i,
        Some(Column::Name(name)) => {
            let header = lines
                .next()
                .ok_or_else(|| Error::Input(format!("{} is empty", path.display())))?;
            header
                .split(',')
                .position(|h| h.trim().trim_matches('"') == name)
                .ok_or_else(|| Error::Input(format!("no column `{name}` in {}", path.display())))?
        }
    };
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let field = line.split(',').nth(idx).ok_or_else(|| {
            Error::Input(format!("{}: line {} has no column {idx}", path.display(), lineno + 1))
        })?;
        let v: f64 = field.trim().parse().map_err(|_| {
            Error::Input(format!("{}: `{}` is not a number", path.display(), field.trim()))
        })?;
        out.push(v);
    }
    Ok(out)
}
