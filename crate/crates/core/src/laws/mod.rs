//! Noise laws, coefficient laws `(A, B)` and the standing-condition checks.

mod conditions;
mod kevei;
mod noise;

pub use conditions::{check_conditions, Check, ConditionReport};
pub use kevei::KeveiLaw;
pub use noise::{load_column, Atoms, Column, EmpiricalNoise, NoiseLaw, NoiseSpec};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::normal_expectation;
use crate::rng::StreamRng;

/// One atom `((a, b), p)` of a finite coefficient law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

/// Serializable description of a coefficient law `(A, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum LawSpec {
    GarchCritical {
        beta: f64,
        lambda: f64,
        noise: NoiseSpec,
    },
    GarchGeneral {
        beta: f64,
        lambda: f64,
        delta: f64,
        noise: NoiseSpec,
    },
    LognormalAConstB {
        mu: f64,
        sigma: f64,
        b: f64,
    },
    FiniteDiscrete {
        pairs: Vec<PairSpec>,
    },
    Kevei {
        alpha: f64,
        kappa: f64,
        v0: f64,
        p: f64,
        b: f64,
    },
}

/// `σ_j² = (λ Z_j² + δ) σ_{j-1}² + β` viewed as `U_j = A_j U_{j-1} + B_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GarchSre {
    pub beta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub noise: NoiseLaw,
    /// Declared critical (`λ + δ = 1`) at construction.
    pub critical: bool,
}

impl GarchSre {
    #[inline]
    pub fn a_of(&self, z: f64) -> f64 {
        self.lambda * z * z + self.delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairLaw {
    pairs: Vec<(f64, f64)>,
    probs: Vec<f64>,
    index: Atoms,
}

impl PairLaw {
    pub fn new(pairs: &[PairSpec]) -> Result<Self> {
        if pairs.iter().any(|q| !(q.a >= 0.0) || !(q.b >= 0.0)) {
            return Err(Error::Parameter("atoms of (A,B) must be nonnegative".into()));
        }
        let index = Atoms::new(
            &pairs
                .iter()
                .enumerate()
                .map(|(i, q)| (i as f64, q.p))
                .collect::<Vec<_>>(),
        )?;
        Ok(PairLaw {
            pairs: pairs.iter().map(|q| (q.a, q.b)).collect(),
            probs: pairs.iter().map(|q| q.p).collect(),
            index,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = ((f64, f64), f64)> + '_ {
        self.pairs.iter().copied().zip(self.probs.iter().copied())
    }

    #[inline]
    fn sample(&self, rng: &mut StreamRng) -> (f64, f64) {
        self.pairs[self.index.sample_index(rng)]
    }
}

/// Joint law of the nonnegative pair `(A, B)`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientLaw {
    Garch(GarchSre),
    Lognormal { mu: f64, sigma: f64, b: f64 },
    FiniteDiscrete(PairLaw),
    Kevei(KeveiLaw),
}

/// The reduced recursion of a GARCH(1,1) variance: `A = λZ² + δ`, `B = β`.
///
/// `β ≤ 0` would make `B` degenerate at zero and is rejected.
pub fn garch_to_sre(beta: f64, lambda: f64, delta: f64, noise: NoiseLaw) -> Result<CoefficientLaw> {
    if !(beta > 0.0) {
        return Err(Error::Parameter(format!(
            "beta = {beta}: B would vanish identically (requires P(B = 0) < 1)"
        )));
    }
    CoefficientLaw::garch(beta, lambda, delta, noise)
}

/// Heavy tilted-tail family with `ρ = 1 - α`.
pub fn build_kevei_law(alpha: f64, kappa: f64, v0: f64, p: f64, b: f64) -> Result<CoefficientLaw> {
    Ok(CoefficientLaw::Kevei(KeveiLaw::new(alpha, kappa, v0, p, b)?))
}

impl CoefficientLaw {
    /// GARCH reduction without the `β > 0` requirement, so degenerate laws
    /// can still be inspected by [`check_conditions`].
    pub fn garch(beta: f64, lambda: f64, delta: f64, noise: NoiseLaw) -> Result<Self> {
        if !(beta >= 0.0) || !(lambda >= 0.0) || !(delta >= 0.0) {
            return Err(Error::Parameter("beta, lambda, delta must be nonnegative".into()));
        }
        Ok(CoefficientLaw::Garch(GarchSre {
            beta,
            lambda,
            delta,
            noise,
            critical: false,
        }))
    }

    /// Critical GARCH: `δ = 1 - λ`, `λ ∈ (0, 1]`.
    pub fn garch_critical(beta: f64, lambda: f64, noise: NoiseLaw) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Parameter(format!("critical GARCH needs lambda in (0,1], got {lambda}")));
        }
        let mut law = Self::garch(beta, lambda, 1.0 - lambda, noise)?;
        if let CoefficientLaw::Garch(g) = &mut law {
            g.critical = true;
        }
        Ok(law)
    }

    pub fn lognormal(mu: f64, sigma: f64, b: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(b >= 0.0) || !mu.is_finite() {
            return Err(Error::Parameter("lognormal law needs sigma >= 0, b >= 0".into()));
        }
        Ok(CoefficientLaw::Lognormal { mu, sigma, b })
    }

    pub fn finite_discrete(pairs: &[PairSpec]) -> Result<Self> {
        Ok(CoefficientLaw::FiniteDiscrete(PairLaw::new(pairs)?))
    }

    /// Point mass `(a, b)`.
    pub fn constant(a: f64, b: f64) -> Result<Self> {
        Self::finite_discrete(&[PairSpec { a, b, p: 1.0 }])
    }

    pub fn from_spec(spec: &LawSpec) -> Result<Self> {
        match spec {
            LawSpec::GarchCritical {
                beta,
                lambda,
                noise,
            } => Self::garch_critical(*beta, *lambda, NoiseLaw::from_spec(noise)?),
            LawSpec::GarchGeneral {
                beta,
                lambda,
                delta,
                noise,
            } => Self::garch(*beta, *lambda, *delta, NoiseLaw::from_spec(noise)?),
            LawSpec::LognormalAConstB { mu, sigma, b } => Self::lognormal(*mu, *sigma, *b),
            LawSpec::FiniteDiscrete { pairs } => Self::finite_discrete(pairs),
            LawSpec::Kevei {
                alpha,
                kappa,
                v0,
                p,
                b,
            } => build_kevei_law(*alpha, *kappa, *v0, *p, *b),
        }
    }

    pub fn spec(&self) -> LawSpec {
        match self {
            CoefficientLaw::Garch(g) if g.critical => LawSpec::GarchCritical {
                beta: g.beta,
                lambda: g.lambda,
                noise: g.noise.spec(),
            },
            CoefficientLaw::Garch(g) => LawSpec::GarchGeneral {
                beta: g.beta,
                lambda: g.lambda,
                delta: g.delta,
                noise: g.noise.spec(),
            },
            CoefficientLaw::Lognormal { mu, sigma, b } => LawSpec::LognormalAConstB {
                mu: *mu,
                sigma: *sigma,
                b: *b,
            },
            CoefficientLaw::FiniteDiscrete(p) => LawSpec::FiniteDiscrete {
                pairs: p.iter().map(|((a, b), p)| PairSpec { a, b, p }).collect(),
            },
            CoefficientLaw::Kevei(k) => LawSpec::Kevei {
                alpha: k.alpha,
                kappa: k.kappa,
                v0: k.v0,
                p: k.p,
                b: k.b,
            },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CoefficientLaw::Garch(g) if g.critical => "garch_critical",
            CoefficientLaw::Garch(_) => "garch_general",
            CoefficientLaw::Lognormal { .. } => "lognormal_A_const_B",
            CoefficientLaw::FiniteDiscrete(_) => "finite_discrete",
            CoefficientLaw::Kevei(_) => "kevei",
        }
    }

    /// One draw of `(A, B)`.
    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> (f64, f64) {
        match self {
            CoefficientLaw::Garch(g) => (g.a_of(g.noise.sample(rng)), g.beta),
            CoefficientLaw::Lognormal { mu, sigma, b } => {
                let z: f64 = StandardNormal.sample(rng);
                ((mu + sigma * z).exp(), *b)
            }
            CoefficientLaw::FiniteDiscrete(p) => p.sample(rng),
            CoefficientLaw::Kevei(k) => (k.sample_log_a(rng).exp(), k.b),
        }
    }

    /// `E[A^s g(ln A); A > 0]` by enumeration or quadrature; `None` if infinite.
    pub fn moment<G: Fn(f64) -> f64>(&self, s: f64, g: G) -> Option<f64> {
        let v = match self {
            CoefficientLaw::Garch(gs) => gs.noise.expect(|z| {
                let a = gs.a_of(z);
                if a > 0.0 {
                    a.powf(s) * g(a.ln())
                } else {
                    0.0
                }
            })?,
            CoefficientLaw::Lognormal { mu, sigma, .. } => {
                if *sigma == 0.0 {
                    (s * mu).exp() * g(*mu)
                } else {
                    normal_expectation(|z| {
                        let y = mu + sigma * z;
                        (s * y).exp() * g(y)
                    })
                }
            }
            CoefficientLaw::FiniteDiscrete(p) => p
                .iter()
                .filter(|((a, _), q)| *a > 0.0 && *q > 0.0)
                .map(|((a, _), q)| q * a.powf(s) * g(a.ln()))
                .sum(),
            CoefficientLaw::Kevei(k) => k.moment(s, g, f64::NEG_INFINITY)?,
        };
        v.is_finite().then_some(v)
    }

    /// Merged atoms of `A` when `A` has finite support.
    pub fn a_atoms(&self) -> Option<Vec<(f64, f64)>> {
        let raw: Vec<(f64, f64)> = match self {
            CoefficientLaw::Garch(g) => {
                if g.lambda == 0.0 {
                    vec![(g.delta, 1.0)]
                } else {
                    g.noise
                        .atoms()?
                        .into_iter()
                        .map(|(z, p)| (g.a_of(z), p))
                        .collect()
                }
            }
            CoefficientLaw::Lognormal { mu, sigma, .. } if *sigma == 0.0 => vec![(mu.exp(), 1.0)],
            CoefficientLaw::FiniteDiscrete(p) => p.iter().map(|((a, _), q)| (a, q)).collect(),
            _ => return None,
        };
        Some(merge_atoms(raw))
    }

    /// `P(A = 0)`.
    pub fn prob_a_zero(&self) -> f64 {
        match self.a_atoms() {
            Some(atoms) => atoms.iter().filter(|(a, _)| *a == 0.0).map(|(_, p)| p).sum(),
            None => 0.0,
        }
    }

    /// `B` when it is almost surely constant.
    pub fn b_constant(&self) -> Option<f64> {
        match self {
            CoefficientLaw::Garch(g) => Some(g.beta),
            CoefficientLaw::Lognormal { b, .. } => Some(*b),
            CoefficientLaw::Kevei(k) => Some(k.b),
            CoefficientLaw::FiniteDiscrete(p) => {
                let mut it = p.iter().filter(|(_, q)| *q > 0.0).map(|((_, b), _)| b);
                let first = it.next()?;
                it.all(|b| b == first).then_some(first)
            }
        }
    }

    /// `E B^s` (all variants have bounded `B`).
    pub fn b_moment(&self, s: f64) -> f64 {
        match self {
            CoefficientLaw::FiniteDiscrete(p) => p
                .iter()
                .filter(|(_, q)| *q > 0.0)
                .map(|((_, b), q)| q * if b == 0.0 { 0.0 } else { b.powf(s) })
                .sum(),
            _ => self.b_constant().expect("constant B").powf(s),
        }
    }

    /// `P(B = 0)`.
    pub fn prob_b_zero(&self) -> f64 {
        match self {
            CoefficientLaw::FiniteDiscrete(p) => {
                p.iter().filter(|((_, b), _)| *b == 0.0).map(|(_, q)| q).sum()
            }
            _ => {
                if self.b_constant() == Some(0.0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Sampler for the pair `(A, B)` under the size-biased law `A dP`.
    ///
    /// Only meaningful when `E A = 1`; used by the spine estimator of
    /// truncated first moments.
    pub fn size_biased(&self) -> Result<SizeBiased> {
        let mean_a = self
            .moment(1.0, |_| 1.0)
            .ok_or_else(|| Error::Unsupported("E A is infinite".into()))?;
        if (mean_a - 1.0).abs() > 1e-9 {
            return Err(Error::Unsupported(format!(
                "size-biased sampling needs E A = 1 (kappa = 1), got E A = {mean_a}"
            )));
        }
        Ok(match self {
            CoefficientLaw::Garch(g) => match &g.noise {
                NoiseLaw::StandardNormal => SizeBiased::NormalGarch {
                    lambda: g.lambda,
                    delta: g.delta,
                    beta: g.beta,
                },
                NoiseLaw::Discrete(_) | NoiseLaw::Empirical(_) => {
                    let pairs: Vec<(f64, f64)> = g
                        .noise
                        .atoms()
                        .expect("finite noise")
                        .into_iter()
                        .map(|(z, p)| (g.a_of(z), p))
                        .collect();
                    SizeBiased::atoms(pairs.iter().map(|&(a, p)| ((a, g.beta), p)))?
                }
                NoiseLaw::StudentT { .. } => {
                    return Err(Error::Unsupported(
                        "size-biased sampling for Student t noise".into(),
                    ))
                }
            },
            CoefficientLaw::Lognormal { mu, sigma, b } => SizeBiased::Lognormal {
                mu: mu + sigma * sigma,
                sigma: *sigma,
                b: *b,
            },
            CoefficientLaw::FiniteDiscrete(p) => SizeBiased::atoms(p.iter())?,
            CoefficientLaw::Kevei(k) => SizeBiased::Kevei {
                up: k.p * k.tilted_mass,
                law: k.clone(),
            },
        })
    }
}

fn merge_atoms(mut raw: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    raw.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
    for (a, p) in raw {
        match out.last_mut() {
            Some(last) if last.0 == a => last.1 += p,
            _ => out.push((a, p)),
        }
    }
    out.retain(|&(_, p)| p > 0.0);
    out
}

/// Draws from `a · P(da, db)` for laws with `E A = 1`.
#[derive(Debug, Clone)]
pub enum SizeBiased {
    Pairs { law: PairLaw },
    /// Mixture: untilted `Z` w.p. `δ`, `Z² ~ χ²₃` w.p. `λ`.
    NormalGarch { lambda: f64, delta: f64, beta: f64 },
    Lognormal { mu: f64, sigma: f64, b: f64 },
    /// Up-jump w.p. `p E e^{V}` with `ln A ~ Pareto(α, v0)`, else `ln A = -w`.
    Kevei { up: f64, law: KeveiLaw },
}

impl SizeBiased {
    fn atoms(pairs: impl Iterator<Item = ((f64, f64), f64)>) -> Result<Self> {
        let weighted: Vec<PairSpec> = pairs
            .map(|((a, b), p)| PairSpec { a, b, p: a * p })
            .collect();
        let total: f64 = weighted.iter().map(|q| q.p).sum();
        let normalized: Vec<PairSpec> = weighted
            .into_iter()
            .map(|q| PairSpec { p: q.p / total, ..q })
            .collect();
        Ok(SizeBiased::Pairs {
            law: PairLaw::new(&normalized)?,
        })
    }

    #[inline]
    pub fn sample(&self, rng: &mut StreamRng) -> (f64, f64) {
        match self {
            SizeBiased::Pairs { law } => law.sample(rng),
            SizeBiased::NormalGarch {
                lambda,
                delta,
                beta,
            } => {
                let z2 = if rng.uniform() < *delta / (lambda + delta) {
                    let z: f64 = StandardNormal.sample(rng);
                    z * z
                } else {
                    (0..3)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(rng);
                            z * z
                        })
                        .sum()
                };
                (lambda * z2 + delta, *beta)
            }
            SizeBiased::Lognormal { mu, sigma, b } => {
                let z: f64 = StandardNormal.sample(rng);
                ((mu + sigma * z).exp(), *b)
            }
            SizeBiased::Kevei { up, law } => {
                let log_a = if rng.uniform() < *up {
                    law.sample_pareto(rng)
                } else {
                    -law.w
                };
                (log_a.exp(), law.b)
            }
        }
    }

    /// Same draw, returning `(ln A, B)` so huge jumps do not overflow.
    #[inline]
    pub fn sample_log(&self, rng: &mut StreamRng) -> (f64, f64) {
        match self {
            SizeBiased::Kevei { up, law } => {
                let log_a = if rng.uniform() < *up {
                    law.sample_pareto(rng)
                } else {
                    -law.w
                };
                (log_a, law.b)
            }
            _ => {
                let (a, b) = self.sample(rng);
                (a.ln(), b)
            }
        }
    }
}
