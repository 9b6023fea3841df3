//! Moment function `ψ`, the index `κ`, tilted log-moments, the profile
//! `h_A`, normalizers `g_A` and derived constants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::laws::{Check, CoefficientLaw, NoiseLaw};
use crate::numeric::{bracketed_root, ols};
use crate::par::map_reps;
use crate::rng::Stream;
use crate::slowvary::Ell;
use crate::sre::{perpetuity_draw, DEFAULT_MAX_DEPTH, DEFAULT_TOL};

/// A value with its Monte Carlo error. Analytic values carry zero error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub reps: u64,
    pub ci95: (f64, f64),
    pub method: String,
    /// Set when too many underlying samples were flagged.
    pub unreliable: bool,
}

impl Estimate {
    pub fn exact(value: f64, method: &str) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            reps: 0,
            ci95: (value, value),
            method: method.into(),
            unreliable: false,
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64, reps: u64, method: &str) -> Self {
        Estimate {
            value,
            std_error,
            reps,
            ci95: (value - 1.959_963_984_540_054 * std_error, value + 1.959_963_984_540_054 * std_error),
            method: method.into(),
            unreliable: false,
        }
    }

    pub fn is_analytic(&self) -> bool {
        self.std_error == 0.0
    }
}

fn method_of(law: &CoefficientLaw) -> &'static str {
    match law {
        CoefficientLaw::FiniteDiscrete(_) => "enumeration",
        CoefficientLaw::Lognormal { .. } => "closed_form",
        CoefficientLaw::Garch(g) => match g.noise {
            NoiseLaw::Discrete(_) | NoiseLaw::Empirical(_) => "enumeration",
            _ => "quadrature",
        },
        CoefficientLaw::Kevei(_) => "quadrature",
    }
}

/// `ψ(p) = E A^p I(A > 0)`; `+∞` when the moment diverges.
pub fn psi(law: &CoefficientLaw, p: f64) -> Result<Estimate> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("psi needs p > 0, got {p}")));
    }
    let value = match law {
        CoefficientLaw::Lognormal { mu, sigma, .. } => (p * mu + 0.5 * p * p * sigma * sigma).exp(),
        _ => law.moment(p, |_| 1.0).unwrap_or(f64::INFINITY),
    };
    Ok(Estimate::exact(value, method_of(law)))
}

fn psi_value(law: &CoefficientLaw, p: f64) -> f64 {
    psi(law, p).map(|e| e.value).unwrap_or(f64::NAN)
}

/// The root `κ > 0` of `ψ(κ) = 1`.
///
/// Critical GARCH returns 1 and the heavy tilted-tail family returns its
/// construction parameter, after checking `ψ(κ) = 1`, because `ψ` is
/// infinite just past `κ` there and has no bracket.
pub fn solve_kappa(law: &CoefficientLaw) -> Result<f64> {
    match law {
        CoefficientLaw::Garch(g) if g.critical => {
            if g.noise.prob_z2_ne_one() == 0.0 {
                return Err(Error::NoRoot("A = 1 almost surely; psi is identically 1".into()));
            }
            return Ok(1.0);
        }
        CoefficientLaw::Kevei(k) => {
            let v = psi_value(law, k.kappa);
            if (v - 1.0).abs() > 1e-8 {
                return Err(Error::NoRoot(format!("E A^kappa = {v} != 1")));
            }
            return Ok(k.kappa);
        }
        CoefficientLaw::Lognormal { mu, sigma, .. } if *sigma > 0.0 && *mu < 0.0 => {
            return Ok(-2.0 * mu / (sigma * sigma));
        }
        _ => {}
    }
    if let Some(atoms) = law.a_atoms() {
        if atoms.iter().all(|&(a, _)| (a - 1.0).abs() < 1e-12) {
            return Err(Error::NoRoot("A = 1 almost surely; psi is identically 1".into()));
        }
    }
    // Lower side: psi(p) < 1 for small p needs P(A = 0) > 0 or E ln A < 0.
    let mut lo = None;
    let mut p = 0.5;
    for _ in 0..40 {
        let v = psi_value(law, p);
        if v < 1.0 {
            lo = Some(p);
            break;
        }
        p *= 0.5;
    }
    let lo = lo.ok_or_else(|| {
        Error::NoRoot("lower side: psi(p) >= 1 for all small p (E ln A >= 0)".into())
    })?;
    let mut hi = None;
    let mut p = lo;
    for _ in 0..64 {
        p *= 2.0;
        let v = psi_value(law, p);
        if v > 1.0 {
            hi = Some(p);
            break;
        }
    }
    let hi = hi.ok_or_else(|| {
        Error::NoRoot(format!("upper side: psi(p) <= 1 up to p = {p} (A <= 1 almost surely?)"))
    })?;
    let mut lo = lo;
    // The bracket may start below the minimum of psi; move lo up to the
    // last point with psi < 1 before hi.
    let mut q = lo;
    while q * 2.0 < hi {
        q *= 2.0;
        if psi_value(law, q) < 1.0 {
            lo = q;
        }
    }
    bracketed_root(|p| psi_value(law, p).ln(), lo, hi, 1e-13)
}

/// `E A^κ ln A` split into its `ln⁺` and `ln⁻` parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedLogMoment {
    pub plus: Estimate,
    pub minus: Estimate,
    /// `plus - minus`, `+∞` when the positive part diverges.
    pub total: f64,
}

pub fn tilted_log_moment(law: &CoefficientLaw, kappa: f64) -> TiltedLogMoment {
    let method = method_of(law);
    let plus = match law {
        CoefficientLaw::Kevei(k) => k.moment(kappa, |v| v.max(0.0), 0.0),
        _ => law.moment(kappa, |v| v.max(0.0)),
    }
    .unwrap_or(f64::INFINITY);
    let minus = law.moment(kappa, |v| (-v).max(0.0)).unwrap_or(f64::INFINITY);
    TiltedLogMoment {
        plus: Estimate::exact(plus, method),
        minus: Estimate::exact(minus, method),
        total: plus - minus,
    }
}

/// `h_A(x) = E A^κ ln⁺(A ∧ e^x)`.
pub fn h_a(law: &CoefficientLaw, kappa: f64, x: f64) -> f64 {
    match law {
        CoefficientLaw::Kevei(k) => k.moment(kappa, |v| v.min(x), 0.0),
        _ => law.moment(kappa, |v| v.clamp(0.0, x)),
    }
    .unwrap_or(f64::INFINITY)
}

/// Normalizer descriptor: finite tilted log-moment, or a regularly varying
/// `h_A(x) = x^ρ ℓ(x)`.
#[derive(Debug, Clone)]
pub enum SlowVariationProfile {
    Finite { m: f64 },
    RegVar { rho: f64, ell: Ell },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub branch: &'static str,
    pub m: Option<f64>,
    pub rho: Option<f64>,
    pub ell: Option<String>,
}

impl SlowVariationProfile {
    pub fn summary(&self) -> ProfileSummary {
        match self {
            SlowVariationProfile::Finite { m } => ProfileSummary {
                branch: "finite",
                m: Some(*m),
                rho: None,
                ell: None,
            },
            SlowVariationProfile::RegVar { rho, ell } => ProfileSummary {
                branch: "regvar",
                m: None,
                rho: Some(*rho),
                ell: Some(ell.label()),
            },
        }
    }
}

/// Finite branch when `E A^κ ln⁺A < ∞`; otherwise a least-squares fit of
/// `ln h_A` against `ln x` over the upper `window` fraction of the grid.
pub fn fit_profile(law: &CoefficientLaw, kappa: f64, x_grid: &[f64], window: f64) -> Result<SlowVariationProfile> {
    let tlm = tilted_log_moment(law, kappa);
    if tlm.plus.value.is_finite() {
        let m = tlm.total;
        if !(m > 0.0) {
            return Err(Error::Numeric(format!(
                "E A^kappa ln A = {m} <= 0 contradicts convexity of psi at kappa"
            )));
        }
        return Ok(SlowVariationProfile::Finite { m });
    }
    if x_grid.len() < 4 || x_grid.windows(2).any(|w| w[0] >= w[1]) || x_grid[0] <= 0.0 {
        return Err(Error::Parameter("x_grid must be positive, increasing, with >= 4 points".into()));
    }
    if x_grid[x_grid.len() - 1] / x_grid[0] < 100.0 {
        return Err(Error::Parameter("x_grid must span at least two decades".into()));
    }
    let lx: Vec<f64> = x_grid.iter().map(|x| x.ln()).collect();
    let cut = lx[0] + (1.0 - window) * (lx[lx.len() - 1] - lx[0]);
    let (xs, ys): (Vec<f64>, Vec<f64>) = x_grid
        .iter()
        .zip(&lx)
        .filter(|(_, &l)| l >= cut - 1e-12)
        .map(|(&x, &l)| (l, h_a(law, kappa, x).ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::Parameter("fit window holds fewer than two grid points".into()));
    }
    let (slope, _) = ols(&xs, &ys);
    let rho = slope.clamp(0.0, 1.0 - 1e-9);
    let law = law.clone();
    let ell = Ell::func(format!("h_A(x)/x^{rho}"), move |x| h_a(&law, kappa, x) / x.powf(rho));
    Ok(SlowVariationProfile::RegVar { rho, ell })
}

/// Normalizer of `E U^κ I(U ≤ t)`.
pub fn g_a(profile: &SlowVariationProfile, t: f64) -> Result<f64> {
    if !(t > 1.0) {
        return Err(Error::Domain(format!("g_A needs t > 1, got {t}")));
    }
    let lt = t.ln();
    Ok(match profile {
        SlowVariationProfile::Finite { m } => lt / m,
        SlowVariationProfile::RegVar { rho, ell } => {
            let l = ell.eval(lt);
            if *rho == 0.0 {
                lt / l
            } else {
                let pr = std::f64::consts::PI * rho;
                pr.sin() / (pr * (1.0 - rho)) * lt.powf(1.0 - rho) / l
            }
        }
    })
}

/// `D = E[(AU + B)^κ - (AU)^κ]` with `U` an independent perpetuity.
///
/// At `κ = 1` this is `E B` exactly; otherwise it is estimated from `reps`
/// independent pairs and marked unreliable when more than 0.1% of the
/// perpetuity draws were flagged.
pub fn d_constant(law: &CoefficientLaw, kappa: f64, stream: &Stream, reps: u64) -> Result<Estimate> {
    if kappa == 1.0 {
        return Ok(Estimate::exact(law.b_moment(1.0), "closed_form"));
    }
    if reps < 10_000 {
        return Err(Error::Parameter(format!("D needs reps >= 10^4, got {reps}")));
    }
    let draws = map_reps(stream, reps, None, |_, s| {
        let mut rng = s.rng();
        let u = perpetuity_draw(&mut rng, law, DEFAULT_TOL, DEFAULT_MAX_DEPTH);
        let (a, b) = law.sample(&mut rng);
        let au = a * u.value;
        ((au + b).powf(kappa) - au.powf(kappa), u.flagged())
    })?;
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let flagged = draws.iter().filter(|d| d.1).count() as f64;
    let (m, se) = crate::stats::mean_se(&values);
    let mut e = Estimate::monte_carlo(m, se, reps, "monte_carlo");
    e.unreliable = flagged > 1e-3 * reps as f64 || !m.is_finite();
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KestenConstant {
    /// Slope of `E U^κ I(U ≤ t)` against `ln t`.
    pub c_prime: f64,
    /// `c_prime / κ` in the non-arithmetic regime.
    pub tail_constant: Option<f64>,
    pub reason: Option<String>,
}

pub fn kesten_constant(d: f64, kappa: f64, m: f64, nonarithmetic: Check) -> Result<KestenConstant> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("tilted log-moment m = {m} must lie in (0, inf)")));
    }
    let c_prime = d / m;
    Ok(match nonarithmetic {
        Check::Pass => KestenConstant {
            c_prime,
            tail_constant: Some(c_prime / kappa),
            reason: None,
        },
        other => KestenConstant {
            c_prime,
            tail_constant: None,
            reason: Some(format!("ln A non-arithmetic check is {other:?}")),
        },
    })
}

/// `C_{λ,Z} = 1 / E[(1 + λ(Z² - 1)) ln(1 + λ(Z² - 1))]`.
pub fn c_lambda_z(noise: &NoiseLaw, lambda: f64) -> Result<Estimate> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Parameter(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    if noise.prob_z2_ne_one() == 0.0 {
        return Err(Error::Parameter("requires P(Z^2 != 1) > 0".into()));
    }
    let f = |z: f64| {
        let a = 1.0 + lambda * (z * z - 1.0);
        if a > 0.0 {
            a * a.ln()
        } else {
            0.0
        }
    };
    let plus = noise.expect(|z| f(z).max(0.0));
    let m = noise.expect(f);
    match (plus, m) {
        (Some(_), Some(m)) if m > 0.0 => {
            let method = match noise {
                NoiseLaw::Discrete(_) | NoiseLaw::Empirical(_) => "enumeration",
                _ => "quadrature",
            };
            Ok(Estimate::exact(1.0 / m, method))
        }
        (Some(_), Some(m)) => Err(Error::Numeric(format!("tilted log-moment {m} is not positive"))),
        _ => Err(Error::Unsupported(
            "E A ln+ A is infinite; use the regularly varying g_A branch".into(),
        )),
    }
}

/// `C_{λ,Z}` for the three-point noise, `2/((1+λ)ln(1+λ) + (1-λ)ln(1-λ))`.
pub fn c_lambda_three_point(lambda: f64) -> f64 {
    let xlx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    2.0 / (xlx(1.0 + lambda) + xlx(1.0 - lambda))
}

/// Everything the `constants` table reports for one law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsTable {
    pub law: String,
    pub kappa: f64,
    pub m: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub d: Estimate,
    pub c_prime: Option<f64>,
    pub tail_constant: Option<f64>,
    pub c_lambda_z: Option<f64>,
    pub nonarithmetic: Check,
}

pub fn constants_table(law: &CoefficientLaw, stream: &Stream, reps: u64) -> Result<ConstantsTable> {
    let kappa = solve_kappa(law)?;
    let tlm = tilted_log_moment(law, kappa);
    let d = d_constant(law, kappa, stream, reps)?;
    let report = crate::laws::check_conditions(law, Some(kappa));
    let nonarith = report.nonarithmetic_log_a.status;
    let kc = kesten_constant(d.value, kappa, tlm.total, nonarith).ok();
    let clz = match law {
        CoefficientLaw::Garch(g) if g.critical => c_lambda_z(&g.noise, g.lambda).ok().map(|e| e.value),
        _ => None,
    };
    Ok(ConstantsTable {
        law: law.label().into(),
        kappa,
        m: tlm.total,
        m_plus: tlm.plus.value,
        m_minus: tlm.minus.value,
        d,
        c_prime: kc.as_ref().map(|k| k.c_prime),
        tail_constant: kc.and_then(|k| k.tail_constant),
        c_lambda_z: clz,
        nonarithmetic: nonarith,
    })
}
