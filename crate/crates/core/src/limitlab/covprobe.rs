//! Lag covariances of clipped stationary SRE values.

use serde::{Deserialize, Serialize};

use super::report::{ExperimentReport, Level, Verdict};
use crate::analytics::solve_kappa;
use crate::error::{Error, Result};
use crate::laws::CoefficientLaw;
use crate::numeric::ols;
use crate::par::map_reps;
use crate::rng::Stream;
use crate::sre::{chi_h, perpetuity_draw, DEFAULT_MAX_DEPTH, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovSpec {
    pub h: f64,
    /// Second clipping level for the `h²` envelope check.
    pub h2: Option<f64>,
    pub max_lag: usize,
    pub reps: u64,
    /// Fitted `η̂` must stay below this.
    pub eta_threshold: f64,
    /// Allowed excess over `(h_hi/h_lo)²` in the lag-1 ratio.
    pub envelope_tolerance: f64,
}

impl Default for CovSpec {
    fn default() -> Self {
        CovSpec {
            h: 1e3,
            h2: Some(1e2),
            max_lag: 10,
            reps: 200_000,
            eta_threshold: 1.0,
            envelope_tolerance: 0.5,
        }
    }
}

/// Covariance and its standard error for each lag `0..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagCovariances {
    pub h: f64,
    pub cov: Vec<f64>,
    pub se: Vec<f64>,
}

impl LagCovariances {
    fn from_paths(paths: &[Vec<f64>], h: f64) -> Self {
        let n = paths.len() as f64;
        let lags = paths[0].len();
        let clipped: Vec<Vec<f64>> = paths.iter().map(|p| p.iter().map(|&u| chi_h(u, h)).collect()).collect();
        let means: Vec<f64> = (0..lags).map(|j| clipped.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let mut cov = Vec::with_capacity(lags);
        let mut se = Vec::with_capacity(lags);
        for j in 0..lags {
            let prods: Vec<f64> = clipped.iter().map(|p| (p[0] - means[0]) * (p[j] - means[j])).collect();
            let (m, s) = crate::stats::mean_se(&prods);
            cov.push(m * n / (n - 1.0));
            se.push(s);
        }
        LagCovariances { h, cov, se }
    }

    /// Lags `j ≥ 1` whose estimate exceeds three standard errors.
    pub fn significant(&self) -> Vec<usize> {
        (1..self.cov.len())
            .filter(|&j| self.cov[j].abs() > 3.0 * self.se[j])
            .collect()
    }

    /// `exp` of the slope of `ln |σ̂_j|` on `j` over the significant lags.
    pub fn decay_rate(&self) -> Option<f64> {
        let lags = self.significant();
        if lags.len() < 2 {
            return None;
        }
        let x: Vec<f64> = lags.iter().map(|&j| j as f64).collect();
        let y: Vec<f64> = lags.iter().map(|&j| self.cov[j].abs().ln()).collect();
        Some(ols(&x, &y).0.exp())
    }
}

pub fn covariance_decay_probe(
    law: &CoefficientLaw,
    kappa: Option<f64>,
    spec: &CovSpec,
    stream: &Stream,
    threads: Option<usize>,
) -> Result<ExperimentReport> {
    let levels: Vec<f64> = std::iter::once(spec.h).chain(spec.h2).collect();
    if levels.iter().any(|&h| !(h >= 1.0)) {
        return Err(Error::Parameter("clipping levels must be >= 1".into()));
    }
    if spec.max_lag < 1 || spec.reps < 100 {
        return Err(Error::Parameter("need max_lag >= 1 and reps >= 100".into()));
    }
    let kappa = match kappa {
        Some(k) => k,
        None => solve_kappa(law)?,
    };
    let mut report = ExperimentReport::new(&format!("covprobe/{}", law.label()));
    let runs = map_reps(stream, spec.reps, threads, |_, s| {
        let mut rng = s.rng();
        let start = perpetuity_draw(&mut rng, law, DEFAULT_TOL, DEFAULT_MAX_DEPTH);
        let mut u = start.value;
        let mut path = Vec::with_capacity(spec.max_lag + 1);
        path.push(u.powf(kappa));
        for _ in 0..spec.max_lag {
            let (a, b) = law.sample(&mut rng);
            u = a * u + b;
            path.push(u.powf(kappa));
        }
        (path, start.flagged())
    })?;
    report.flags.truncated = runs.iter().filter(|r| r.1).count() as u64;
    let paths: Vec<Vec<f64>> = runs.into_iter().map(|r| r.0).collect();
    let estimates: Vec<LagCovariances> = levels.iter().map(|&h| LagCovariances::from_paths(&paths, h)).collect();
    for e in &estimates {
        let series = format!("cov_h{}", e.h);
        for (j, (&c, &s)) in e.cov.iter().zip(&e.se).enumerate() {
            report.push(Level::new(&series, j as f64, c, s));
        }
    }
    let main = &estimates[0];
    let quiet = (1..main.cov.len()).filter(|&j| main.cov[j].abs() <= 3.0 * main.se[j]).count();
    report.push(Level::exact("lags_within_3se", spec.h, quiet as f64));
    match main.decay_rate() {
        Some(eta) => {
            report.push(Level::exact("eta_hat", spec.h, eta));
            report.verdict(Verdict::check(
                "geometric_decay",
                format!("eta_hat < {}", spec.eta_threshold),
                eta,
                eta < spec.eta_threshold,
            ));
        }
        None => report.verdict(Verdict::inconclusive(
            "geometric_decay",
            "needs two lags above 3 SE",
            main.significant().len() as f64,
        )),
    }
    if let Some(second) = estimates.get(1) {
        let (lo, hi) = if second.h < main.h { (second, main) } else { (main, second) };
        let ratio = hi.cov[1] / lo.cov[1];
        let bound = (hi.h / lo.h).powi(2) * (1.0 + spec.envelope_tolerance);
        if lo.cov[1].abs() > 3.0 * lo.se[1] {
            report.push(Level::exact("h_exponent", hi.h, ratio.abs().ln() / (hi.h / lo.h).ln()));
            report.verdict(Verdict::check(
                "h_envelope",
                format!("lag-1 ratio <= {bound}"),
                ratio,
                ratio.abs() <= bound,
            ));
        } else {
            report.verdict(Verdict::inconclusive("h_envelope", "lag-1 covariance below 3 SE", ratio));
        }
    }
    Ok(report.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{NoiseLaw, PairSpec};
    use crate::rng::make_stream;

    #[test]
    fn iid_sequence_has_no_lag_covariance() {
        let law = CoefficientLaw::finite_discrete(&[
            PairSpec { a: 0.0, b: 1.0, p: 0.5 },
            PairSpec { a: 0.0, b: 5.0, p: 0.5 },
        ])
        .unwrap();
        let spec = CovSpec {
            h: 3.0,
            h2: None,
            max_lag: 8,
            reps: 20_000,
            ..Default::default()
        };
        let r = covariance_decay_probe(&law, Some(1.0), &spec, &make_stream(1), None).unwrap();
        let quiet = r.find("lags_within_3se", 3.0).unwrap().value;
        assert_eq!(quiet, 8.0);
        assert_eq!(r.rule("geometric_decay").unwrap().status, super::super::Status::Inconclusive);
        // Lag 0 is the variance of the clipped value: {1, 3} with equal weight.
        let v = r.find("cov_h3", 0.0).unwrap();
        assert!((v.value - 1.0).abs() < 4.0 * v.std_error);
    }

    #[test]
    fn discrete_garch_decays_fast() {
        let law = CoefficientLaw::garch_critical(1.0, 1.0, NoiseLaw::three_point()).unwrap();
        let spec = CovSpec {
            reps: 100_000,
            eta_threshold: 0.8,
            ..Default::default()
        };
        let r = covariance_decay_probe(&law, None, &spec, &make_stream(2), None).unwrap();
        let eta = r.find("eta_hat", 1e3).unwrap().value;
        assert!(eta < 0.8 && eta > 0.2, "{eta}");
        assert!(r.passed(), "{:?}", r.verdicts);
    }

    #[test]
    fn rejects_small_h() {
        let law = CoefficientLaw::garch_critical(1.0, 1.0, NoiseLaw::three_point()).unwrap();
        let spec = CovSpec { h: 0.5, ..Default::default() };
        assert!(covariance_decay_probe(&law, None, &spec, &make_stream(0), None).is_err());
    }
}
