//! Laws with a regularly varying tilted tail `E A^κ I{ln A > x} = c x^{-α}`.
//!
//! `ln A = V` with probability `p`, where `V` has density proportional to
//! `v^{-α-1} e^{-κ v}` on `[v0, ∞)`, and `ln A = -w` otherwise. The down-jump
//! `w` is chosen so that `E A^κ = 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::integrate_to_infinity;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeveiLaw {
    pub alpha: f64,
    pub kappa: f64,
    pub v0: f64,
    pub p: f64,
    pub b: f64,
    /// `∫_{v0}^∞ v^{-α-1} e^{-κv} dv`, the normalizer of the density of `V`.
    pub norm: f64,
    /// `E e^{κV}`.
    pub tilted_mass: f64,
    /// Down-jump size.
    pub w: f64,
    /// Acceptance probability of the Pareto-proposal rejection sampler.
    pub acceptance_rate: f64,
}

impl KeveiLaw {
    pub fn new(alpha: f64, kappa: f64, v0: f64, p: f64, b: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Parameter(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(kappa > 0.0) || !(v0 > 0.0) || !(b > 0.0) {
            return Err(Error::Parameter("kappa, v0 and b must be positive".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Parameter(format!("p must lie in (0,1), got {p}")));
        }
        let norm = integrate_to_infinity(|v| (-kappa * v - (alpha + 1.0) * v.ln()).exp(), v0)
            .ok_or_else(|| Error::Numeric("density of V is not normalizable".into()))?;
        let numerator = integrate_to_infinity(|v| v.powf(-alpha - 1.0), v0)
            .ok_or_else(|| Error::Numeric("E e^{κV} diverged".into()))?;
        let tilted_mass = numerator / norm;
        let load = p * tilted_mass;
        if !(load < 1.0) {
            return Err(Error::Parameter(format!(
                "p * E e^(kappa V) = {load} must be < 1"
            )));
        }
        let w = -((1.0 - load) / (1.0 - p)).ln() / kappa;
        let acceptance_rate = alpha * v0.powf(alpha) * (kappa * v0).exp() * norm;
        Ok(KeveiLaw {
            alpha,
            kappa,
            v0,
            p,
            b,
            norm,
            tilted_mass,
            w,
            acceptance_rate,
        })
    }

    /// Draw `V` by rejection from a Pareto(α, v0) proposal, accepting with
    /// probability `e^{-κ(v - v0)}`.
    #[inline]
    pub fn sample_v(&self, rng: &mut StreamRng) -> f64 {
        loop {
            let v = self.sample_pareto(rng);
            if rng.uniform() < (-self.kappa * (v - self.v0)).exp() {
                return v;
            }
        }
    }

    #[inline]
    pub fn sample_pareto(&self, rng: &mut StreamRng) -> f64 {
        self.v0 * rng.uniform().powf(-1.0 / self.alpha)
    }

    #[inline]
    pub fn sample_log_a(&self, rng: &mut StreamRng) -> f64 {
        if rng.uniform() < self.p {
            self.sample_v(rng)
        } else {
            -self.w
        }
    }

    /// Density of `V` at `v` (zero below `v0`).
    pub fn density_v(&self, v: f64) -> f64 {
        if v < self.v0 {
            0.0
        } else {
            (-self.kappa * v - (self.alpha + 1.0) * v.ln()).exp() / self.norm
        }
    }

    /// `E[A^s g(ln A)]`; `None` when the integral diverges.
    pub fn moment<G: Fn(f64) -> f64>(&self, s: f64, g: G, from: f64) -> Option<f64> {
        let (a, k, norm) = (self.alpha, self.kappa, self.norm);
        let lo = from.max(self.v0);
        let up = integrate_to_infinity(
            |v| {
                let e = ((s - k) * v - (a + 1.0) * v.ln()).exp();
                if e == 0.0 {
                    0.0
                } else {
                    e * g(v)
                }
            },
            lo,
        )?;
        let down = if -self.w > from {
            (1.0 - self.p) * (-s * self.w).exp() * g(-self.w)
        } else {
            0.0
        };
        Some(self.p * up / norm + down)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_stream;

    fn example() -> KeveiLaw {
        KeveiLaw::new(0.5, 1.0, 1.0, 0.05, 1.0).unwrap()
    }

    #[test]
    fn tilted_mass_is_one() {
        let law = example();
        let m = law.moment(law.kappa, |_| 1.0, f64::NEG_INFINITY).unwrap();
        assert!((m - 1.0).abs() < 1e-10, "E A^kappa = {m}");
        assert!(law.w > 0.0);
    }

    #[test]
    fn tilted_tail_is_exact_power() {
        // E A^κ I{ln A > x} = p x^{-α} / (α · norm) for x ≥ v0.
        let law = example();
        for x in [10.0, 100.0, 1000.0] {
            let h = law.moment(law.kappa, |_| 1.0, x).unwrap();
            let c = h * x.powf(0.5);
            let exact = law.p / (law.alpha * law.norm);
            assert!((c / exact - 1.0).abs() < 1e-8, "x={x} c={c} exact={exact}");
        }
    }

    #[test]
    fn rejection_acceptance_rate_matches_quadrature() {
        let law = example();
        let mut rng = make_stream(77).rng();
        let n = 200_000;
        let mut accepted = 0u32;
        for _ in 0..n {
            let v = law.sample_pareto(&mut rng);
            if rng.uniform() < (-law.kappa * (v - law.v0)).exp() {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / n as f64;
        let se = (law.acceptance_rate * (1.0 - law.acceptance_rate) / n as f64).sqrt();
        assert!((rate - law.acceptance_rate).abs() < 4.0 * se, "{rate} vs {}", law.acceptance_rate);
    }

    #[test]
    fn precondition_violation_reports_load() {
        let err = KeveiLaw::new(0.5, 1.0, 1.0, 0.2, 1.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("must be < 1"), "{msg}");
    }
}
