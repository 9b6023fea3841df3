//! Standing conditions on `(A, B)`: non-degeneracy, existence of `κ`,
//! moment bounds, GARCH stationarity and non-arithmetic `ln A`.

use serde::Serialize;

use super::CoefficientLaw;
use crate::analytics::solve_kappa;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    Unknown,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub status: Check,
    pub detail: String,
}

impl Entry {
    fn new(status: Check, detail: impl Into<String>) -> Self {
        Entry {
            status,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `P(A = 1) < 1`.
    pub a_nondegenerate: Entry,
    /// `P(B = 0) < 1`.
    pub b_nonzero: Entry,
    /// A root of `E A^κ = 1` with `κ > 0`.
    pub kappa_exists: Entry,
    pub kappa: Option<f64>,
    /// `E B^κ < ∞`.
    pub b_moment_finite: Entry,
    /// `E ln A < 0` for GARCH laws.
    pub garch_stationarity: Entry,
    /// `ln A` given `A > 0` not supported on a lattice.
    pub nonarithmetic_log_a: Entry,
}

impl ConditionReport {
    /// The conditions needed for the main limit theorems all pass.
    pub fn all_pass(&self) -> bool {
        [&self.a_nondegenerate, &self.b_nonzero, &self.kappa_exists, &self.b_moment_finite]
            .iter()
            .all(|e| e.status == Check::Pass)
            && self.garch_stationarity.status != Check::Fail
    }
}

const ATOM_TOL: f64 = 1e-12;

/// Evaluate every condition. Failures are entries, never errors.
pub fn check_conditions(law: &CoefficientLaw, kappa_hint: Option<f64>) -> ConditionReport {
    let a_nondegenerate = match (law, law.a_atoms()) {
        (CoefficientLaw::Garch(g), _) if g.critical => {
            let p = g.noise.prob_z2_ne_one();
            Entry::new(
                if p > 0.0 { Check::Pass } else { Check::Fail },
                format!("P(Z^2 != 1) = {p}"),
            )
        }
        (_, Some(atoms)) => {
            let at_one: f64 = atoms
                .iter()
                .filter(|(a, _)| (a - 1.0).abs() <= ATOM_TOL)
                .map(|(_, p)| p)
                .sum();
            Entry::new(
                if at_one < 1.0 - ATOM_TOL { Check::Pass } else { Check::Fail },
                format!("P(A = 1) = {at_one}"),
            )
        }
        _ => Entry::new(Check::Pass, "A has a continuous component; P(A = 1) < 1"),
    };

    let pb0 = law.prob_b_zero();
    let b_nonzero = Entry::new(
        if pb0 < 1.0 { Check::Pass } else { Check::Fail },
        format!("P(B = 0) = {pb0}"),
    );

    let (kappa_exists, kappa) = if a_nondegenerate.status == Check::Fail {
        (Entry::new(Check::Fail, "A = 1 almost surely"), None)
    } else {
        match kappa_hint {
            Some(k) => match law.moment(k, |_| 1.0) {
                Some(psi) if k > 0.0 && (psi - 1.0).abs() < 1e-8 => {
                    (Entry::new(Check::Pass, format!("E A^{k} = {psi}")), Some(k))
                }
                other => (
                    Entry::new(Check::Fail, format!("hint {k} gives E A^kappa = {other:?}")),
                    None,
                ),
            },
            None => match solve_kappa(law) {
                Ok(k) => (Entry::new(Check::Pass, format!("kappa = {k}")), Some(k)),
                Err(e) => (Entry::new(Check::Fail, e.to_string()), None),
            },
        }
    };

    // Every shipped variant has bounded B, so E B^κ is finite for any κ.
    let b_moment_finite = match kappa {
        Some(k) => Entry::new(Check::Pass, format!("E B^kappa = {}", law.b_moment(k))),
        None => Entry::new(Check::NotApplicable, "no kappa"),
    };

    let garch_stationarity = match law {
        CoefficientLaw::Garch(_) => {
            let p0 = law.prob_a_zero();
            if p0 > 0.0 {
                Entry::new(Check::Pass, format!("P(A = 0) = {p0}, E ln A = -inf"))
            } else {
                match law.moment(0.0, |v| v) {
                    Some(m) => Entry::new(
                        if m < 0.0 { Check::Pass } else { Check::Fail },
                        format!("E ln A = {m}"),
                    ),
                    None => Entry::new(Check::Unknown, "E ln A not computable"),
                }
            }
        }
        _ => Entry::new(Check::NotApplicable, "not a GARCH law"),
    };

    let nonarithmetic_log_a = match law.a_atoms() {
        Some(atoms) => {
            let logs: Vec<f64> = atoms
                .iter()
                .filter(|(a, p)| *a > 0.0 && *p > 0.0)
                .map(|(a, _)| a.ln())
                .collect();
            match lattice_span(&logs) {
                Some(d) => Entry::new(Check::Fail, format!("ln A | A>0 lies on a lattice of span {d}")),
                None => Entry::new(Check::Pass, "ln A | A>0 spans incommensurable values"),
            }
        }
        None => Entry::new(Check::Unknown, "not decidable for continuous laws"),
    };

    ConditionReport {
        a_nondegenerate,
        b_nonzero,
        kappa_exists,
        kappa,
        b_moment_finite,
        garch_stationarity,
        nonarithmetic_log_a,
    }
}

/// Span `d` such that all points lie in `c + dℤ`, or `None` if there is
/// none with denominators up to 1000. A single point (or none) lies on
/// every lattice and returns `Some(0.0)`.
pub fn lattice_span(points: &[f64]) -> Option<f64> {
    if points.len() < 2 {
        return Some(0.0);
    }
    let base = points[0];
    let diffs: Vec<f64> = points[1..].iter().map(|x| x - base).collect();
    let reference = diffs
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .expect("non-empty");
    let mut denominator = 1u64;
    for d in &diffs {
        let (_, q) = rational_approx(d / reference, 1000, 1e-9)?;
        denominator = lcm(denominator, q);
        if denominator > 1_000_000 {
            return None;
        }
    }
    Some(reference.abs() / denominator as f64)
}

/// Continued-fraction approximation `p/q` of `x` with `q ≤ max_q` and
/// `|x - p/q| ≤ tol`.
fn rational_approx(x: f64, max_q: u64, tol: f64) -> Option<(i64, u64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let (h2, k2) = (a as i64 * h1 + h0, a as i64 * k1 + k0);
        if k2 as u64 > max_q {
            return None;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= tol {
            return Some((h2, k2 as u64));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn lcm(a: u64, b: u64) -> u64 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{NoiseLaw, PairSpec};

    #[test]
    fn discrete_critical_garch() {
        let law = CoefficientLaw::garch_critical(1.0, 1.0, NoiseLaw::three_point()).unwrap();
        let r = check_conditions(&law, None);
        assert_eq!(r.a_nondegenerate.status, Check::Pass);
        assert_eq!(r.b_nonzero.status, Check::Pass);
        assert_eq!(r.kappa_exists.status, Check::Pass);
        assert_eq!(r.kappa, Some(1.0));
        assert_eq!(r.b_moment_finite.status, Check::Pass);
        assert_eq!(r.garch_stationarity.status, Check::Pass);
        assert_eq!(r.nonarithmetic_log_a.status, Check::Fail);
        assert!(r.all_pass());
    }

    #[test]
    fn unit_square_noise_has_no_stationary_solution() {
        let z = NoiseLaw::discrete(&[(1.0, 0.5), (-1.0, 0.5)]).unwrap();
        let law = CoefficientLaw::garch_critical(1.0, 0.6, z).unwrap();
        let r = check_conditions(&law, None);
        assert_eq!(r.a_nondegenerate.status, Check::Fail);
        assert_eq!(r.kappa_exists.status, Check::Fail);
        assert!(!r.all_pass());
    }

    #[test]
    fn zero_beta_fails_cond4() {
        let law = CoefficientLaw::garch(0.0, 1.0, 0.0, NoiseLaw::three_point()).unwrap();
        assert_eq!(check_conditions(&law, Some(1.0)).b_nonzero.status, Check::Fail);
    }

    #[test]
    fn gaussian_laws_report_unknown_lattice() {
        let law = CoefficientLaw::garch_critical(1.0, 1.0, NoiseLaw::standard_normal()).unwrap();
        let r = check_conditions(&law, None);
        assert_eq!(r.nonarithmetic_log_a.status, Check::Unknown);
        assert_eq!(r.garch_stationarity.status, Check::Pass);
        assert_eq!(r.kappa, Some(1.0));
    }

    #[test]
    fn explosive_garch_fails_stationarity() {
        let law = CoefficientLaw::garch(1.0, 0.0, 1.5, NoiseLaw::standard_normal()).unwrap();
        let r = check_conditions(&law, None);
        assert_eq!(r.garch_stationarity.status, Check::Fail);
        assert_eq!(r.kappa_exists.status, Check::Fail);
    }

    #[test]
    fn lattice_detection() {
        assert!(lattice_span(&[0.5f64.ln(), 2f64.ln(), 8f64.ln()]).is_some());
        assert!(lattice_span(&[0.5f64.ln(), 1.5f64.ln()]).is_some());
        assert!(lattice_span(&[0.0, 1.0, 2f64.sqrt()]).is_none());
        let law = CoefficientLaw::finite_discrete(&[
            PairSpec { a: 0.5, b: 1.0, p: 0.3 },
            PairSpec { a: 1.5, b: 1.0, p: 0.3 },
            PairSpec { a: 2.0, b: 1.0, p: 0.4 },
        ])
        .unwrap();
        let r = check_conditions(&law, None);
        assert_eq!(r.nonarithmetic_log_a.status, Check::Pass);
    }
}
