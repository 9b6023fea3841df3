//! Quadrature and root bracketing used by the analytic side of the lab.

use crate::error::{Error, Result};

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integral of `f` over the finite interval `[a, b]`.
///
/// Subdivides the interval with the largest error estimate until the total
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, abs_tol, rel_tol);
    }
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let (v, e) = gk15(&f, a, b);
    segs.push((a, b, v, e));
    for _ in 0..4000 {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) || !total.is_finite() {
            break;
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        segs.push((lo, mid, v1, e1));
        segs.push((mid, hi, v2, e2));
    }
    segs.iter().map(|s| s.2).sum()
}

/// Absolute tolerance used throughout the analytic code.
pub const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-13;

/// Integral over `[a, ∞)`.
///
/// The tail is cut into geometrically growing windows `[a + w, a + 2w]`,
/// which is the substitution `x = a + e^u` applied piecewise: polynomially
/// decaying integrands decay exponentially in `u`. Integration stops once
/// three consecutive windows contribute below `1e-15` of the total. The
/// integral is declared divergent (`None`) when, with the cutoff already
/// past `a + 1e12`, one more doubling still changes it by more than 1%.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64) -> Option<f64> {
    let mut total = integrate(&f, a, a + 1.0, ABS_TOL, REL_TOL);
    let mut width = 1.0_f64;
    let mut small_steps = 0;
    while width < 1e300 {
        let lo = a + width;
        let hi = a + 2.0 * width;
        let piece = integrate(&f, lo, hi, ABS_TOL * 1e-3, REL_TOL);
        if !piece.is_finite() {
            return None;
        }
        total += piece;
        width *= 2.0;
        if width >= 1e12 && piece.abs() > 0.01 * total.abs() {
            return None;
        }
        if piece.abs() <= 1e-15 * total.abs() || piece.abs() < 1e-300 {
            small_steps += 1;
            if small_steps >= 3 {
                return Some(total);
            }
        } else {
            small_steps = 0;
        }
    }
    Some(total)
}

/// Integral of `f` against the standard normal density over the real line.
pub fn normal_expectation<F: Fn(f64) -> f64>(f: F) -> f64 {
    let phi = |z: f64| (-0.5 * z * z).exp() * 0.398_942_280_401_432_7;
    // Symmetric split at 0 keeps kinks of |z|-type integrands on a boundary.
    let mut s = 0.0;
    for k in 0..40 {
        let lo = k as f64 * 0.5;
        let hi = lo + 0.5;
        s += integrate(|z| (f(z) + f(-z)) * phi(z), lo, hi, ABS_TOL * 1e-2, REL_TOL);
    }
    s
}

/// Root of an increasing-through-zero function on `(lo, hi)` by Illinois
/// regula falsi, falling back to bisection whenever a value is infinite or
/// the interpolated point stalls.
///
/// `g(lo) < 0 < g(hi)` is required.
pub fn bracketed_root<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64> {
    let mut glo = g(lo);
    let mut ghi = g(hi);
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::Numeric(format!(
            "root not bracketed: g({lo}) = {glo}, g({hi}) = {ghi}"
        )));
    }
    let mut side = 0i8;
    for _ in 0..500 {
        if (hi - lo) <= rel_tol * hi.abs().max(1e-300) {
            break;
        }
        let mut x = if glo.is_finite() && ghi.is_finite() {
            (lo * ghi - hi * glo) / (ghi - glo)
        } else {
            0.5 * (lo + hi)
        };
        // Keep the step strictly inside and away from the ends.
        let span = hi - lo;
        if !(x > lo + 1e-3 * span && x < hi - 1e-3 * span) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x);
        if gx == 0.0 {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = gx;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-14, 1e-14);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn log_singularity() {
        // ∫_0^1 ln x dx = -1
        let v = integrate(|x: f64| if x > 0.0 { x.ln() } else { 0.0 }, 0.0, 1.0, 1e-13, 1e-13);
        assert!((v + 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn tails() {
        let v = integrate_to_infinity(|x: f64| (-x).exp(), 0.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let p = integrate_to_infinity(|x: f64| x.powf(-1.5), 1.0).unwrap();
        assert!((p - 2.0).abs() < 1e-10, "{p}");
        assert!(integrate_to_infinity(|x: f64| x.powf(-0.5), 1.0).is_none());
        assert!(integrate_to_infinity(|x: f64| 1.0 / x, 1.0).is_none());
    }

    #[test]
    fn gaussian_moments() {
        assert!((normal_expectation(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((normal_expectation(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((normal_expectation(|z| z.powi(4)) - 3.0).abs() < 1e-11);
    }

    #[test]
    fn root_of_cubic() {
        let r = bracketed_root(|x| x * x * x - 2.0, 0.0, 5.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn root_with_infinite_side() {
        let r = bracketed_root(|x| if x > 1.0 { f64::INFINITY } else { x - 1.0 }, 0.0, 3.0, 1e-14)
            .unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbracketed_root_is_an_error() {
        assert!(bracketed_root(|x| x + 1.0, 0.0, 1.0, 1e-10).is_err());
    }
}
