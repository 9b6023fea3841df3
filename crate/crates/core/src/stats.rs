//! Sample statistics used by the experiments.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::rng::StreamRng;

/// IQR of the standard normal, `2 Φ^{-1}(3/4)`.
pub const NORMAL_IQR: f64 = 1.348_979_500_392_163_5;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    if x.len() < 2 {
        return (mean(x), 0.0);
    }
    (mean(x), (variance(x) / x.len() as f64).sqrt())
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn quantile(x: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(x), q)
}

pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}

/// Distribution-free 95% interval for the median from order statistics.
pub fn median_ci(x: &[f64]) -> (f64, f64) {
    let s = sorted(x);
    let n = s.len() as f64;
    let half = 1.959_963_984_540_054 * n.sqrt() / 2.0;
    let lo = ((n / 2.0 - half).floor().max(0.0)) as usize;
    let hi = ((n / 2.0 + half).ceil() as usize).min(s.len() - 1);
    (s[lo], s[hi])
}

/// Robust scale: interquartile range divided by that of `N(0, 1)`.
pub fn iqr_scale(x: &[f64]) -> f64 {
    let s = sorted(x);
    (quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)) / NORMAL_IQR
}

/// Kolmogorov-Smirnov distance between the sample and `N(0, variance)`.
pub fn ks_normal(x: &[f64], variance: f64) -> f64 {
    let d = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    let s = sorted(x);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = d.cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < na && j < nb {
        let v = sa[i].min(sb[j]);
        while i < na && sa[i] <= v {
            i += 1;
        }
        while j < nb && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = ((na * nb) as f64 / (na + nb) as f64).sqrt();
    (d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d))
}

/// `P(K > x)` for the Kolmogorov distribution.
fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Ranks starting at 1, ties averaged.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Bootstrap distribution of `stat(b*) - stat(a*)` for independent
/// resamples of `a` and `b`; returns the sorted replicates.
pub fn bootstrap_difference<F: Fn(&[f64]) -> f64>(
    a: &[f64],
    b: &[f64],
    stat: F,
    resamples: usize,
    rng: &mut StreamRng,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(resamples);
    let mut ra = vec![0.0; a.len()];
    let mut rb = vec![0.0; b.len()];
    for _ in 0..resamples {
        for v in ra.iter_mut() {
            *v = a[pick(rng, a.len())];
        }
        for v in rb.iter_mut() {
            *v = b[pick(rng, b.len())];
        }
        out.push(stat(&rb) - stat(&ra));
    }
    out.sort_by(f64::total_cmp);
    out
}

#[inline]
fn pick(rng: &mut StreamRng, n: usize) -> usize {
    ((rng.next_raw() as u128 * n as u128) >> 64) as usize
}

/// Pearson chi-square goodness-of-fit p-value of counts against cell
/// probabilities.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64)
        .expect("at least two cells")
        .cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantiles_interpolate() {
        let x = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&x), 2.5);
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert_eq!(quantile(&x, 0.25), 1.75);
    }

    #[test]
    fn normal_sample_scale_and_ks() {
        let mut rng = make_stream(1).rng();
        let x: Vec<f64> = (0..100_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                2.0 * z
            })
            .collect();
        assert!((iqr_scale(&x) / 2.0 - 1.0).abs() < 0.02);
        assert!(ks_normal(&x, 4.0) < 0.01);
        assert!(ks_normal(&x, 1.0) > 0.1);
    }

    #[test]
    fn two_sample_ks_same_law() {
        let mut rng = make_stream(2).rng();
        let a: Vec<f64> = (0..2000).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..3000).map(|_| rng.uniform()).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert!(d < 0.06 && p > 0.001);
        let c: Vec<f64> = b.iter().map(|v| v + 0.2).collect();
        assert!(ks_two_sample(&a, &c).1 < 1e-6);
    }

    #[test]
    fn rank_correlation() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
    }

    #[test]
    fn bootstrap_detects_shift() {
        let mut rng = make_stream(3).rng();
        let a: Vec<f64> = (0..500).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let d = bootstrap_difference(&a, &b, median, 500, &mut rng);
        assert!(quantile_sorted(&d, 0.025) > 0.8);
    }
}
