//! Scalar statistics helpers: standard normal functions and deterministic
//! reductions used by the Monte Carlo machinery.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-(x * x) / 2.0).exp() / (2.0 * PI).sqrt()
}

/// Standard normal cdf.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function 1 - Phi(x), accurate in the far tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Error function. Series for small arguments, continued fraction otherwise.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.0 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complementary error function with good relative accuracy for large x.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

/// erf(x) = 2/sqrt(pi) * x * exp(-x^2) * sum_k (2x^2)^k / (2k+1)!!
/// All terms positive, so no cancellation.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= 2.0 * x2 / (2.0 * k as f64 + 1.0);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * x * (-x2).exp() * sum
}

/// Continued fraction sqrt(pi) e^{x^2} erfc(x) = 1/(x+ (1/2)/(x+ 1/(x+ (3/2)/(x+ ...))))
/// evaluated with the modified Lentz algorithm. Requires x >= ~1.5.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for j in 1..300 {
        let a = j as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-(x * x)).exp() / (PI.sqrt() * f)
}

/// Standard normal quantile: Acklam's rational approximation polished with one
/// Newton step against the high-precision cdf.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }

    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let err = norm_cdf(x) - p;
    x - err / norm_pdf(x)
}

/// Sum with a fixed pairwise reduction tree. The result depends only on the
/// order of `v`, never on thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

pub fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

/// Sample standard deviation (divisor n-1), two-pass pairwise.
pub fn sample_sd(v: &[f64], mean: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    (pairwise_sum(&sq) / (v.len() - 1) as f64).sqrt()
}

/// Type-1 (inverse empirical cdf) order-statistic percentile of an ascending
/// sorted slice.
pub fn percentile_type1(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let k = sorted.len() as f64;
    let idx = ((q * k).ceil() as usize)
        .saturating_sub(1)
        .min(sorted.len() - 1);
    sorted[idx]
}

/// Kolmogorov-Smirnov distance between an ascending sorted sample and the
/// uniform cdf on the unit interval.
pub fn ks_distance_uniform(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - u;
        let lo = u - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_known_values() {
        assert!((erf(1.0) - 0.8427007929497149).abs() < 1e-14);
        assert!((erfc(2.0) - 0.004677734981047266).abs() < 1e-16);
        assert!((erfc(3.0) - 2.209049699858544e-5).abs() < 1e-19);
        // deep tail, relative accuracy
        let e10 = erfc(10.0);
        assert!((e10 / 2.088487583762545e-45 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_known_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.96) - 0.9750021048517795).abs() < 1e-13);
        // z for a one-sided tail of exactly 1e-3
        assert!((norm_sf(3.090232306167813) / 1e-3 - 1.0).abs() < 1e-12);
        assert!(norm_cdf(-37.0) > 0.0);
    }

    #[test]
    fn quantile_round_trip() {
        for &p in &[1e-9, 1e-6, 1e-3, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6] {
            let x = norm_quantile(p);
            assert!(
                (norm_cdf(x) - p).abs() < 1e-12 * p.max(1e-3),
                "p={p} x={x} cdf={}",
                norm_cdf(x)
            );
        }
        assert!(norm_quantile(0.0).is_infinite());
        assert!(norm_quantile(1.0).is_infinite());
        assert!(norm_quantile(0.5).abs() < 1e-15);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
    }

    #[test]
    fn percentile_type1_indices() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(percentile_type1(&v, 0.05), 50.0);
        assert_eq!(percentile_type1(&v, 0.95), 950.0);
        assert_eq!(percentile_type1(&v, 1.0), 1000.0);
        assert_eq!(percentile_type1(&v, 0.0), 1.0);
    }

    #[test]
    fn sd_of_known_sample() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        let m = mean(&v);
        assert!((m - 5.0).abs() < 1e-15);
        // sum of squared deviations = 32, /7 -> sqrt
        assert!((sample_sd(&v, m) - (32.0f64 / 7.0).sqrt()).abs() < 1e-14);
    }
}
