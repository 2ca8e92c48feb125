//! Unconditional null distribution of the Mann-Whitney statistic.
//!
//! Exact tails come from the rank-sum generating function, built as the
//! product of n factors (1 - q^{m+i})/(1 - q^i) with in-place multiply and
//! exact-division passes. Counts are carried in f64; the distribution is
//! symmetrized afterwards so the reflection identity holds bit-for-bit.
//! Beyond the budget an Edgeworth expansion with fourth- and sixth-cumulant
//! corrections takes over.

use crate::error::{Error, Result};
use crate::stats::{norm_pdf, norm_sf};

/// Budget on m*n for the exact null construction.
pub const DEFAULT_NULL_EXACT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct NullDistribution {
    m: usize,
    n: usize,
    counts: Vec<f64>,
    /// suffix[u] = P(M > u), accumulated smallest-first.
    suffix: Vec<f64>,
    total: f64,
}

impl NullDistribution {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        Self::with_budget(m, n, DEFAULT_NULL_EXACT_BUDGET)
    }

    pub fn with_budget(m: usize, n: usize, budget: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("null distribution needs m >= 1 and n >= 1"));
        }
        if m * n > budget {
            return Err(Error::Capacity(format!(
                "exact null distribution for m={m}, n={n} needs a lattice of {} values \
                 (budget {budget}); use the Edgeworth approximation instead",
                m * n + 1
            )));
        }
        let mn = m * n;
        // intermediate degree peaks at i*m + i during factor i
        let mut c = vec![0.0f64; mn + n + 1];
        c[0] = 1.0;
        let mut deg = 0usize;
        for i in 1..=n {
            let shift = m + i;
            let with_factor = deg + shift;
            // multiply by (1 - q^{m+i}), descending so lower entries stay fresh
            for u in (shift..=with_factor).rev() {
                c[u] -= c[u - shift];
            }
            // exact division by (1 - q^i), ascending accumulation
            for u in i..=with_factor {
                c[u] += c[u - i];
            }
            deg = with_factor - i;
            for item in c.iter_mut().take(with_factor + 1).skip(deg + 1) {
                *item = 0.0;
            }
        }
        debug_assert_eq!(deg, mn);
        c.truncate(mn + 1);

        // force the palindrome exactly; the identity P(M > u) = P(M < mn - u)
        // then holds with zero tolerance
        for u in 0..=mn / 2 {
            let avg = 0.5 * (c[u] + c[mn - u]);
            c[u] = avg;
            c[mn - u] = avg;
        }

        let total: f64 = crate::stats::pairwise_sum(&c);
        let mut suffix = vec![0.0f64; mn + 1];
        let mut acc = 0.0;
        for u in (0..mn).rev() {
            acc += c[u + 1];
            suffix[u] = acc;
        }
        for s in &mut suffix {
            *s /= total;
        }
        Ok(NullDistribution {
            m,
            n,
            counts: c,
            suffix,
            total,
        })
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// P(M > u).
    pub fn upper_tail(&self, u: i64) -> f64 {
        if u < 0 {
            return 1.0;
        }
        if u as usize >= self.mn() {
            return 0.0;
        }
        self.suffix[u as usize]
    }

    /// P(M < u), computed through the reflection P(M < u) = P(M > mn - u).
    pub fn lower_tail(&self, u: i64) -> f64 {
        self.upper_tail(self.mn() as i64 - u)
    }

    pub fn pmf(&self, u: i64) -> f64 {
        if u < 0 || u as usize > self.mn() {
            return 0.0;
        }
        self.counts[u as usize] / self.total
    }

    pub fn total_arrangements(&self) -> f64 {
        self.total
    }
}

/// Exact null upper tail P0(M > u) under the default budget.
pub fn null_upper_tail_exact(m: usize, n: usize, u_mn: i64) -> Result<f64> {
    Ok(NullDistribution::new(m, n)?.upper_tail(u_mn))
}

/// Null mean mn/2.
pub fn null_mean(m: usize, n: usize) -> f64 {
    (m * n) as f64 / 2.0
}

/// Null variance mn(m+n+1)/12.
pub fn null_variance(m: usize, n: usize) -> f64 {
    (m * n * (m + n + 1)) as f64 / 12.0
}

/// Fourth cumulant of the null distribution, from the factorized generating
/// function: each factor contributes the cumulant difference of discrete
/// uniforms of sizes m+i and i.
pub fn null_kappa4(m: usize, n: usize) -> f64 {
    let mf = m as f64;
    let mut sum = 0.0;
    for i in 1..=n {
        let a = mf + i as f64;
        let b = i as f64;
        sum += a.powi(4) - b.powi(4);
    }
    -sum / 120.0
}

/// Sixth cumulant, same construction (B6 = 1/42, so kappa6 per uniform pair is
/// (k^6 - 1)/252).
pub fn null_kappa6(m: usize, n: usize) -> f64 {
    let mf = m as f64;
    let mut sum = 0.0;
    for i in 1..=n {
        let a = mf + i as f64;
        let b = i as f64;
        sum += a.powi(6) - b.powi(6);
    }
    sum / 252.0
}

/// Edgeworth-corrected null upper tail. Odd-order terms vanish by symmetry;
/// the correction carries the standardized fourth and sixth cumulants plus
/// the squared-fourth term of matching order.
pub fn null_upper_tail_edgeworth(m: usize, n: usize, u_mn: i64) -> f64 {
    let var = null_variance(m, n);
    let sd = var.sqrt();
    let z = (u_mn as f64 + 0.5 - null_mean(m, n)) / sd;
    let lam4 = null_kappa4(m, n) / (var * var);
    let lam6 = null_kappa6(m, n) / (var * var * var);

    let z2 = z * z;
    let he3 = z * (z2 - 3.0);
    let he5 = z * (z2 * z2 - 10.0 * z2 + 15.0);
    let he7 = z * (z2 * z2 * z2 - 21.0 * z2 * z2 + 105.0 * z2 - 105.0);

    let correction =
        norm_pdf(z) * (lam4 * he3 / 24.0 + lam6 * he5 / 720.0 + lam4 * lam4 * he7 / 1152.0);
    (norm_sf(z) + correction).clamp(0.0, 1.0)
}
