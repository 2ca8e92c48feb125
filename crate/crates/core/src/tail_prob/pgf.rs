//! Exact conditional tails via probability generating function expansion.
//!
//! Conditionally on the reference sample the cell counts are i.i.d. on
//! {0,...,m}, so the statistic's pgf is the n-th power of the cell pgf. The
//! upper tail is the coefficient mass above the control limit. Cost grows
//! like (m*n)^2, so a budget guard rejects sizes where the expansion would
//! stop being a reasonable choice.

use crate::error::{Error, Result};
use crate::mw_stat::CellProbabilities;

/// Budget on (m+1)*n, the coefficient count the expansion has to carry per
/// factor. Past this the exact engine refuses and the caller should switch to
/// the saddlepoint engine.
pub const DEFAULT_EXACT_CELL_BUDGET: usize = 5_000;

/// Polynomial with probability coefficients indexed by lattice value.
#[derive(Debug, Clone)]
pub struct PgfPolynomial {
    coeffs: Vec<f64>,
}

impl PgfPolynomial {
    pub fn from_cells(a: &CellProbabilities) -> Self {
        PgfPolynomial {
            coeffs: a.probabilities().to_vec(),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn mul(&self, rhs: &PgfPolynomial) -> PgfPolynomial {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &ci) in self.coeffs.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for (j, &cj) in rhs.coeffs.iter().enumerate() {
                out[i + j] += ci * cj;
            }
        }
        // flush denormal dust so degrees stay honest
        for c in &mut out {
            if *c < 1e-300 {
                *c = 0.0;
            }
        }
        PgfPolynomial { coeffs: out }
    }

    /// Self-multiplication to the n-th power by square-and-multiply: O(log n)
    /// polynomial products instead of n-1.
    pub fn power(&self, n: usize) -> PgfPolynomial {
        assert!(n >= 1);
        let mut base = self.clone();
        let mut acc: Option<PgfPolynomial> = None;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc.unwrap()
    }

    /// Coefficient mass strictly above `u`, summed smallest-first for deep
    /// tail accuracy.
    pub fn upper_tail(&self, u: i64) -> f64 {
        if u < 0 {
            return 1.0;
        }
        let deg = self.degree() as i64;
        if u >= deg {
            return 0.0;
        }
        let mut sum = 0.0;
        for v in ((u + 1) as usize..=deg as usize).rev() {
            sum += self.coeffs[v];
        }
        sum.min(1.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

fn check_budget(m: usize, n: usize, budget: usize) -> Result<()> {
    let work = (m + 1) * n;
    if work > budget {
        return Err(Error::Capacity(format!(
            "exact expansion for m={m}, n={n} needs {work} coefficient cells (budget {budget}); \
             use the LR tail engine instead"
        )));
    }
    Ok(())
}

/// Exact P(M > u_mn) given cell probabilities, by full pgf expansion.
pub fn exact_upper_tail(a: &CellProbabilities, n: usize, u_mn: i64, budget: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("test sample size n must be >= 1"));
    }
    check_budget(a.m(), n, budget)?;
    let poly = PgfPolynomial::from_cells(a).power(n);
    let mass = poly.total_mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::numeric(format!(
            "expanded pgf mass drifted to {mass}"
        )));
    }
    Ok(poly.upper_tail(u_mn))
}

/// Exact upper tail with branch-and-bound style pruning: after each factor,
/// coefficient mass that provably ends above the limit is banked and dropped,
/// and mass that can no longer reach it is discarded. Agrees with the full
/// expansion to roundoff; useful when the limit sits far in a tail.
pub fn exact_upper_tail_pruned(
    a: &CellProbabilities,
    n: usize,
    u_mn: i64,
    budget: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("test sample size n must be >= 1"));
    }
    check_budget(a.m(), n, budget)?;
    if u_mn < 0 {
        return Ok(1.0);
    }
    let m = a.m() as i64;
    let h1 = a.probabilities();

    // live coefficients for lattice values lo..lo+len-1
    let mut cur: Vec<f64> = h1.to_vec();
    let mut lo: i64 = 0;
    let mut above = 0.0;

    let prune = |cur: &mut Vec<f64>, lo: &mut i64, above: &mut f64, remaining: i64| {
        // bank mass already past the limit (it stays there: factors only add)
        let mut hi_cut = cur.len();
        while hi_cut > 0 && *lo + (hi_cut - 1) as i64 > u_mn {
            *above += cur[hi_cut - 1];
            hi_cut -= 1;
        }
        cur.truncate(hi_cut);
        // drop mass that cannot climb past the limit with what is left
        let mut lo_cut = 0;
        while lo_cut < cur.len() && *lo + lo_cut as i64 + remaining * m <= u_mn {
            lo_cut += 1;
        }
        if lo_cut > 0 {
            cur.drain(..lo_cut);
            *lo += lo_cut as i64;
        }
    };

    prune(&mut cur, &mut lo, &mut above, (n - 1) as i64);
    for step in 2..=n {
        if cur.is_empty() {
            break;
        }
        let mut next = vec![0.0; cur.len() + h1.len() - 1];
        for (i, &ci) in cur.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for (j, &cj) in h1.iter().enumerate() {
                next[i + j] += ci * cj;
            }
        }
        cur = next;
        prune(&mut cur, &mut lo, &mut above, (n - step) as i64);
    }
    // the final prune (remaining = 0) banks everything above the limit and
    // drops the rest, so `above` is the whole tail
    debug_assert!(cur.is_empty());
    Ok(above.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mw_stat::CellSource;
    use crate::rng::{stream_rng, uniform_open01};

    fn cells(a: &[f64]) -> CellProbabilities {
        CellProbabilities::new(a.to_vec(), CellSource::FromCdf).unwrap()
    }

    fn random_cells(m: usize, rng: &mut impl rand::RngCore) -> CellProbabilities {
        // normalized exponentials: uniform on the simplex
        let mut a: Vec<f64> = (0..=m).map(|_| -uniform_open01(rng).ln()).collect();
        let s: f64 = a.iter().sum();
        for p in &mut a {
            *p /= s;
        }
        cells(&a)
    }

    /// Direct enumeration over all (m+1)^n cell tuples.
    fn brute_upper_tail(a: &CellProbabilities, n: usize, u: i64) -> f64 {
        fn recur(a: &[f64], left: usize, acc_val: i64, acc_p: f64, u: i64, out: &mut f64) {
            if left == 0 {
                if acc_val > u {
                    *out += acc_p;
                }
                return;
            }
            for (l, &p) in a.iter().enumerate() {
                if p > 0.0 {
                    recur(a, left - 1, acc_val + l as i64, acc_p * p, u, out);
                }
            }
        }
        let mut out = 0.0;
        recur(a.probabilities(), n, 0, 1.0, u, &mut out);
        out
    }

    #[test]
    fn hand_expansion_third_cells() {
        // (1/3 + z/3 + z^2/3)^2: only the z^4 coefficient (1/9) exceeds 3
        let a = cells(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let t = exact_upper_tail(&a, 2, 3, DEFAULT_EXACT_CELL_BUDGET).unwrap();
        assert!((t - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn mass_at_zero() {
        let a = cells(&[1.0, 0.0, 0.0]);
        for n in [1, 3, 7] {
            let t = exact_upper_tail(&a, n, 0, DEFAULT_EXACT_CELL_BUDGET).unwrap();
            assert_eq!(t, 0.0);
        }
    }

    #[test]
    fn matches_brute_force_at_all_thresholds() {
        let mut rng = stream_rng(21, 0);
        for round in 0..5 {
            let a = random_cells(6, &mut rng);
            let n = 3;
            let mn = (a.m() * n) as i64;
            for u in -1..=mn {
                let exact = exact_upper_tail(&a, n, u, DEFAULT_EXACT_CELL_BUDGET).unwrap();
                let brute = brute_upper_tail(&a, n, u);
                assert!(
                    (exact - brute).abs() < 1e-10,
                    "round {round} u={u}: exact {exact} vs brute {brute}"
                );
            }
        }
    }

    #[test]
    fn tail_is_one_below_lattice_and_monotone() {
        let mut rng = stream_rng(22, 0);
        let a = random_cells(8, &mut rng);
        let n = 4;
        assert_eq!(
            exact_upper_tail(&a, n, -1, DEFAULT_EXACT_CELL_BUDGET).unwrap(),
            1.0
        );
        let mut prev = 1.0;
        for u in 0..=(8 * 4) as i64 {
            let t = exact_upper_tail(&a, n, u, DEFAULT_EXACT_CELL_BUDGET).unwrap();
            assert!(t <= prev + 1e-15);
            prev = t;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn pruned_agrees_with_full_expansion() {
        let mut rng = stream_rng(23, 0);
        for _ in 0..5 {
            let a = random_cells(10, &mut rng);
            let n = 5;
            let mn = (a.m() * n) as i64;
            for u in [-1, 0, mn / 4, mn / 2, 3 * mn / 4, mn - 1, mn] {
                let full = exact_upper_tail(&a, n, u, DEFAULT_EXACT_CELL_BUDGET).unwrap();
                let pruned = exact_upper_tail_pruned(&a, n, u, DEFAULT_EXACT_CELL_BUDGET).unwrap();
                assert!(
                    (full - pruned).abs() < 1e-12,
                    "u={u}: full {full} vs pruned {pruned}"
                );
            }
        }
    }

    #[test]
    fn capacity_guard_rejects_large_instances() {
        let a = CellProbabilities::uniform_fixed(2000);
        let err = exact_upper_tail(&a, 25, 25_000, DEFAULT_EXACT_CELL_BUDGET).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("LR"));
    }

    #[test]
    fn expansion_stays_normalized() {
        let mut rng = stream_rng(24, 0);
        let a = random_cells(50, &mut rng);
        let poly = PgfPolynomial::from_cells(&a).power(10);
        assert!((poly.total_mass() - 1.0).abs() < 1e-10);
        assert_eq!(poly.degree(), 500);
    }
}
