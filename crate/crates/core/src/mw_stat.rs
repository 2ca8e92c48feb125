//! The Mann-Whitney charting statistic and the cell decomposition that every
//! tail computation downstream consumes.
//!
//! For a reference sample x of size m and a test sample y of size n, the
//! statistic counts (x, y) pairs with x below y. Conditionally on x, each test
//! observation falls between two consecutive reference order statistics; the
//! probabilities of those m+1 cells determine the statistic's conditional
//! distribution.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};

/// Phase-I reference sample. Stored both in input order and sorted ascending;
/// everything downstream works off the sorted copy.
#[derive(Debug, Clone)]
pub struct ReferenceSample {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl ReferenceSample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "reference sample needs at least 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite reference value {bad}")));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(ReferenceSample { values, sorted })
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }
}

/// Phase-II test sample; `index` is its 1-based position in the monitoring
/// sequence.
#[derive(Debug, Clone)]
pub struct TestSample {
    values: Vec<f64>,
    index: usize,
}

impl TestSample {
    pub fn new(values: Vec<f64>, index: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("test sample is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite test value {bad}")));
        }
        Ok(TestSample { values, index })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// How ties between reference and test observations are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Ties contribute nothing: pure I(x < y) counting.
    Strict,
    /// Ties count one half, matching midrank scoring of real (rounded) data.
    #[default]
    Midrank,
}

impl TiePolicy {
    pub fn parse(s: &str) -> Result<TiePolicy> {
        match s {
            "strict" => Ok(TiePolicy::Strict),
            "midrank" => Ok(TiePolicy::Midrank),
            other => Err(Error::invalid(format!("unknown tie policy '{other}'"))),
        }
    }
}

/// The statistic value. Midrank ties make half-integers possible, so the
/// doubled count is kept internally and the lattice stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MwStatistic {
    doubled: u64,
}

impl MwStatistic {
    pub fn from_doubled(doubled: u64) -> Self {
        MwStatistic { doubled }
    }

    pub fn doubled(&self) -> u64 {
        self.doubled
    }

    pub fn value(&self) -> f64 {
        self.doubled as f64 / 2.0
    }
}

impl std::fmt::Display for MwStatistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.doubled.is_multiple_of(2) {
            write!(f, "{}.0", self.doubled / 2)
        } else {
            write!(f, "{}.5", self.doubled / 2)
        }
    }
}

/// Count of (x, y) pairs with x < y, plus half-credit for ties under midrank.
/// O(n log m) against the pre-sorted reference.
pub fn mann_whitney(x: &ReferenceSample, y: &TestSample, tie: TiePolicy) -> MwStatistic {
    let sorted = x.sorted();
    let mut doubled = 0u64;
    for &yj in y.values() {
        let below = sorted.partition_point(|&v| v < yj) as u64;
        doubled += 2 * below;
        if tie == TiePolicy::Midrank {
            let at_or_below = sorted.partition_point(|&v| v <= yj) as u64;
            doubled += at_or_below - below;
        }
    }
    MwStatistic { doubled }
}

/// Per-test-observation cell counts: the number of reference values strictly
/// below each y. Their sum is the strict Mann-Whitney statistic.
pub fn cell_counts(x: &ReferenceSample, y: &TestSample) -> Vec<usize> {
    let sorted = x.sorted();
    y.values()
        .iter()
        .map(|&yj| sorted.partition_point(|&v| v < yj))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSource {
    FromCdf,
    UniformFixed,
}

/// The m+1 probabilities that a test observation lands between consecutive
/// reference order statistics (outermost cells are the tails past the sample
/// extremes). Nonnegative and summing to one.
#[derive(Debug, Clone)]
pub struct CellProbabilities {
    a: Vec<f64>,
    source: CellSource,
}

impl CellProbabilities {
    const SUM_TOL: f64 = 1e-12;

    pub fn new(a: Vec<f64>, source: CellSource) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::invalid("cell probability vector needs length >= 2"));
        }
        if a.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::numeric(
                "cell probabilities must be finite and nonnegative",
            ));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL * a.len() as f64 {
            return Err(Error::numeric(format!(
                "cell probabilities sum to {sum}, not 1"
            )));
        }
        Ok(CellProbabilities { a, source })
    }

    /// The fixed grid used by the fast ARL approximation: every cell gets mass
    /// 1/(m+1).
    pub fn uniform_fixed(m: usize) -> Self {
        CellProbabilities {
            a: vec![1.0 / (m + 1) as f64; m + 1],
            source: CellSource::UniformFixed,
        }
    }

    /// Number of reference observations behind this vector.
    pub fn m(&self) -> usize {
        self.a.len() - 1
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.a
    }

    pub fn source(&self) -> CellSource {
        self.source
    }

    /// Cell vector of the reflected lattice variable m - C. Lower tails are
    /// always computed as upper tails of the reversal.
    pub fn reversed(&self) -> Self {
        let mut a = self.a.clone();
        a.reverse();
        CellProbabilities {
            a,
            source: self.source,
        }
    }

    /// Mean of the cell index under this distribution.
    pub fn cell_mean(&self) -> f64 {
        self.a.iter().enumerate().map(|(l, &p)| l as f64 * p).sum()
    }

    /// Standard deviation of the cell index.
    pub fn cell_sd(&self) -> f64 {
        let mu = self.cell_mean();
        let var: f64 = self
            .a
            .iter()
            .enumerate()
            .map(|(l, &p)| (l as f64 - mu).powi(2) * p)
            .sum();
        var.sqrt()
    }
}

/// Cell probabilities of the reference sample under test distribution g:
/// consecutive cdf increments at the order statistics, with the outer cells
/// absorbing the tails.
pub fn cell_probabilities(x: &ReferenceSample, g: &DistributionSpec) -> Result<CellProbabilities> {
    let sorted = x.sorted();
    let mut a = Vec::with_capacity(sorted.len() + 1);
    let mut prev = 0.0;
    for &v in sorted {
        let c = g.cdf(v);
        if !c.is_finite() {
            return Err(Error::numeric(format!(
                "cdf returned non-finite value at {v}"
            )));
        }
        a.push((c - prev).max(0.0));
        prev = c;
    }
    a.push((1.0 - prev).max(0.0));
    CellProbabilities::new(a, CellSource::FromCdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use crate::rng::{stream_rng, uniform_open01};

    fn refs(v: &[f64]) -> ReferenceSample {
        ReferenceSample::new(v.to_vec()).unwrap()
    }

    fn test(v: &[f64]) -> TestSample {
        TestSample::new(v.to_vec(), 1).unwrap()
    }

    #[test]
    fn all_test_values_below() {
        let s = mann_whitney(&refs(&[3.0, 4.0]), &test(&[1.0, 2.0]), TiePolicy::Strict);
        assert_eq!(s.value(), 0.0);
    }

    #[test]
    fn interleaved_count() {
        let s = mann_whitney(
            &refs(&[1.0, 3.0, 5.0]),
            &test(&[2.0, 4.0]),
            TiePolicy::Strict,
        );
        assert_eq!(s.value(), 3.0);
    }

    #[test]
    fn midrank_gives_half_credit() {
        // I(1<2) + 0.5*I(2=2) + I(1<3) + I(2<3) = 3.5
        let s = mann_whitney(&refs(&[1.0, 2.0]), &test(&[2.0, 3.0]), TiePolicy::Midrank);
        assert_eq!(s.value(), 3.5);
        assert_eq!(s.doubled(), 7);
        assert_eq!(s.to_string(), "3.5");
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(ReferenceSample::new(vec![]).is_err());
        assert!(ReferenceSample::new(vec![1.0]).is_err());
        assert!(TestSample::new(vec![], 1).is_err());
    }

    #[test]
    fn cell_counts_basic() {
        assert_eq!(
            cell_counts(&refs(&[1.0, 3.0, 5.0]), &test(&[2.0, 4.0])),
            vec![1, 2]
        );
        assert_eq!(
            cell_counts(&refs(&[1.0, 2.0]), &test(&[0.5, 0.7])),
            vec![0, 0]
        );
    }

    #[test]
    fn cell_counts_sum_to_statistic() {
        let mut rng = stream_rng(11, 0);
        for round in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| uniform_open01(&mut rng)).collect();
            let y: Vec<f64> = (0..3).map(|_| uniform_open01(&mut rng)).collect();
            let x = refs(&x);
            let y = TestSample::new(y, round + 1).unwrap();
            let total: usize = cell_counts(&x, &y).iter().sum();
            let stat = mann_whitney(&x, &y, TiePolicy::Strict);
            assert_eq!(total as f64, stat.value());
        }
    }

    #[test]
    fn antisymmetry_without_ties() {
        let mut rng = stream_rng(12, 0);
        for _ in 0..50 {
            let xv: Vec<f64> = (0..5).map(|_| uniform_open01(&mut rng)).collect();
            let yv: Vec<f64> = (0..4).map(|_| uniform_open01(&mut rng)).collect();
            let fwd = mann_whitney(&refs(&xv), &test(&yv), TiePolicy::Strict);
            let rev = mann_whitney(&refs(&yv), &test(&xv), TiePolicy::Strict);
            assert_eq!(fwd.value() + rev.value(), 20.0);
        }
    }

    #[test]
    fn antisymmetry_with_ties_under_midrank() {
        let xv = [1.0, 2.0, 2.0, 5.0];
        let yv = [2.0, 5.0, 7.0];
        let fwd = mann_whitney(&refs(&xv), &test(&yv), TiePolicy::Midrank);
        let rev = mann_whitney(&refs(&yv), &test(&xv), TiePolicy::Midrank);
        assert_eq!(fwd.value() + rev.value(), 12.0);
    }

    #[test]
    fn shift_monotonicity() {
        let x = refs(&[0.1, 0.4, 0.9, 1.3]);
        let y0 = [0.2, 0.5, 1.0];
        let base = mann_whitney(&x, &test(&y0), TiePolicy::Midrank).value();
        for &c in &[0.05, 0.3, 2.0] {
            let shifted: Vec<f64> = y0.iter().map(|v| v + c).collect();
            let s = mann_whitney(&x, &test(&shifted), TiePolicy::Midrank).value();
            assert!(s >= base);
        }
    }

    #[test]
    fn cells_uniform_spacing() {
        let x = refs(&[1.0 / 3.0, 2.0 / 3.0]);
        let g = DistributionSpec::in_control(Family::Uniform01);
        let cells = cell_probabilities(&x, &g).unwrap();
        for &p in cells.probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cells_normal_symmetry() {
        let x = ReferenceSample::new(vec![0.0, 0.0]).unwrap();
        // two coincident points: middle cell collapses to zero
        let g = DistributionSpec::in_control(Family::Normal);
        let cells = cell_probabilities(&x, &g).unwrap();
        let a = cells.probabilities();
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!(a[1].abs() < 1e-15);
        assert!((a[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cells_fixed_grid_is_uniform() {
        let m = 20;
        let grid: Vec<f64> = (1..=m).map(|i| i as f64 / (m + 1) as f64).collect();
        let x = ReferenceSample::new(grid).unwrap();
        let g = DistributionSpec::in_control(Family::Uniform01);
        let cells = cell_probabilities(&x, &g).unwrap();
        for &p in cells.probabilities() {
            assert!((p - 1.0 / (m + 1) as f64).abs() < 1e-12);
        }
        let fixed = CellProbabilities::uniform_fixed(m);
        assert_eq!(fixed.m(), m);
        assert!((fixed.probabilities()[0] - 1.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn cells_sum_to_one_and_transform_invariant() {
        let mut rng = stream_rng(13, 0);
        let xv: Vec<f64> = (0..40).map(|_| uniform_open01(&mut rng)).collect();
        let x = refs(&xv);
        let u = DistributionSpec::in_control(Family::Uniform01);
        let cells_u = cell_probabilities(&x, &u).unwrap();
        let sum: f64 = cells_u.probabilities().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);

        // probability integral transform: mapping data and distribution through
        // the normal quantile leaves the cells unchanged
        let xn: Vec<f64> = xv.iter().map(|&v| crate::stats::norm_quantile(v)).collect();
        let xn = refs(&xn);
        let n = DistributionSpec::in_control(Family::Normal);
        let cells_n = cell_probabilities(&xn, &n).unwrap();
        for (pu, pn) in cells_u.probabilities().iter().zip(cells_n.probabilities()) {
            assert!((pu - pn).abs() < 1e-9);
        }
    }

    #[test]
    fn reversal_is_involution() {
        let cells = CellProbabilities::new(vec![0.5, 0.3, 0.2], CellSource::FromCdf).unwrap();
        let back = cells.reversed().reversed();
        assert_eq!(cells.probabilities(), back.probabilities());
        assert_eq!(cells.reversed().probabilities(), &[0.2, 0.3, 0.5]);
    }

    #[test]
    fn cell_moments() {
        let cells = CellProbabilities::uniform_fixed(2);
        assert!((cells.cell_mean() - 1.0).abs() < 1e-15);
        assert!((cells.cell_sd() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
