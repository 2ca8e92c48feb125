//! Run-length properties by the conditioning method.
//!
//! Given the reference sample, the run length is geometric with the signal
//! probability as its parameter, so the conditional ARL is its reciprocal.
//! The unconditional ARL is a Monte Carlo average of conditional ARLs over
//! reference samples, with sample size K grown geometrically until the Monte
//! Carlo standard error meets the requested target. Two fast deterministic
//! approximations are provided as well: the fixed (quantile-grid) reference
//! sample and the reciprocal false alarm rate.

use rayon::prelude::*;

use crate::chart_design::ChartLimits;
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::mw_stat::{cell_probabilities, CellProbabilities, ReferenceSample};
use crate::rng::{stream_rng, NS_REFERENCE};
use crate::stats::{mean, percentile_type1, sample_sd};
use crate::tail_prob::{
    null_upper_tail_edgeworth, signal_probability, NullDistribution, TailMethod,
    DEFAULT_EXACT_CELL_BUDGET, DEFAULT_NULL_EXACT_BUDGET,
};

/// Monte Carlo error target: absolute, or a fraction of the running estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorTarget {
    Absolute(f64),
    FractionOfEstimate(f64),
}

impl ErrorTarget {
    fn bound(&self, estimate: f64) -> f64 {
        match *self {
            ErrorTarget::Absolute(d) => d,
            ErrorTarget::FractionOfEstimate(f) => f * estimate.abs(),
        }
    }
}

/// Controls for the adaptive Monte Carlo loop.
#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub seed: u64,
    pub k_initial: usize,
    pub k_max: usize,
    pub error_target: ErrorTarget,
    pub percentiles: Vec<f64>,
}

impl MonteCarloConfig {
    pub fn new(seed: u64) -> Self {
        MonteCarloConfig {
            seed,
            k_initial: 100,
            k_max: 1_000_000,
            error_target: ErrorTarget::FractionOfEstimate(0.015),
            percentiles: vec![0.05, 0.95],
        }
    }

    /// Fixed sample size: no adaptive growth.
    pub fn fixed_k(seed: u64, k: usize) -> Self {
        MonteCarloConfig {
            seed,
            k_initial: k,
            k_max: k,
            error_target: ErrorTarget::FractionOfEstimate(0.015),
            percentiles: vec![0.05, 0.95],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_initial == 0 || self.k_initial > self.k_max {
            return Err(Error::invalid("need 1 <= k_initial <= k_max"));
        }
        let positive = match self.error_target {
            ErrorTarget::Absolute(d) => d > 0.0,
            ErrorTarget::FractionOfEstimate(f) => f > 0.0,
        };
        if !positive {
            return Err(Error::invalid("error target must be positive"));
        }
        Ok(())
    }
}

/// Which ARL engine produced a summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArlMethod {
    Exact,
    Lr,
    Normal,
    FixedReference,
    FalseAlarm,
}

impl ArlMethod {
    pub fn parse(s: &str) -> Result<ArlMethod> {
        match s {
            "ex" | "exact" => Ok(ArlMethod::Exact),
            "lr" => Ok(ArlMethod::Lr),
            "no" | "normal" => Ok(ArlMethod::Normal),
            "fr" => Ok(ArlMethod::FixedReference),
            "fa" => Ok(ArlMethod::FalseAlarm),
            other => Err(Error::invalid(format!("unknown ARL method '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArlMethod::Exact => "ex",
            ArlMethod::Lr => "lr",
            ArlMethod::Normal => "no",
            ArlMethod::FixedReference => "fr",
            ArlMethod::FalseAlarm => "fa",
        }
    }

    pub fn tail_method(self) -> Option<TailMethod> {
        match self {
            ArlMethod::Exact => Some(TailMethod::Exact),
            ArlMethod::Lr => Some(TailMethod::Lr),
            ArlMethod::Normal => Some(TailMethod::Normal),
            _ => None,
        }
    }
}

/// Result of an ARL computation.
#[derive(Debug, Clone)]
pub struct RunLengthSummary {
    pub arl_estimate: f64,
    /// Monte Carlo standard error of the estimate; zero for the deterministic
    /// methods.
    pub smc: f64,
    /// (probability, conditional-ARL percentile) pairs, ascending.
    pub percentiles: Vec<(f64, f64)>,
    /// Standard deviation of the conditional-ARL sample.
    pub std_dev: f64,
    pub k_used: usize,
    pub method: ArlMethod,
    pub converged: bool,
}

impl RunLengthSummary {
    pub fn percentile(&self, q: f64) -> Option<f64> {
        self.percentiles
            .iter()
            .find(|(p, _)| (p - q).abs() < 1e-12)
            .map(|&(_, v)| v)
    }

    pub(crate) fn deterministic(value: f64, method: ArlMethod) -> Self {
        RunLengthSummary {
            arl_estimate: value,
            smc: 0.0,
            percentiles: Vec::new(),
            std_dev: 0.0,
            k_used: 0,
            method,
            converged: true,
        }
    }
}

/// Conditional ARL for one concrete reference sample: 1 / signal probability.
/// A zero signal probability yields the infinity sentinel.
pub fn conditional_arl(
    x: &ReferenceSample,
    g: &DistributionSpec,
    limits: &ChartLimits,
    method: TailMethod,
) -> Result<f64> {
    let cells = cell_probabilities(x, g)?;
    let p = signal_probability(&cells, limits.n, limits, method)?;
    Ok(if p > 0.0 { 1.0 / p } else { f64::INFINITY })
}

/// Lazily grown pool of per-sample cell probability vectors. Sample i is
/// always drawn from stream (seed, i), so the pool contents are independent
/// of growth schedule and thread count.
pub struct CellCache {
    f_reference: DistributionSpec,
    g_test: DistributionSpec,
    m: usize,
    seed: u64,
    cells: Vec<CellProbabilities>,
}

impl CellCache {
    pub fn new(
        f_reference: DistributionSpec,
        g_test: DistributionSpec,
        m: usize,
        seed: u64,
    ) -> Self {
        CellCache {
            f_reference,
            g_test,
            m,
            seed,
            cells: Vec::new(),
        }
    }

    pub fn ensure(&mut self, k: usize) -> Result<()> {
        if self.cells.len() >= k {
            return Ok(());
        }
        let start = self.cells.len();
        let f = self.f_reference;
        let g = self.g_test;
        let m = self.m;
        let seed = self.seed;
        let fresh: Result<Vec<CellProbabilities>> = (start..k)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, NS_REFERENCE + i as u64);
                let x = ReferenceSample::new(f.sample(&mut rng, m))?;
                cell_probabilities(&x, &g)
            })
            .collect();
        self.cells.extend(fresh?);
        Ok(())
    }

    pub fn cells(&self, k: usize) -> &[CellProbabilities] {
        &self.cells[..k]
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

fn conditional_arls_for(
    cells: &[CellProbabilities],
    limits: &ChartLimits,
    method: TailMethod,
) -> Result<Vec<f64>> {
    cells
        .par_iter()
        .map(|a| {
            let p = signal_probability(a, limits.n, limits, method)?;
            Ok(if p > 0.0 { 1.0 / p } else { f64::INFINITY })
        })
        .collect()
}

fn fail_fast_exact_budget(limits: &ChartLimits, method: TailMethod) -> Result<()> {
    if method == TailMethod::Exact {
        let work = (limits.m + 1) * limits.n;
        if work > DEFAULT_EXACT_CELL_BUDGET {
            return Err(Error::Capacity(format!(
                "exact expansion for m={}, n={} needs {work} coefficient cells (budget {}); \
                 use the LR method instead",
                limits.m, limits.n, DEFAULT_EXACT_CELL_BUDGET
            )));
        }
    }
    Ok(())
}

struct AdaptiveOutcome {
    values: Vec<f64>,
    converged: bool,
}

/// Grow K geometrically (doubling, retaining earlier samples) until the Monte
/// Carlo standard error of the mean of `per_sample` values meets the target.
fn adaptive_loop<F>(mc: &MonteCarloConfig, mut batch: F) -> Result<AdaptiveOutcome>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    mc.validate()?;
    let mut k = mc.k_initial.min(mc.k_max);
    let mut values = batch(k)?;
    loop {
        let finite = values.iter().filter(|v| v.is_finite()).count();
        if finite < values.len() {
            return Err(Error::InfiniteConditionalArl {
                count: values.len() - finite,
                k: values.len(),
            });
        }
        let est = mean(&values);
        let sd = sample_sd(&values, est);
        let smc = sd / (values.len() as f64).sqrt();
        if smc <= mc.error_target.bound(est) {
            return Ok(AdaptiveOutcome {
                values,
                converged: true,
            });
        }
        if k >= mc.k_max {
            return Ok(AdaptiveOutcome {
                values,
                converged: false,
            });
        }
        k = (k * 2).min(mc.k_max);
        values = batch(k)?;
    }
}

fn summarize(
    values: &[f64],
    mc: &MonteCarloConfig,
    method: ArlMethod,
    converged: bool,
) -> RunLengthSummary {
    let est = mean(values);
    let sd = sample_sd(values, est);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut percentiles: Vec<(f64, f64)> = mc
        .percentiles
        .iter()
        .map(|&q| (q, percentile_type1(&sorted, q)))
        .collect();
    percentiles.sort_by(|a, b| a.0.total_cmp(&b.0));
    RunLengthSummary {
        arl_estimate: est,
        smc: sd / (values.len() as f64).sqrt(),
        percentiles,
        std_dev: sd,
        k_used: values.len(),
        method,
        converged,
    }
}

/// Unconditional ARL with a caller-supplied sample cache, so a limit search
/// can evaluate many candidate limits on common random numbers.
pub fn arl_monte_carlo_cached(
    cache: &mut CellCache,
    limits: &ChartLimits,
    method: TailMethod,
    mc: &MonteCarloConfig,
) -> Result<RunLengthSummary> {
    if cache.m() != limits.m {
        return Err(Error::invalid("cache and limits disagree on m"));
    }
    fail_fast_exact_budget(limits, method)?;
    let outcome = adaptive_loop(mc, |k| {
        cache.ensure(k)?;
        conditional_arls_for(cache.cells(k), limits, method)
    })?;
    let arl_method = match method {
        TailMethod::Exact => ArlMethod::Exact,
        TailMethod::Lr => ArlMethod::Lr,
        TailMethod::Normal => ArlMethod::Normal,
    };
    Ok(summarize(
        &outcome.values,
        mc,
        arl_method,
        outcome.converged,
    ))
}

/// Unconditional ARL: reference samples i.i.d. from `f_reference`, test
/// distribution `g_test`. For the in-control case pass U(0,1) for both; the
/// run-length distribution does not depend on the common distribution.
pub fn arl_monte_carlo(
    f_reference: &DistributionSpec,
    g_test: &DistributionSpec,
    limits: &ChartLimits,
    method: TailMethod,
    mc: &MonteCarloConfig,
) -> Result<RunLengthSummary> {
    let mut cache = CellCache::new(*f_reference, *g_test, limits.m, mc.seed);
    arl_monte_carlo_cached(&mut cache, limits, method, mc)
}

/// Fast deterministic ARL0: fix the reference sample to the uniform quantile
/// grid, giving uniform cell probabilities, and invert the signal probability
/// once. Uses the exact engine when it fits the budget, the saddlepoint
/// engine otherwise.
pub fn arl0_fixed_reference(m: usize, n: usize, limits: &ChartLimits) -> Result<f64> {
    let a = CellProbabilities::uniform_fixed(m);
    let method = if (m + 1) * n <= DEFAULT_EXACT_CELL_BUDGET {
        TailMethod::Exact
    } else {
        TailMethod::Lr
    };
    let p = signal_probability(&a, n, limits, method)?;
    Ok(if p > 0.0 { 1.0 / p } else { f64::INFINITY })
}

/// Fast deterministic ARL0: reciprocal of the false alarm rate computed from
/// the null distribution of the statistic (exact within budget, Edgeworth
/// beyond it). Two-sided charts double the upper tail; the null distribution
/// is symmetric.
pub fn arl0_false_alarm(m: usize, n: usize, limits: &ChartLimits) -> Result<f64> {
    let tail = if m * n <= DEFAULT_NULL_EXACT_BUDGET {
        NullDistribution::new(m, n)?.upper_tail(limits.ucl)
    } else {
        null_upper_tail_edgeworth(m, n, limits.ucl)
    };
    let p0 = if limits.lcl.is_some() {
        2.0 * tail
    } else {
        tail
    };
    Ok(if p0 > 0.0 { 1.0 / p0 } else { f64::INFINITY })
}

/// Probability estimate with Monte Carlo error information.
#[derive(Debug, Clone, Copy)]
pub struct ProbabilityEstimate {
    pub probability: f64,
    pub smc: f64,
    pub k_used: usize,
    pub converged: bool,
}

/// P(N <= t): Monte Carlo average of the conditional geometric cdf
/// 1 - (1 - p)^t over reference samples, with the same adaptive-K control.
pub fn run_length_cdf_at(
    t: u64,
    f_reference: &DistributionSpec,
    g_test: &DistributionSpec,
    limits: &ChartLimits,
    method: TailMethod,
    mc: &MonteCarloConfig,
) -> Result<ProbabilityEstimate> {
    if t == 0 {
        return Err(Error::invalid("run length horizon t must be >= 1"));
    }
    fail_fast_exact_budget(limits, method)?;
    let mut cache = CellCache::new(*f_reference, *g_test, limits.m, mc.seed);
    let tf = t as f64;
    let outcome = adaptive_loop(mc, |k| {
        cache.ensure(k)?;
        cache
            .cells(k)
            .par_iter()
            .map(|a| {
                let p = signal_probability(a, limits.n, limits, method)?;
                // 1 - (1-p)^t, stable for small p
                Ok(-f64::exp_m1(tf * f64::ln_1p(-p)))
            })
            .collect()
    })?;
    let est = mean(&outcome.values);
    let sd = sample_sd(&outcome.values, est);
    Ok(ProbabilityEstimate {
        probability: est,
        smc: sd / (outcome.values.len() as f64).sqrt(),
        k_used: outcome.values.len(),
        converged: outcome.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart_design::Sidedness;
    use crate::distributions::Family;

    fn u01() -> DistributionSpec {
        DistributionSpec::in_control(Family::Uniform01)
    }

    #[test]
    fn conditional_arl_hand_example() {
        let x = ReferenceSample::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let limits = ChartLimits::new(2, 2, 3, Sidedness::TwoSided, 4.5).unwrap();
        let arl = conditional_arl(&x, &u01(), &limits, TailMethod::Exact).unwrap();
        assert!((arl - 4.5).abs() < 1e-12);
    }

    #[test]
    fn infinity_sentinel_at_empty_signal_region() {
        let x = ReferenceSample::new(vec![0.2, 0.4, 0.6]).unwrap();
        let limits = ChartLimits::new(3, 2, 6, Sidedness::UpperOneSided, 10.0).unwrap();
        let arl = conditional_arl(&x, &u01(), &limits, TailMethod::Exact).unwrap();
        assert!(arl.is_infinite());
    }

    #[test]
    fn fixed_reference_matches_table_values() {
        // deterministic anchors for the uniform-cell tail computation
        let l50 = ChartLimits::new(50, 5, 217, Sidedness::TwoSided, 500.0).unwrap();
        let fr = arl0_fixed_reference(50, 5, &l50).unwrap();
        assert!((fr - 403.0).abs() < 0.02 * 403.0, "FR(50,5) = {fr}");

        let l1000 = ChartLimits::new(1000, 5, 4347, Sidedness::TwoSided, 500.0).unwrap();
        let fr = arl0_fixed_reference(1000, 5, &l1000).unwrap();
        assert!((fr - 513.0).abs() < 0.02 * 513.0, "FR(1000,5) = {fr}");
    }

    #[test]
    fn false_alarm_rate_small_case_by_enumeration() {
        // m=n=2, U=3: null upper tail 1/6, two-sided ARL 1/(2/6) = 3
        let limits = ChartLimits::new(2, 2, 3, Sidedness::TwoSided, 3.0).unwrap();
        let fa = arl0_false_alarm(2, 2, &limits).unwrap();
        assert!((fa - 3.0).abs() < 1e-12);
    }

    #[test]
    fn false_alarm_rate_table_values() {
        let l50 = ChartLimits::new(50, 5, 217, Sidedness::TwoSided, 500.0).unwrap();
        let fa = arl0_false_alarm(50, 5, &l50).unwrap();
        assert!((fa - 247.0).abs() < 0.05 * 247.0, "FA(50,5) = {fa}");

        let l2000 = ChartLimits::new(2000, 10, 15_460, Sidedness::TwoSided, 500.0).unwrap();
        let fa = arl0_false_alarm(2000, 10, &l2000).unwrap();
        assert!((fa - 499.0).abs() < 0.02 * 499.0, "FA(2000,10) = {fa}");
    }

    #[test]
    fn adaptive_k_doubles_and_converges() {
        let limits = ChartLimits::new(50, 5, 217, Sidedness::TwoSided, 500.0).unwrap();
        let mut mc = MonteCarloConfig::new(7);
        mc.error_target = ErrorTarget::FractionOfEstimate(0.05);
        let s = arl_monte_carlo(&u01(), &u01(), &limits, TailMethod::Lr, &mc).unwrap();
        assert!(s.converged);
        assert!(s.k_used >= 100);
        assert!(s.smc <= 0.05 * s.arl_estimate);
        assert!((s.smc - s.std_dev / (s.k_used as f64).sqrt()).abs() < 1e-12);
        // percentile sanity
        let p5 = s.percentile(0.05).unwrap();
        let p95 = s.percentile(0.95).unwrap();
        assert!(p5 <= s.arl_estimate && s.arl_estimate <= p95);
    }

    #[test]
    fn k_max_reached_flags_not_converged() {
        let limits = ChartLimits::new(20, 5, 85, Sidedness::TwoSided, 200.0).unwrap();
        let mut mc = MonteCarloConfig::new(3);
        mc.k_initial = 50;
        mc.k_max = 100;
        mc.error_target = ErrorTarget::FractionOfEstimate(1e-6);
        let s = arl_monte_carlo(&u01(), &u01(), &limits, TailMethod::Lr, &mc).unwrap();
        assert!(!s.converged);
        assert_eq!(s.k_used, 100);
    }

    #[test]
    fn infinite_sentinels_abort_with_diagnostic() {
        // one-sided limit at the lattice maximum: every sample has p = 0
        let limits = ChartLimits::new(10, 3, 30, Sidedness::UpperOneSided, 100.0).unwrap();
        let mc = MonteCarloConfig::fixed_k(5, 20);
        let err = arl_monte_carlo(&u01(), &u01(), &limits, TailMethod::Exact, &mc).unwrap_err();
        match err {
            Error::InfiniteConditionalArl { count, k } => {
                assert_eq!(count, 20);
                assert_eq!(k, 20);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let limits = ChartLimits::new(30, 5, 130, Sidedness::TwoSided, 300.0).unwrap();
        let mc = MonteCarloConfig::fixed_k(11, 200);
        let a = arl_monte_carlo(&u01(), &u01(), &limits, TailMethod::Lr, &mc).unwrap();
        let b = arl_monte_carlo(&u01(), &u01(), &limits, TailMethod::Lr, &mc).unwrap();
        assert_eq!(a.arl_estimate.to_bits(), b.arl_estimate.to_bits());
        assert_eq!(a.smc.to_bits(), b.smc.to_bits());
        assert_eq!(a.percentiles, b.percentiles);
    }

    #[test]
    fn exact_over_budget_fails_fast() {
        let limits = ChartLimits::new(2000, 25, 40_000, Sidedness::TwoSided, 500.0).unwrap();
        let mc = MonteCarloConfig::fixed_k(1, 10);
        let err = arl_monte_carlo(&u01(), &u01(), &limits, TailMethod::Exact, &mc).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn run_length_cdf_t1_equals_mean_signal_probability() {
        let limits = ChartLimits::new(20, 5, 88, Sidedness::TwoSided, 100.0).unwrap();
        let mc = MonteCarloConfig::fixed_k(13, 300);
        let est = run_length_cdf_at(1, &u01(), &u01(), &limits, TailMethod::Exact, &mc).unwrap();
        // direct average of p over the same streams
        let mut cache = CellCache::new(u01(), u01(), 20, 13);
        cache.ensure(300).unwrap();
        let ps: Vec<f64> = cache
            .cells(300)
            .iter()
            .map(|a| signal_probability(a, 5, &limits, TailMethod::Exact).unwrap())
            .collect();
        assert!((est.probability - mean(&ps)).abs() < 1e-14);
    }

    #[test]
    fn run_length_cdf_saturates() {
        let limits = ChartLimits::new(20, 5, 88, Sidedness::TwoSided, 100.0).unwrap();
        let mc = MonteCarloConfig::fixed_k(13, 50);
        let est = run_length_cdf_at(100_000_000, &u01(), &u01(), &limits, TailMethod::Exact, &mc)
            .unwrap();
        assert!((est.probability - 1.0).abs() < 1e-9);
    }

    #[test]
    fn run_length_cdf_matches_geometric_sum() {
        // finite geometric sum as an independent route to the same quantity
        let limits = ChartLimits::new(6, 3, 16, Sidedness::TwoSided, 20.0).unwrap();
        let mc = MonteCarloConfig::fixed_k(17, 40);
        let t = 25u64;
        let est = run_length_cdf_at(t, &u01(), &u01(), &limits, TailMethod::Exact, &mc).unwrap();
        let mut cache = CellCache::new(u01(), u01(), 6, 17);
        cache.ensure(40).unwrap();
        let direct: Vec<f64> = cache
            .cells(40)
            .iter()
            .map(|a| {
                let p = signal_probability(a, 3, &limits, TailMethod::Exact).unwrap();
                let mut acc = 0.0;
                for s in 1..=t {
                    acc += p * (1.0 - p).powi(s as i32 - 1);
                }
                acc
            })
            .collect();
        assert!((est.probability - mean(&direct)).abs() < 1e-10);
    }

    #[test]
    fn widening_limits_never_decreases_conditional_arl() {
        let x =
            ReferenceSample::new((1..=20).map(|i| i as f64 / 21.0).collect::<Vec<_>>()).unwrap();
        let mut prev = 0.0;
        for ucl in 70..=99 {
            let limits = ChartLimits::new(20, 5, ucl, Sidedness::TwoSided, 100.0).unwrap();
            let arl = conditional_arl(&x, &u01(), &limits, TailMethod::Exact).unwrap();
            assert!(arl >= prev);
            prev = arl;
        }
    }
}
