//! Shewhart X-bar chart with parameters estimated from the reference sample,
//! and the head-to-head comparison harness against the Mann-Whitney chart.
//!
//! The X-bar limits are mu_hat +/- k * sigma_hat / sqrt(n) with mu_hat and
//! sigma_hat estimated from the pooled reference observations. The chart
//! constant k is calibrated under normality so the unconditional in-control
//! ARL hits its target with estimation effects included, via the same
//! conditioning argument the Mann-Whitney side uses: given the estimates, the
//! run length is geometric in the signal probability of the subgroup mean.

use rayon::prelude::*;

use crate::chart_design::{find_limits, ChartLimits, DesignCriterion, Sidedness};
use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::mw_stat::{cell_probabilities, ReferenceSample};
use crate::rng::{stream_rng, NS_CALIBRATION, NS_REFERENCE, NS_SUBGROUP_TABLE};
use crate::run_length::MonteCarloConfig;
use crate::stats::{mean, norm_cdf, norm_sf, percentile_type1, sample_sd};
use crate::tail_prob::{signal_probability, TailMethod, DEFAULT_EXACT_CELL_BUDGET};

/// Number of subgroup means in a shared empirical table for non-normal test
/// distributions.
pub const DEFAULT_SUBGROUP_TABLE_DRAWS: usize = 100_000;

/// X-bar chart parameters.
#[derive(Debug, Clone, Copy)]
pub struct ShewhartLimits {
    pub k: f64,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub n: usize,
    pub target_arl0: f64,
}

impl ShewhartLimits {
    /// Estimate the parameters from a concrete reference sample.
    pub fn from_reference(values: &[f64], k: f64, n: usize, target_arl0: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(
                "reference sample needs at least 2 observations",
            ));
        }
        let (mu_hat, sigma_hat) = estimate_parameters(values);
        if sigma_hat <= 0.0 {
            return Err(Error::invalid("reference sample has zero dispersion"));
        }
        Ok(ShewhartLimits {
            k,
            mu_hat,
            sigma_hat,
            n,
            target_arl0,
        })
    }

    pub fn ucl(&self) -> f64 {
        self.mu_hat + self.k * self.sigma_hat / (self.n as f64).sqrt()
    }

    pub fn lcl(&self) -> f64 {
        self.mu_hat - self.k * self.sigma_hat / (self.n as f64).sqrt()
    }

    /// Conditional ARL of this chart under test distribution g.
    pub fn conditional_arl(
        &self,
        g: &DistributionSpec,
        sided: Sidedness,
        table: Option<&SubgroupMeanTable>,
    ) -> Result<f64> {
        shewhart_conditional_arl(self.mu_hat, self.sigma_hat, self.k, g, self.n, sided, table)
    }
}

/// Pooled estimates from the reference sample: mean and sample standard
/// deviation with divisor m-1.
pub fn estimate_parameters(values: &[f64]) -> (f64, f64) {
    let mu = mean(values);
    (mu, sample_sd(values, mu))
}

/// Conditional signal probability of the subgroup mean under a normal test
/// distribution with the given shift, for estimated limits. Exact via the
/// normal cdf.
fn normal_signal_probability(
    mu_hat: f64,
    sigma_hat: f64,
    k: f64,
    shift: f64,
    n: usize,
    sided: Sidedness,
) -> f64 {
    let root_n = (n as f64).sqrt();
    let half = k * sigma_hat / root_n;
    let upper = norm_sf((mu_hat + half - shift) * root_n);
    match sided {
        Sidedness::UpperOneSided => upper,
        Sidedness::TwoSided => upper + norm_cdf((mu_hat - half - shift) * root_n),
    }
}

/// Shared pool of simulated subgroup means, used as an empirical tail table
/// when the test distribution has no closed-form mean distribution.
#[derive(Debug, Clone)]
pub struct SubgroupMeanTable {
    sorted: Vec<f64>,
}

impl SubgroupMeanTable {
    pub fn generate(g: &DistributionSpec, n: usize, draws: usize, seed: u64, stream: u64) -> Self {
        let mut rng = stream_rng(seed, NS_SUBGROUP_TABLE + stream);
        let inv = 1.0 / n as f64;
        let mut sorted: Vec<f64> = (0..draws)
            .map(|_| (0..n).map(|_| g.draw(&mut rng)).sum::<f64>() * inv)
            .collect();
        sorted.sort_by(f64::total_cmp);
        SubgroupMeanTable { sorted }
    }

    pub fn frac_above(&self, c: f64) -> f64 {
        let at_or_below = self.sorted.partition_point(|&v| v <= c);
        (self.sorted.len() - at_or_below) as f64 / self.sorted.len() as f64
    }

    pub fn frac_below(&self, c: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v < c);
        below as f64 / self.sorted.len() as f64
    }
}

/// Conditional ARL of the X-bar chart given estimated parameters, under test
/// distribution g. Normal case is closed form; other families read the
/// shared subgroup-mean table.
pub fn shewhart_conditional_arl(
    mu_hat: f64,
    sigma_hat: f64,
    k: f64,
    g: &DistributionSpec,
    n: usize,
    sided: Sidedness,
    table: Option<&SubgroupMeanTable>,
) -> Result<f64> {
    if sigma_hat <= 0.0 {
        return Err(Error::invalid("sigma_hat must be positive"));
    }
    let p = match g.family {
        Family::Normal => {
            let shift = g.shift_delta * g.base_sd();
            normal_signal_probability(mu_hat, sigma_hat, k, shift, n, sided)
        }
        _ => {
            let table = table.ok_or_else(|| {
                Error::invalid("non-normal test distribution needs a subgroup-mean table")
            })?;
            let root_n = (n as f64).sqrt();
            let half = k * sigma_hat / root_n;
            let upper = table.frac_above(mu_hat + half);
            match sided {
                Sidedness::UpperOneSided => upper,
                Sidedness::TwoSided => upper + table.frac_below(mu_hat - half),
            }
        }
    };
    Ok(if p > 0.0 { 1.0 / p } else { f64::INFINITY })
}

/// Cached (mu_hat, sigma_hat) pairs from reference samples of the calibration
/// distribution, grown deterministically from counter streams.
struct EstimatePairs {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    dist: DistributionSpec,
    m: usize,
    seed: u64,
}

impl EstimatePairs {
    fn new(dist: DistributionSpec, m: usize, seed: u64) -> Self {
        EstimatePairs {
            mu: Vec::new(),
            sigma: Vec::new(),
            dist,
            m,
            seed,
        }
    }

    fn ensure(&mut self, k: usize) {
        if self.mu.len() >= k {
            return;
        }
        let start = self.mu.len();
        let m = self.m;
        let seed = self.seed;
        let dist = self.dist;
        let fresh: Vec<(f64, f64)> = (start..k)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(seed, NS_CALIBRATION + i as u64);
                let xs = dist.sample(&mut rng, m);
                estimate_parameters(&xs)
            })
            .collect();
        for (a, b) in fresh {
            self.mu.push(a);
            self.sigma.push(b);
        }
    }

    /// Conditional ARLs at chart constant k over the first `count` pairs.
    /// Normal calibration evaluates the subgroup-mean tail in closed form;
    /// other families read the shared empirical table.
    fn conditional_arls(
        &self,
        k: f64,
        count: usize,
        n: usize,
        sided: Sidedness,
        table: Option<&SubgroupMeanTable>,
    ) -> Vec<f64> {
        let root_n = (n as f64).sqrt();
        (0..count)
            .map(|i| {
                let mu = self.mu[i];
                let sd = self.sigma[i];
                let half = k * sd / root_n;
                let p = match table {
                    None => {
                        let upper = norm_sf((mu + half) * root_n);
                        match sided {
                            Sidedness::UpperOneSided => upper,
                            Sidedness::TwoSided => upper + norm_cdf((mu - half) * root_n),
                        }
                    }
                    Some(t) => {
                        let upper = t.frac_above(mu + half);
                        match sided {
                            Sidedness::UpperOneSided => upper,
                            Sidedness::TwoSided => upper + t.frac_below(mu - half),
                        }
                    }
                };
                if p > 0.0 {
                    1.0 / p
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

/// Table stream id reserved for calibration, clear of the per-shift tables.
const CALIBRATION_TABLE_STREAM: u64 = 1 << 20;

/// Chart constant k such that the unconditional in-control ARL of the X-bar
/// chart with estimated parameters equals the target under the given process
/// distribution. Bisection on k over common random numbers; the sample pool
/// grows until the Monte Carlo standard error at the solution meets the
/// configured target.
///
/// Both charts in a comparison are designed to the same in-control ARL under
/// the same distribution, so non-normal families calibrate against their own
/// subgroup-mean distribution rather than normal theory.
pub fn shewhart_constant_for(
    family: Family,
    m: usize,
    n: usize,
    target_arl0: f64,
    sided: Sidedness,
    mc: &MonteCarloConfig,
) -> Result<f64> {
    mc.validate()?;
    if m < 2 {
        return Err(Error::invalid("calibration needs m >= 2"));
    }
    if target_arl0 <= 1.0 {
        return Err(Error::invalid("target ARL0 must exceed 1"));
    }
    let dist = comparison_distribution(family);
    let table = match family {
        Family::Normal => None,
        _ => Some(SubgroupMeanTable::generate(
            &dist,
            n,
            DEFAULT_SUBGROUP_TABLE_DRAWS,
            mc.seed,
            CALIBRATION_TABLE_STREAM,
        )),
    };
    let mut pairs = EstimatePairs::new(dist, m, mc.seed);
    let k_cap = mc.k_max.max(1000);
    let mut k_samples = mc.k_initial.max(1000).min(k_cap);

    loop {
        pairs.ensure(k_samples);
        let arl_at = |k: f64| -> f64 {
            mean(&pairs.conditional_arls(k, k_samples, n, sided, table.as_ref()))
        };

        let mut lo = 1.0;
        let mut hi = 8.0;
        if arl_at(lo) > target_arl0 || arl_at(hi) < target_arl0 {
            return Err(Error::numeric(format!(
                "chart constant for target {target_arl0} not bracketed in [1, 8]"
            )));
        }
        for _ in 0..45 {
            let mid = 0.5 * (lo + hi);
            if arl_at(mid) < target_arl0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = 0.5 * (lo + hi);

        let vals = pairs.conditional_arls(k, k_samples, n, sided, table.as_ref());
        let finite = vals.iter().all(|v| v.is_finite());
        let est = mean(&vals);
        let smc = if finite {
            sample_sd(&vals, est) / (k_samples as f64).sqrt()
        } else {
            f64::INFINITY
        };
        let bound = match mc.error_target {
            crate::run_length::ErrorTarget::Absolute(d) => d,
            crate::run_length::ErrorTarget::FractionOfEstimate(f) => f * target_arl0,
        };
        if smc <= bound || k_samples >= k_cap {
            return Ok(k);
        }
        k_samples = (k_samples * 2).min(k_cap);
    }
}

/// Normal-theory chart constant: the classical estimated-parameters case.
pub fn shewhart_constant(
    m: usize,
    n: usize,
    target_arl0: f64,
    sided: Sidedness,
    mc: &MonteCarloConfig,
) -> Result<f64> {
    shewhart_constant_for(Family::Normal, m, n, target_arl0, sided, mc)
}

/// One delta row of the comparison study.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonRow {
    pub delta: f64,
    pub mw_arl: f64,
    pub mw_q95: f64,
    pub shewhart_arl: f64,
    pub shewhart_q95: f64,
}

/// Out-of-control comparison of both charts at a shared in-control target.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub target_arl0: f64,
    pub mw_limits: ChartLimits,
    pub shewhart_k: f64,
    pub k_used: usize,
}

/// Base (in-control) distribution used in the comparison studies: symmetric
/// families are rescaled to unit variance; the gamma family keeps its natural
/// scale and is shifted in units of its own standard deviation.
pub fn comparison_distribution(family: Family) -> DistributionSpec {
    match family {
        Family::Gamma22 => DistributionSpec::in_control(family),
        _ => DistributionSpec::standardized(family),
    }
}

/// Lattice size below which the comparison harness prefers exact tails. The
/// expansion cost grows quadratically in m*n, so this sits well under the
/// hard capacity budget; past it the saddlepoint engine takes over.
const COMPARISON_EXACT_CELLS: usize = 1024;

fn mw_tail_method(m: usize, n: usize) -> TailMethod {
    if (m + 1) * n <= COMPARISON_EXACT_CELLS.min(DEFAULT_EXACT_CELL_BUDGET) {
        TailMethod::Exact
    } else {
        TailMethod::Lr
    }
}

/// Design both charts for the shared target, then estimate unconditional ARL
/// and the 95th conditional percentile for each shift in `deltas`, using
/// common random numbers: both charts see the same reference samples, and all
/// shifts share the per-index streams.
pub fn compare_charts(
    m: usize,
    n: usize,
    target_arl0: f64,
    family: Family,
    deltas: &[f64],
    sided: Sidedness,
    mc: &MonteCarloConfig,
) -> Result<ComparisonReport> {
    mc.validate()?;
    let criterion = DesignCriterion::mean_arl0(target_arl0);
    let design = find_limits(m, n, criterion, sided, mc)?;
    let shewhart_k = shewhart_constant_for(family, m, n, target_arl0, sided, mc)?;

    let f_ref = comparison_distribution(family);
    let tail = mw_tail_method(m, n);

    let mut deltas = deltas.to_vec();
    deltas.sort_by(f64::total_cmp);

    let mut rows = Vec::with_capacity(deltas.len());
    let mut k_used_overall = 0usize;
    for (di, &delta) in deltas.iter().enumerate() {
        let g = f_ref.with_shift(delta);
        let table = match family {
            Family::Normal => None,
            _ => Some(SubgroupMeanTable::generate(
                &g,
                n,
                DEFAULT_SUBGROUP_TABLE_DRAWS,
                mc.seed,
                di as u64,
            )),
        };

        let eval_sample = |i: usize| -> Result<(f64, f64)> {
            let mut rng = stream_rng(mc.seed, NS_REFERENCE + i as u64);
            let xs = f_ref.sample(&mut rng, m);
            let x = ReferenceSample::new(xs)?;
            let cells = cell_probabilities(&x, &g)?;
            let p = signal_probability(&cells, n, &design.limits, tail)?;
            let mw = if p > 0.0 { 1.0 / p } else { f64::INFINITY };
            let (mu, sd) = estimate_parameters(x.values());
            let sh = shewhart_conditional_arl(mu, sd, shewhart_k, &g, n, sided, table.as_ref())?;
            Ok((mw, sh))
        };

        let mut k = mc.k_initial;
        let mut mw_vals: Vec<f64> = Vec::new();
        let mut sh_vals: Vec<f64> = Vec::new();
        loop {
            let start = mw_vals.len();
            let fresh: Result<Vec<(f64, f64)>> =
                (start..k).into_par_iter().map(eval_sample).collect();
            for (a, b) in fresh? {
                mw_vals.push(a);
                sh_vals.push(b);
            }
            let bad = mw_vals
                .iter()
                .chain(sh_vals.iter())
                .filter(|v| !v.is_finite())
                .count();
            if bad > 0 {
                return Err(Error::InfiniteConditionalArl {
                    count: bad,
                    k: mw_vals.len(),
                });
            }
            let mw_est = mean(&mw_vals);
            let sh_est = mean(&sh_vals);
            let mw_smc = sample_sd(&mw_vals, mw_est) / (k as f64).sqrt();
            let sh_smc = sample_sd(&sh_vals, sh_est) / (k as f64).sqrt();
            let bound = match mc.error_target {
                crate::run_length::ErrorTarget::Absolute(d) => d,
                crate::run_length::ErrorTarget::FractionOfEstimate(f) => f * mw_est.min(sh_est),
            };
            if (mw_smc.max(sh_smc) <= bound) || k >= mc.k_max {
                break;
            }
            k = (k * 2).min(mc.k_max);
        }
        k_used_overall = k_used_overall.max(mw_vals.len());

        let mut mw_sorted = mw_vals.clone();
        mw_sorted.sort_by(f64::total_cmp);
        let mut sh_sorted = sh_vals.clone();
        sh_sorted.sort_by(f64::total_cmp);
        rows.push(ComparisonRow {
            delta,
            mw_arl: mean(&mw_vals),
            mw_q95: percentile_type1(&mw_sorted, 0.95),
            shewhart_arl: mean(&sh_vals),
            shewhart_q95: percentile_type1(&sh_sorted, 0.95),
        });
    }

    Ok(ComparisonReport {
        rows,
        family,
        m,
        n,
        target_arl0,
        mw_limits: design.limits,
        shewhart_k,
        k_used: k_used_overall,
    })
}

/// One row of the in-control conditional-distribution table.
#[derive(Debug, Clone, Copy)]
pub struct InControlRow {
    pub m: usize,
    pub mw_ucl: i64,
    pub mw_p5: f64,
    pub mw_p95: f64,
    pub mw_sd: f64,
    pub shewhart_k: f64,
    pub sh_p5: f64,
    pub sh_p95: f64,
    pub sh_sd: f64,
}

/// In-control percentile comparison across reference sample sizes, normal
/// data, both charts designed for the shared target. Exactly `mc.k_initial`
/// reference samples per row (the table protocol), common random numbers
/// between the charts.
pub fn in_control_percentile_table(
    m_list: &[usize],
    n: usize,
    target_arl0: f64,
    mc: &MonteCarloConfig,
) -> Result<Vec<InControlRow>> {
    mc.validate()?;
    let normal = DistributionSpec::standardized(Family::Normal);
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let design = find_limits(
            m,
            n,
            DesignCriterion::mean_arl0(target_arl0),
            Sidedness::TwoSided,
            mc,
        )?;
        let k_const = shewhart_constant(m, n, target_arl0, Sidedness::TwoSided, mc)?;
        let tail = mw_tail_method(m, n);
        let k = mc.k_initial;
        let pairs: Result<Vec<(f64, f64)>> = (0..k)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream_rng(mc.seed, NS_REFERENCE + i as u64);
                let xs = normal.sample(&mut rng, m);
                let x = ReferenceSample::new(xs)?;
                let cells = cell_probabilities(&x, &normal)?;
                let p = signal_probability(&cells, n, &design.limits, tail)?;
                let mw = if p > 0.0 { 1.0 / p } else { f64::INFINITY };
                let (mu, sd) = estimate_parameters(x.values());
                let sh = shewhart_conditional_arl(
                    mu,
                    sd,
                    k_const,
                    &normal,
                    n,
                    Sidedness::TwoSided,
                    None,
                )?;
                Ok((mw, sh))
            })
            .collect();
        let (mw_vals, sh_vals): (Vec<f64>, Vec<f64>) = pairs?.into_iter().unzip();

        let mw_mean = mean(&mw_vals);
        let sh_mean = mean(&sh_vals);
        let mut mw_sorted = mw_vals.clone();
        mw_sorted.sort_by(f64::total_cmp);
        let mut sh_sorted = sh_vals.clone();
        sh_sorted.sort_by(f64::total_cmp);
        rows.push(InControlRow {
            m,
            mw_ucl: design.limits.ucl,
            mw_p5: percentile_type1(&mw_sorted, 0.05),
            mw_p95: percentile_type1(&mw_sorted, 0.95),
            mw_sd: sample_sd(&mw_vals, mw_mean),
            shewhart_k: k_const,
            sh_p5: percentile_type1(&sh_sorted, 0.05),
            sh_p95: percentile_type1(&sh_sorted, 0.95),
            sh_sd: sample_sd(&sh_vals, sh_mean),
        });
    }
    Ok(rows)
}
