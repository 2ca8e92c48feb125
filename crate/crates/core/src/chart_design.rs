//! Control limit search: find integer limits meeting a target in-control ARL
//! (or a conditional-percentile / run-length-probability criterion).
//!
//! The search is staged. A false-alarm-rate inversion on the null
//! distribution seeds an initial limit; for moderate reference sizes the
//! deterministic fixed-reference approximation brackets the target on the
//! integer lattice; the bracket is then handed to the Monte Carlo evaluator,
//! which proposes successive limits by linear interpolation until the
//! attained value is within tolerance. Evaluations share one pool of
//! reference samples (common random numbers), which keeps the attained curve
//! monotone in the limit and the whole search reproducible from its seed.

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::run_length::{
    arl0_false_alarm, arl0_fixed_reference, arl_monte_carlo, arl_monte_carlo_cached,
    run_length_cdf_at, ArlMethod, CellCache, MonteCarloConfig, RunLengthSummary,
};
use crate::tail_prob::{
    null_upper_tail_edgeworth, NullDistribution, TailMethod, DEFAULT_EXACT_CELL_BUDGET,
    DEFAULT_NULL_EXACT_BUDGET,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    TwoSided,
    UpperOneSided,
}

impl Sidedness {
    pub fn parse(s: &str) -> Result<Sidedness> {
        match s {
            "two" | "two-sided" | "two_sided" => Ok(Sidedness::TwoSided),
            "upper" | "one-sided" | "upper_one_sided" => Ok(Sidedness::UpperOneSided),
            other => Err(Error::invalid(format!("unknown sidedness '{other}'"))),
        }
    }
}

/// Integer control limits for the chart. Two-sided limits are symmetric:
/// lcl = mn - ucl, matching the null symmetry of the statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartLimits {
    pub m: usize,
    pub n: usize,
    pub ucl: i64,
    pub lcl: Option<i64>,
    pub sided: Sidedness,
    pub target_arl0: f64,
    pub attained_arl0: Option<f64>,
    pub attained_percentile_5: Option<f64>,
}

impl ChartLimits {
    pub fn new(m: usize, n: usize, ucl: i64, sided: Sidedness, target_arl0: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("reference sample size m must be >= 2"));
        }
        if n < 1 {
            return Err(Error::invalid("test sample size n must be >= 1"));
        }
        let mn = (m * n) as i64;
        if 2 * ucl <= mn || ucl > mn {
            return Err(Error::invalid(format!(
                "ucl must lie in (mn/2, mn] = ({}, {mn}], got {ucl}",
                mn as f64 / 2.0
            )));
        }
        let lcl = match sided {
            Sidedness::TwoSided => Some(mn - ucl),
            Sidedness::UpperOneSided => None,
        };
        Ok(ChartLimits {
            m,
            n,
            ucl,
            lcl,
            sided,
            target_arl0,
            attained_arl0: None,
            attained_percentile_5: None,
        })
    }

    pub fn mn(&self) -> i64 {
        (self.m * self.n) as i64
    }
}

/// What the limit search is asked to hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriterionKind {
    /// Unconditional in-control ARL equal to `target`.
    MeanArl0 { target: f64 },
    /// q-th percentile of the conditional in-control ARL equal to `target`.
    ConditionalPercentile { q: f64, target: f64 },
    /// P0(N <= horizon) equal to `prob`.
    RunLengthProbability { horizon: u64, prob: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignCriterion {
    pub kind: CriterionKind,
    /// Relative stopping tolerance on the attained value.
    pub tolerance: f64,
}

impl DesignCriterion {
    pub fn mean_arl0(target: f64) -> Self {
        DesignCriterion {
            kind: CriterionKind::MeanArl0 { target },
            tolerance: 0.02,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 0.25) {
            return Err(Error::invalid("criterion tolerance must lie in (0, 0.25)"));
        }
        let target_ok = match self.kind {
            CriterionKind::MeanArl0 { target } => target > 1.0,
            CriterionKind::ConditionalPercentile { q, target } => {
                q > 0.0 && q < 1.0 && target > 1.0
            }
            CriterionKind::RunLengthProbability { horizon, prob } => {
                horizon >= 1 && prob > 0.0 && prob < 1.0
            }
        };
        if !target_ok {
            return Err(Error::invalid("criterion target out of range"));
        }
        Ok(())
    }

    fn target(&self) -> f64 {
        match self.kind {
            CriterionKind::MeanArl0 { target } => target,
            CriterionKind::ConditionalPercentile { target, .. } => target,
            CriterionKind::RunLengthProbability { prob, .. } => prob,
        }
    }

    /// Attained value grows with the upper limit for ARL-like criteria and
    /// shrinks for the run-length probability.
    fn increasing(&self) -> bool {
        !matches!(self.kind, CriterionKind::RunLengthProbability { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStage {
    FalseAlarm,
    FixedReference,
    MonteCarlo,
}

/// One evaluated limit during the search, in the order evaluations happened.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub stage: SearchStage,
    pub step: usize,
    pub ucl: i64,
    pub lcl: Option<i64>,
    pub value: f64,
    pub smc: Option<f64>,
    pub perc5: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub limits: ChartLimits,
    pub attained: f64,
    pub trace: Vec<TraceEntry>,
    /// Number of Monte Carlo stage evaluations used.
    pub mc_iterations: usize,
}

impl DesignOutcome {
    /// Render the iteration trace in the classic three-block format.
    pub fn render_trace(&self) -> String {
        let mut out = String::new();
        let mut stage: Option<SearchStage> = None;
        for e in &self.trace {
            if stage != Some(e.stage) {
                let header = match e.stage {
                    SearchStage::FalseAlarm => "FA: 1/(false alarm rate) approximation",
                    SearchStage::FixedReference => "FR: Fixed reference sample approximation",
                    SearchStage::MonteCarlo => "LR approximation",
                };
                out.push_str(header);
                out.push('\n');
                stage = Some(e.stage);
            }
            out.push_str(&format!("{}. ucl={}", e.step, e.ucl));
            if let Some(lcl) = e.lcl {
                out.push_str(&format!(" lcl={lcl}"));
            }
            out.push_str(&format!(" ARL0={}", trim(e.value)));
            if let Some(smc) = e.smc {
                out.push_str(&format!(" smc={}", trim(smc)));
            }
            if let Some(p5) = e.perc5 {
                out.push_str(&format!(" 5% perc={}", trim(p5)));
            }
            if let Some(k) = e.k {
                out.push_str(&format!(" K={k}"));
            }
            out.push('\n');
        }
        out
    }
}

fn trim(v: f64) -> String {
    if v.is_infinite() {
        return "inf".to_string();
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn make_limits(m: usize, n: usize, ucl: i64, sided: Sidedness, target: f64) -> Result<ChartLimits> {
    ChartLimits::new(m, n, ucl, sided, target)
}

/// Null upper tail evaluator used by the seeding stage: exact when the
/// lattice fits the budget, Edgeworth beyond it.
enum NullTail {
    Exact(NullDistribution),
    Edgeworth { m: usize, n: usize },
}

impl NullTail {
    fn new(m: usize, n: usize) -> Result<NullTail> {
        if m * n <= DEFAULT_NULL_EXACT_BUDGET {
            Ok(NullTail::Exact(NullDistribution::new(m, n)?))
        } else {
            Ok(NullTail::Edgeworth { m, n })
        }
    }

    fn upper(&self, u: i64) -> f64 {
        match self {
            NullTail::Exact(d) => d.upper_tail(u),
            NullTail::Edgeworth { m, n } => null_upper_tail_edgeworth(*m, *n, u),
        }
    }
}

/// Search for integer limits meeting the criterion.
pub fn find_limits(
    m: usize,
    n: usize,
    criterion: DesignCriterion,
    sided: Sidedness,
    mc: &MonteCarloConfig,
) -> Result<DesignOutcome> {
    criterion.validate()?;
    mc.validate()?;
    if m < 2 {
        return Err(Error::invalid("design needs m >= 2"));
    }
    if n < 1 {
        return Err(Error::invalid("design needs n >= 1"));
    }
    let mn = (m * n) as i64;
    let u_min = mn / 2 + 1; // smallest ucl with 2*ucl > mn
    let target = criterion.target();

    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut step = 0usize;

    // ---- stage 1: invert the false alarm rate on the null distribution ----
    let null = NullTail::new(m, n)?;
    let p0_star = match criterion.kind {
        CriterionKind::MeanArl0 { target } => 1.0 / target,
        CriterionKind::ConditionalPercentile { target, .. } => 1.0 / target,
        CriterionKind::RunLengthProbability { horizon, prob } => {
            -f64::exp_m1(f64::ln_1p(-prob) / horizon as f64)
        }
    };
    let tail_star = match sided {
        Sidedness::TwoSided => p0_star / 2.0,
        Sidedness::UpperOneSided => p0_star,
    };
    // smallest u in [u_min, mn] with null upper tail <= tail_star
    let mut lo = u_min;
    let mut hi = mn;
    if null.upper(u_min) <= tail_star {
        hi = u_min;
    } else {
        while lo + 1 < hi {
            let mid = lo + (hi - lo) / 2;
            if null.upper(mid) <= tail_star {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let u_fa = hi;
    let fa_tail = null.upper(u_fa);
    let fa_p0 = match sided {
        Sidedness::TwoSided => 2.0 * fa_tail,
        Sidedness::UpperOneSided => fa_tail,
    };
    let fa_value = if fa_p0 > 0.0 {
        1.0 / fa_p0
    } else {
        f64::INFINITY
    };
    step += 1;
    trace.push(TraceEntry {
        stage: SearchStage::FalseAlarm,
        step,
        ucl: u_fa,
        lcl: matches!(sided, Sidedness::TwoSided).then(|| mn - u_fa),
        value: fa_value,
        smc: None,
        perc5: None,
        k: None,
    });

    // feasibility: the attainable range bottoms out at the narrowest limits
    let floor_limits = make_limits(m, n, u_min, sided, target)?;
    if criterion.increasing() {
        let floor = arl0_fixed_reference(m, n, &floor_limits)?;
        if target < floor {
            return Err(Error::Infeasible {
                target,
                max_attainable: floor,
            });
        }
    } else if let CriterionKind::RunLengthProbability { horizon, prob } = criterion.kind {
        let p0_floor = match sided {
            Sidedness::TwoSided => 2.0 * null.upper(u_min),
            Sidedness::UpperOneSided => null.upper(u_min),
        };
        let reachable = -f64::exp_m1(horizon as f64 * f64::ln_1p(-p0_floor.min(1.0)));
        if prob > reachable {
            return Err(Error::Infeasible {
                target: prob,
                max_attainable: reachable,
            });
        }
    }

    // ---- stage 2: bracket with the fixed reference sample approximation ----
    let fr_applies = m <= 500
        && matches!(
            criterion.kind,
            CriterionKind::MeanArl0 { .. } | CriterionKind::ConditionalPercentile { .. }
        );
    let mut guess = u_fa;
    let mut bracket_width: i64 = initial_step(&null, u_fa, tail_star, mn);
    if fr_applies {
        let fr_at = |u: i64, step: &mut usize, trace: &mut Vec<TraceEntry>| -> Result<f64> {
            let lims = make_limits(m, n, u, sided, target)?;
            let v = arl0_fixed_reference(m, n, &lims)?;
            *step += 1;
            trace.push(TraceEntry {
                stage: SearchStage::FixedReference,
                step: *step,
                ucl: u,
                lcl: lims.lcl,
                value: v,
                smc: None,
                perc5: None,
                k: None,
            });
            Ok(v)
        };
        let v0 = fr_at(u_fa, &mut step, &mut trace)?;
        let dir: i64 = if v0 < target { 1 } else { -1 };
        let mut prev_u = u_fa;
        let mut prev_v = v0;
        let mut stride = bracket_width.max(1);
        loop {
            let next_u = (prev_u + dir * stride).clamp(u_min, mn);
            if next_u == prev_u {
                break;
            }
            let v = fr_at(next_u, &mut step, &mut trace)?;
            if (v < target) != (prev_v < target) {
                // bracketed: hand over the endpoint closer to the target
                bracket_width = (next_u - prev_u).abs();
                guess = if (v - target).abs() <= (prev_v - target).abs() {
                    next_u
                } else {
                    prev_u
                };
                break;
            }
            prev_u = next_u;
            prev_v = v;
            stride *= 2;
        }
    }

    // ---- stage 3: Monte Carlo evaluator with linear interpolation ----
    let u01 = DistributionSpec::in_control(Family::Uniform01);
    let mut cache = CellCache::new(u01, u01, m, mc.seed);
    // the exact engine is free at n = 1 and the saddlepoint lattice is at its
    // coarsest there; everywhere else the saddlepoint engine is the fast one
    let tail_method = if n == 1 && (m + 1) <= DEFAULT_EXACT_CELL_BUDGET {
        TailMethod::Exact
    } else {
        TailMethod::Lr
    };
    let mut mc_eval = mc.clone();
    if let CriterionKind::ConditionalPercentile { q, .. } = criterion.kind {
        if !mc_eval.percentiles.iter().any(|&p| (p - q).abs() < 1e-12) {
            mc_eval.percentiles.push(q);
            mc_eval.percentiles.sort_by(f64::total_cmp);
        }
    }

    let evaluate = |u: i64,
                    step: &mut usize,
                    trace: &mut Vec<TraceEntry>,
                    cache: &mut CellCache|
     -> Result<(f64, Option<RunLengthSummary>)> {
        let lims = make_limits(m, n, u, sided, target)?;
        let (value, summary) = match criterion.kind {
            CriterionKind::MeanArl0 { .. } => {
                let s = arl_monte_carlo_cached(cache, &lims, tail_method, &mc_eval)?;
                (s.arl_estimate, Some(s))
            }
            CriterionKind::ConditionalPercentile { q, .. } => {
                let s = arl_monte_carlo_cached(cache, &lims, tail_method, &mc_eval)?;
                let v = s
                    .percentile(q)
                    .ok_or_else(|| Error::numeric("percentile missing"))?;
                (v, Some(s))
            }
            CriterionKind::RunLengthProbability { horizon, .. } => {
                let e = run_length_cdf_at(horizon, &u01, &u01, &lims, tail_method, &mc_eval)?;
                (e.probability, None)
            }
        };
        // a fixed-K configuration never "converges" in the adaptive sense;
        // only a genuinely exhausted adaptive budget is an error
        if let Some(s) = &summary {
            if !s.converged && mc_eval.k_initial < mc_eval.k_max {
                return Err(Error::NotConverged(format!(
                    "Monte Carlo error target not met at ucl={u} with K={}",
                    s.k_used
                )));
            }
        }
        *step += 1;
        trace.push(TraceEntry {
            stage: SearchStage::MonteCarlo,
            step: *step,
            ucl: u,
            lcl: lims.lcl,
            value,
            smc: summary.as_ref().map(|s| s.smc),
            perc5: summary.as_ref().and_then(|s| s.percentile(0.05)),
            k: summary.as_ref().map(|s| s.k_used),
        });
        Ok((value, summary))
    };

    let increasing = criterion.increasing();
    let tol = criterion.tolerance * target;
    let mut evaluated: Vec<(i64, f64, Option<RunLengthSummary>)> = Vec::new();
    let mut mc_iterations = 0usize;

    let mut u_current = guess;
    for round in 0..30 {
        let already = evaluated.iter().find(|(u, _, _)| *u == u_current).cloned();
        let (value, summary) = match already {
            Some((_, v, s)) => (v, s),
            None => {
                mc_iterations += 1;
                let (v, s) = evaluate(u_current, &mut step, &mut trace, &mut cache)?;
                evaluated.push((u_current, v, s.clone()));
                (v, s)
            }
        };

        if (value - target).abs() <= tol {
            let mut limits = make_limits(m, n, u_current, sided, target)?;
            limits.attained_arl0 = summary.as_ref().map(|s| s.arl_estimate);
            limits.attained_percentile_5 = summary.as_ref().and_then(|s| s.percentile(0.05));
            return Ok(DesignOutcome {
                limits,
                attained: value,
                trace,
                mc_iterations,
            });
        }

        // choose the next candidate
        let next = propose_next(
            &evaluated,
            target,
            increasing,
            bracket_width,
            u_min,
            mn,
            u_current,
            value,
        );
        match next {
            Some(u) if u != u_current => u_current = u,
            _ => {
                // lattice exhausted around the target: accept the closest
                let best = evaluated
                    .iter()
                    .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                    .cloned()
                    .expect("at least one evaluation");
                let mut limits = make_limits(m, n, best.0, sided, target)?;
                limits.attained_arl0 = best.2.as_ref().map(|s| s.arl_estimate);
                limits.attained_percentile_5 = best.2.as_ref().and_then(|s| s.percentile(0.05));
                return Ok(DesignOutcome {
                    limits,
                    attained: best.1,
                    trace,
                    mc_iterations,
                });
            }
        }
        let _ = round;
    }
    Err(Error::NotConverged(format!(
        "limit search did not settle after {mc_iterations} Monte Carlo evaluations"
    )))
}

/// Lattice distance over which the null tail moves the seeded value by about
/// 10%: the stride for the bracketing walks.
fn initial_step(null: &NullTail, u_fa: i64, tail_star: f64, mn: i64) -> i64 {
    let wider_tail = tail_star / 1.1;
    let mut u = u_fa;
    while u < mn && null.upper(u) > wider_tail {
        u += 1;
        if u - u_fa > 256 {
            break;
        }
    }
    (u - u_fa).max(1)
}

#[allow(clippy::too_many_arguments)]
fn propose_next(
    evaluated: &[(i64, f64, Option<RunLengthSummary>)],
    target: f64,
    increasing: bool,
    width: i64,
    u_min: i64,
    u_max: i64,
    u_current: i64,
    v_current: f64,
) -> Option<i64> {
    // closest evaluated points below and above the target by value
    let mut below: Option<(i64, f64)> = None;
    let mut above: Option<(i64, f64)> = None;
    for &(u, v, _) in evaluated {
        if v < target {
            if below.is_none_or(|(_, bv)| v > bv) {
                below = Some((u, v));
            }
        } else if above.is_none_or(|(_, av)| v < av) {
            above = Some((u, v));
        }
    }

    let proposal = match (below, above) {
        (Some((ub, vb)), Some((ua, va))) => {
            if (ua - ub).abs() <= 1 {
                // adjacent lattice points straddle the target
                return None;
            }
            if (va - vb).abs() < f64::EPSILON {
                (ub + ua) / 2
            } else {
                let frac = (target - vb) / (va - vb);
                let raw = ub as f64 + frac * (ua - ub) as f64;
                round_away_from_center(raw, u_min)
            }
        }
        _ => {
            // still one-sided: stride further
            let need_higher = (v_current < target) == increasing;
            let dir: i64 = if need_higher { 1 } else { -1 };
            u_current + dir * width.max(1)
        }
    };
    let clamped = proposal.clamp(u_min, u_max);
    if evaluated.iter().any(|&(u, _, _)| u == clamped) {
        // nudge toward unexplored territory next to the interpolant
        for delta in 1..=2i64 {
            for cand in [clamped + delta, clamped - delta] {
                let cand = cand.clamp(u_min, u_max);
                if !evaluated.iter().any(|&(u, _, _)| u == cand) {
                    // keep the nudge inside the straddle if one exists
                    if let (Some((ub, _)), Some((ua, _))) = (below, above) {
                        let (lo, hi) = if ub < ua { (ub, ua) } else { (ua, ub) };
                        if cand <= lo || cand >= hi {
                            continue;
                        }
                    }
                    return Some(cand);
                }
            }
        }
        return None;
    }
    Some(clamped)
}

/// Round to the nearest integer, ties away from the lattice center
/// (the wider chart is the conservative choice).
fn round_away_from_center(raw: f64, _u_min: i64) -> i64 {
    let floor = raw.floor();
    let frac = raw - floor;
    if (frac - 0.5).abs() < 1e-9 {
        floor as i64 + 1
    } else {
        raw.round() as i64
    }
}

/// Evaluate given limits by any of the five engines, reproducing a
/// methods-comparison table cell.
pub fn evaluate_limits(
    limits: &ChartLimits,
    mc: &MonteCarloConfig,
    method: ArlMethod,
) -> Result<RunLengthSummary> {
    match method {
        ArlMethod::Exact | ArlMethod::Lr | ArlMethod::Normal => {
            let u01 = DistributionSpec::in_control(Family::Uniform01);
            arl_monte_carlo(&u01, &u01, limits, method.tail_method().unwrap(), mc)
        }
        ArlMethod::FixedReference => {
            let v = arl0_fixed_reference(limits.m, limits.n, limits)?;
            Ok(RunLengthSummary::deterministic(v, method))
        }
        ArlMethod::FalseAlarm => {
            let v = arl0_false_alarm(limits.m, limits.n, limits)?;
            Ok(RunLengthSummary::deterministic(v, method))
        }
    }
}
