//! Distribution-free control charts built on the Mann-Whitney statistic.
//!
//! A phase-II chart compares each test sample against a phase-I reference
//! sample through the Mann-Whitney statistic and signals when it falls
//! strictly outside integer control limits. Because the in-control run-length
//! distribution is the same for every continuous process distribution, the
//! limits can be designed for a target in-control ARL without knowing the
//! process distribution at all.
//!
//! The crate provides:
//!
//! - the statistic and its conditional cell decomposition ([`mw_stat`]),
//! - conditional and null tail probabilities by exact expansion, saddlepoint
//!   approximation, normal approximation and Edgeworth correction
//!   ([`tail_prob`]),
//! - Monte Carlo run-length analysis with reproducible parallel streams
//!   ([`run_length`]),
//! - the staged control-limit search ([`chart_design`]),
//! - a Shewhart X-bar comparison harness with estimated parameters
//!   ([`shewhart`]),
//! - CSV ingestion, chart evaluation and SVG rendering ([`data`], [`chart`],
//!   [`render`]).
//!
//! ```
//! use mwchart::{
//!     find_limits, mann_whitney, DesignCriterion, MonteCarloConfig, ReferenceSample,
//!     Sidedness, TestSample, TiePolicy,
//! };
//!
//! // design two-sided limits for a modest in-control ARL
//! let criterion = DesignCriterion::mean_arl0(60.0).with_tolerance(0.05);
//! let mc = MonteCarloConfig::fixed_k(1, 400);
//! let design = find_limits(20, 5, criterion, Sidedness::TwoSided, &mc).unwrap();
//! let limits = &design.limits;
//! assert_eq!(limits.lcl.unwrap() + limits.ucl, 100);
//!
//! // monitor one test sample against a reference sample
//! let reference = ReferenceSample::new((1..=20).map(f64::from).collect()).unwrap();
//! let sample = TestSample::new(vec![4.0, 9.0, 12.0, 15.0, 18.0], 1).unwrap();
//! let statistic = mann_whitney(&reference, &sample, TiePolicy::Midrank);
//! let signal = statistic.value() > limits.ucl as f64
//!     || statistic.value() < limits.lcl.unwrap() as f64;
//! assert!(!signal);
//! ```

pub mod chart;
pub mod chart_design;
pub mod data;
pub mod distributions;
pub mod error;
pub mod mw_stat;
pub mod render;
pub mod rng;
pub mod run_length;
pub mod shewhart;
pub mod stats;
pub mod tail_prob;

pub use chart_design::{
    evaluate_limits, find_limits, ChartLimits, CriterionKind, DesignCriterion, DesignOutcome,
    Sidedness,
};
pub use distributions::{DistributionSpec, Family};
pub use error::{Error, Result};
pub use mw_stat::{
    cell_counts, cell_probabilities, mann_whitney, CellProbabilities, MwStatistic, ReferenceSample,
    TestSample, TiePolicy,
};
pub use run_length::{
    arl0_false_alarm, arl0_fixed_reference, arl_monte_carlo, conditional_arl, run_length_cdf_at,
    ArlMethod, ErrorTarget, MonteCarloConfig, RunLengthSummary,
};
pub use shewhart::{
    compare_charts, in_control_percentile_table, shewhart_conditional_arl, shewhart_constant,
    ComparisonReport, ShewhartLimits,
};
pub use tail_prob::TailMethod;
