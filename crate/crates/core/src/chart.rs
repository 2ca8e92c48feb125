//! Phase-II chart evaluation: one record per test sample.

use crate::chart_design::ChartLimits;
use crate::error::{Error, Result};
use crate::mw_stat::{mann_whitney, MwStatistic, ReferenceSample, TestSample, TiePolicy};

/// One plotted point. The signal rule is strict: a statistic exactly on a
/// control limit does not signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChartRecord {
    pub sample_index: usize,
    pub statistic: MwStatistic,
    pub signal: bool,
}

/// Compute the charting statistic and signal flag for every test sample.
/// Comparisons run on the doubled lattice, so half-integer statistics from
/// midrank ties are compared exactly.
pub fn run_chart(
    reference: &ReferenceSample,
    tests: &[TestSample],
    limits: &ChartLimits,
    tie: TiePolicy,
) -> Result<Vec<ChartRecord>> {
    if reference.m() != limits.m {
        return Err(Error::invalid(format!(
            "reference sample has m={}, limits designed for m={}",
            reference.m(),
            limits.m
        )));
    }
    tests
        .iter()
        .map(|y| {
            if y.n() != limits.n {
                return Err(Error::invalid(format!(
                    "test sample {} has n={}, limits designed for n={}",
                    y.index(),
                    y.n(),
                    limits.n
                )));
            }
            let statistic = mann_whitney(reference, y, tie);
            let doubled = statistic.doubled();
            let above = doubled > 2 * limits.ucl as u64;
            let below = match limits.lcl {
                Some(lcl) => (doubled as i64) < 2 * lcl,
                None => false,
            };
            Ok(ChartRecord {
                sample_index: y.index(),
                statistic,
                signal: above || below,
            })
        })
        .collect()
}
