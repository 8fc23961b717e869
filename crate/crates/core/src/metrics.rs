//! Beam-index discrepancy and empirical CDF summaries.

use alloc::vec::Vec;

use thiserror::Error;

use crate::feedback::BeamSelection;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("beam discrepancy needs two top-4 selections, got {baseline} and {target}")]
    NotTopFour { baseline: usize, target: usize },
    #[error("empty sample")]
    Empty,
}

/// Discrepancy between two top-4 selections.
///
/// `rank` sums absolute differences of the ascending-sorted indices; `set`
/// counts target beams missing from the baseline selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamDiscrepancy {
    pub rank: u32,
    pub set: u32,
}

pub fn beam_discrepancy(
    baseline: &BeamSelection,
    target: &BeamSelection,
) -> Result<BeamDiscrepancy, MetricsError> {
    if baseline.len() != 4 || target.len() != 4 {
        return Err(MetricsError::NotTopFour {
            baseline: baseline.len(),
            target: target.len(),
        });
    }
    let b = baseline.sorted();
    let t = target.sorted();
    let rank = b
        .iter()
        .zip(&t)
        .map(|(x, y)| x.abs_diff(*y) as u32)
        .sum();
    let common = t.iter().filter(|i| b.contains(i)).count() as u32;
    Ok(BeamDiscrepancy {
        rank,
        set: 4 - common,
    })
}

pub const CDF_POINTS: usize = 200;

/// Empirical CDF `F(x) = #{v ≤ x}/n` at 200 evenly spaced points on `[0, 1]`.
pub fn cdf(values: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok((0..CDF_POINTS)
        .map(|i| {
            let x = i as f64 / (CDF_POINTS - 1) as f64;
            let count = sorted.partition_point(|v| *v <= x);
            (x, count as f64 / n)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
}

/// Linear-interpolation quantile on sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize(values: &[f64]) -> Result<Summary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        median: quantile_sorted(&sorted, 0.5),
        p10: quantile_sorted(&sorted, 0.1),
    })
}
