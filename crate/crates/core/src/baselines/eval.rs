//! Cluster-quality metrics and label-agreement scores.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::grid::RainfallField;
use crate::matrix::Matrix;
use crate::patterns::{hamming_similarity, majority, CanonicalPatternSet};
use crate::sampler::self_transition_count;
use crate::stats::{hamming, mean, mean_std, pearson, squared_distance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Mean over clusters of the population std of member totals.
    pub std_yy: f64,
    /// Mean ℓ2 distance of each member series to its cluster's mean series.
    pub l2_theta: f64,
    /// Mean Hamming distance (count) of each member's binary series to its
    /// cluster's majority series.
    pub hamm_theta_d: f64,
    /// Adjacent equal labels, for day clusterings.
    pub self_transitions: Option<usize>,
}

/// Metrics over groups of real vectors with their binary counterparts.
fn group_metrics(real: &[Vec<f64>], binary: &[Vec<u8>], labels: &[usize], totals: &[f64]) -> (f64, f64, f64) {
    // groups in order of first appearance, so relabeling cannot reorder the sums
    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        let g = *slot.entry(l).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let dim = real.first().map_or(0, Vec::len);
    let mut stds = Vec::with_capacity(groups.len());
    let mut l2_sum = 0.0;
    let mut hamm_sum = 0usize;
    for members in &groups {
        let member_totals: Vec<f64> = members.iter().map(|&i| totals[i]).collect();
        stds.push(mean_std(&member_totals).map_or(0.0, |(_, sd)| sd));
        let mut centre = alloc::vec![0.0; dim];
        let mut ones = alloc::vec![0usize; dim];
        for &i in members {
            for d in 0..dim {
                centre[d] += real[i][d];
                ones[d] += usize::from(binary[i][d]);
            }
        }
        centre.iter_mut().for_each(|c| *c /= members.len() as f64);
        let mode: Vec<u8> = ones.iter().map(|&o| majority(o, members.len())).collect();
        for &i in members {
            l2_sum += libm::sqrt(squared_distance(&real[i], &centre));
            hamm_sum += hamming(&binary[i], &mode);
        }
    }
    let n = labels.len().max(1) as f64;
    (mean(&stds).unwrap_or(0.0), l2_sum / n, hamm_sum as f64 / n)
}

fn check_shapes(field: &RainfallField, z: &Matrix<u8>, labels: usize, expected: usize) -> Result<()> {
    if z.rows() != field.n_locations() || z.cols() != field.n_days() {
        return Err(Error::Dimension(format!(
            "z is {}x{}, field is {}x{}",
            z.rows(),
            z.cols(),
            field.n_locations(),
            field.n_days()
        )));
    }
    if labels != expected {
        return Err(Error::Dimension(format!("{labels} labels for {expected} items")));
    }
    Ok(())
}

/// Metrics of a clustering of locations, comparing each rainfall series
/// `x(s,·)` with its cluster's canonical series.
pub fn evaluate_temporal_clustering(field: &RainfallField, labels: &[usize], z: &Matrix<u8>) -> Result<EvalReport> {
    check_shapes(field, z, labels.len(), field.n_locations())?;
    let real = field.x().row_vecs();
    let binary = z.row_vecs();
    let totals: Vec<f64> = real.iter().map(|r| r.iter().sum()).collect();
    let (std_yy, l2_theta, hamm_theta_d) = group_metrics(&real, &binary, labels, &totals);
    Ok(EvalReport { std_yy, l2_theta, hamm_theta_d, self_transitions: None })
}

/// Metrics of a clustering of days, comparing each daily map `x(·,t)` with
/// its cluster's canonical pattern; the dispersion term uses the daily
/// aggregates `Y(t)`.
pub fn evaluate_daily_clustering(field: &RainfallField, labels: &[usize], z: &Matrix<u8>) -> Result<EvalReport> {
    check_shapes(field, z, labels.len(), field.n_days())?;
    let real = field.x().column_vecs();
    let binary = z.column_vecs();
    let totals = field.daily_aggregate();
    let (std_yy, l2_theta, hamm_theta_d) = group_metrics(&real, &binary, labels, &totals);
    let self_transitions = Some(self_transition_count(labels, field.calendar(), false));
    Ok(EvalReport { std_yy, l2_theta, hamm_theta_d, self_transitions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilaritySeries {
    /// Similarity of `z(·,t)` to the CDP of `u(t)`.
    pub per_day: Vec<f64>,
    pub per_year: Vec<(i32, f64)>,
    pub mean: f64,
    /// Pearson correlation of `per_day` with `Y(t)`; `None` when either is constant.
    pub correlation_with_aggregate: Option<f64>,
}

pub fn hamming_similarity_series(
    field: &RainfallField,
    z: &Matrix<u8>,
    labels: &[usize],
    set: &CanonicalPatternSet,
) -> Result<SimilaritySeries> {
    check_shapes(field, z, labels.len(), field.n_days())?;
    let cal = field.calendar();
    let mut per_day = Vec::with_capacity(labels.len());
    for (t, &l) in labels.iter().enumerate() {
        let pos = set.position(l).ok_or_else(|| Error::Dimension(format!("day {t} has label {l} without a pattern")))?;
        per_day.push(hamming_similarity(&z.column(t), &set.cdp[pos]));
    }
    let per_year = cal
        .years()
        .iter()
        .enumerate()
        .map(|(yi, &year)| {
            let days: Vec<f64> = (0..labels.len()).filter(|&t| cal.year_index(t) == yi).map(|t| per_day[t]).collect();
            (year, mean(&days).unwrap_or(f64::NAN))
        })
        .collect();
    let y = field.daily_aggregate();
    Ok(SimilaritySeries {
        mean: mean(&per_day).unwrap_or(f64::NAN),
        correlation_with_aggregate: pearson(&per_day, &y),
        per_day,
        per_year,
    })
}

/// Adjusted Rand index of two labelings of the same items.
///
/// Returns 1 when both labelings are trivially identical partitions (all
/// items in one cluster, or every item alone), where the index is 0/0.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("labelings have {} and {} items", a.len(), b.len())));
    }
    let pairs = |n: usize| (n * n.saturating_sub(1) / 2) as f64;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&n| pairs(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| pairs(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(a.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
