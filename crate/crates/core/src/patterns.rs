//! Canonical spatial patterns of day clusters and canonical series of
//! location clusters.
//!
//! For a day cluster `u`, the canonical rainfall pattern (CRP) is the
//! per-location mean of `x` over the cluster's days and the canonical
//! discretized pattern (CDP) the per-location majority of `z`. Location
//! clusters get the mirror-image canonical time series (CTS) and canonical
//! discretized series (CDS). Majority ties resolve to wet.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::grid::{CalendarIndex, RainfallField};
use crate::model::LatentState;
use crate::stats::{self, hamming, squared_distance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPatternSet {
    /// Non-empty day-cluster labels, ascending. All other vectors are
    /// indexed by position in this list.
    pub labels: Vec<usize>,
    pub crp: Vec<Vec<f64>>,
    pub cdp: Vec<Vec<u8>>,
    pub cluster_days: Vec<Vec<usize>>,
    /// Mean daily aggregate `Y` over the cluster's days.
    pub mu_k: Vec<f64>,
    /// Fraction of wet entries in the CDP.
    pub wet_fraction: Vec<f64>,
    pub prominent: Vec<bool>,
    /// Positions sorted by `Σ_s crp` ascending (stable).
    pub order: Vec<usize>,
    pub family: Vec<Option<u8>>,
    /// Labels that had no days and were left out.
    pub empty_labels: Vec<usize>,
}

impl CanonicalPatternSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: usize) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    /// `Σ_s crp` of the pattern at `pos`.
    pub fn aggregate(&self, pos: usize) -> f64 {
        self.crp[pos].iter().sum()
    }

    /// Rank (0 = driest) of the pattern at `pos` in [`Self::order`].
    pub fn order_rank(&self, pos: usize) -> usize {
        self.order.iter().position(|&p| p == pos).expect("order is a permutation")
    }

    pub fn prominent_labels(&self) -> Vec<usize> {
        self.labels.iter().zip(&self.prominent).filter(|(_, &p)| p).map(|(&l, _)| l).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalPatternSet {
    pub labels: Vec<usize>,
    pub cts: Vec<Vec<f64>>,
    pub cds: Vec<Vec<u8>>,
    pub cluster_locations: Vec<Vec<usize>>,
    pub sizes: Vec<usize>,
    pub empty_labels: Vec<usize>,
}

impl TemporalPatternSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn position(&self, label: usize) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }
}

fn group(labels: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>, Vec<usize>) {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members = alloc::vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut present = Vec::new();
    let mut groups = Vec::new();
    let mut empty = Vec::new();
    for (l, m) in members.into_iter().enumerate() {
        if m.is_empty() {
            empty.push(l);
        } else {
            present.push(l);
            groups.push(m);
        }
    }
    (present, groups, empty)
}

/// Majority vote with ties resolved to 1.
pub(crate) fn majority(ones: usize, n: usize) -> u8 {
    u8::from(2 * ones >= n)
}

/// CRP/CDP and per-cluster statistics of the day labels in `state.u`.
/// Flags start all-false; see [`prominence`] and [`assign_families`].
pub fn extract_spatial(field: &RainfallField, state: &LatentState) -> CanonicalPatternSet {
    let x = field.x();
    let y = field.daily_aggregate();
    let n_loc = field.n_locations();
    let (labels, cluster_days, empty_labels) = group(&state.u);
    let mut crp = Vec::with_capacity(labels.len());
    let mut cdp = Vec::with_capacity(labels.len());
    let mut mu_k = Vec::with_capacity(labels.len());
    let mut wet_fraction = Vec::with_capacity(labels.len());
    for days in &cluster_days {
        let n = days.len();
        let mean: Vec<f64> = (0..n_loc).map(|s| days.iter().map(|&t| x.get(s, t)).sum::<f64>() / n as f64).collect();
        let mode: Vec<u8> = (0..n_loc)
            .map(|s| majority(days.iter().filter(|&&t| state.z.get(s, t) == 1).count(), n))
            .collect();
        mu_k.push(days.iter().map(|&t| y[t]).sum::<f64>() / n as f64);
        wet_fraction.push(if n_loc == 0 { 0.0 } else { mode.iter().map(|&b| f64::from(b)).sum::<f64>() / n_loc as f64 });
        crp.push(mean);
        cdp.push(mode);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let totals: Vec<f64> = crp.iter().map(|c| c.iter().sum()).collect();
    order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]));
    let k = labels.len();
    CanonicalPatternSet {
        labels,
        crp,
        cdp,
        cluster_days,
        mu_k,
        wet_fraction,
        prominent: alloc::vec![false; k],
        order,
        family: alloc::vec![None; k],
        empty_labels,
    }
}

/// CTS/CDS of the location labels in `state.v`.
pub fn extract_temporal(field: &RainfallField, state: &LatentState) -> TemporalPatternSet {
    let x = field.x();
    let n_days = field.n_days();
    let (labels, cluster_locations, empty_labels) = group(&state.v);
    let mut cts = Vec::with_capacity(labels.len());
    let mut cds = Vec::with_capacity(labels.len());
    for locs in &cluster_locations {
        let n = locs.len();
        let mut sum = alloc::vec![0.0; n_days];
        let mut wet = alloc::vec![0usize; n_days];
        for &s in locs {
            for t in 0..n_days {
                sum[t] += x.get(s, t);
                wet[t] += usize::from(state.z.get(s, t));
            }
        }
        cts.push(sum.iter().map(|v| v / n as f64).collect());
        cds.push(wet.iter().map(|&w| majority(w, n)).collect());
    }
    let sizes = cluster_locations.iter().map(Vec::len).collect();
    TemporalPatternSet { labels, cts, cds, cluster_locations, sizes, empty_labels }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProminenceRule {
    /// Present in at least `ceil(5·n_years/8)` years.
    FiveOfEight,
    /// Present in at least `ceil(4·n_years/8)` years.
    FourOfEight,
    MinYears(usize),
}

impl ProminenceRule {
    pub fn min_years(&self, n_years: usize) -> usize {
        match *self {
            ProminenceRule::FiveOfEight => (5 * n_years).div_ceil(8),
            ProminenceRule::FourOfEight => (4 * n_years).div_ceil(8),
            ProminenceRule::MinYears(m) => m,
        }
    }
}

/// Marks a pattern prominent iff its days fall in at least `min_years`
/// distinct years.
pub fn prominence(set: &mut CanonicalPatternSet, calendar: &CalendarIndex, min_years: usize) -> Result<()> {
    if min_years > calendar.n_years() {
        return Err(Error::InvalidParameter(alloc::format!(
            "min_years = {min_years} exceeds the {} years present",
            calendar.n_years()
        )));
    }
    for (flag, days) in set.prominent.iter_mut().zip(&set.cluster_days) {
        let mut years: Vec<usize> = days.iter().map(|&t| calendar.year_index(t)).collect();
        years.dedup();
        *flag = years.len() >= min_years;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRule {
    /// Prominent patterns whose wet fraction is at or below this quantile of
    /// the prominent wet fractions form family 1.
    pub low_quantile: f64,
    /// Explicit `label → family` tags; these win over the rule.
    pub overrides: BTreeMap<usize, u8>,
}

impl Default for FamilyRule {
    fn default() -> Self {
        Self { low_quantile: 0.3, overrides: BTreeMap::new() }
    }
}

/// Tags prominent patterns with families 1 (dry), 2 (north-wet) or 3
/// (monsoon-zone-wet). Non-prominent patterns get `None`.
pub fn assign_families(
    set: &mut CanonicalPatternSet,
    monsoon_zone_mask: Option<&[bool]>,
    north_mask: Option<&[bool]>,
    rule: &FamilyRule,
) -> Result<Vec<Option<u8>>> {
    let n_loc = set.cdp.first().map_or(0, Vec::len);
    for mask in [monsoon_zone_mask, north_mask].into_iter().flatten() {
        if mask.len() != n_loc {
            return Err(Error::Dimension(alloc::format!("mask has {} entries for {n_loc} locations", mask.len())));
        }
    }
    if let Some(&f) = rule.overrides.values().find(|&&f| !(1..=3).contains(&f)) {
        return Err(Error::InvalidParameter(alloc::format!("family override {f} not in 1..=3")));
    }
    let prominent_wet: Vec<f64> =
        set.wet_fraction.iter().zip(&set.prominent).filter(|(_, &p)| p).map(|(&w, _)| w).collect();
    let threshold = stats::quantile(&prominent_wet, rule.low_quantile).unwrap_or(0.0);
    let mask_mean = |cdp: &[u8], mask: &[bool]| {
        let (sum, n) = cdp
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, n), (&c, _)| (s + f64::from(c), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let mut families = alloc::vec![None; set.len()];
    for pos in 0..set.len() {
        if !set.prominent[pos] {
            continue;
        }
        let label = set.labels[pos];
        families[pos] = Some(if let Some(&f) = rule.overrides.get(&label) {
            f
        } else if set.wet_fraction[pos] <= threshold {
            1
        } else {
            match (monsoon_zone_mask, north_mask) {
                (Some(monsoon), Some(north)) => {
                    if mask_mean(&set.cdp[pos], monsoon) >= mask_mean(&set.cdp[pos], north) {
                        3
                    } else {
                        2
                    }
                }
                _ => return Err(Error::MissingMasks(label)),
            }
        });
    }
    set.family = families.clone();
    Ok(families)
}

/// Mean number of days per season in June, July, August, September for
/// every pattern.
pub fn monthly_distribution(set: &CanonicalPatternSet, calendar: &CalendarIndex) -> Vec<[f64; 4]> {
    let n_years = calendar.n_years().max(1) as f64;
    set.cluster_days
        .iter()
        .map(|days| {
            let mut counts = [0.0; 4];
            for &t in days {
                counts[usize::from(calendar.month(t) - 6)] += 1.0;
            }
            counts.map(|c| c / n_years)
        })
        .collect()
}

/// `1 − Hamming(a, b)/n`.
pub fn hamming_similarity(a: &[u8], b: &[u8]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    1.0 - hamming(a, b) as f64 / a.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayMatch {
    /// Label whose CRP is nearest in ℓ2.
    pub crp_label: usize,
    /// Label whose CDP is nearest in Hamming distance.
    pub cdp_label: usize,
    pub hamming_similarity: f64,
}

/// Nearest canonical patterns of one day; ties go to the lower label.
pub fn match_day(x_col: &[f64], z_col: &[u8], set: &CanonicalPatternSet) -> Result<DayMatch> {
    if set.is_empty() {
        return Err(Error::InvalidParameter("pattern set is empty".into()));
    }
    let n_loc = set.cdp[0].len();
    if x_col.len() != n_loc || z_col.len() != n_loc {
        return Err(Error::Dimension(alloc::format!(
            "day vectors have {} and {} entries, patterns have {n_loc}",
            x_col.len(),
            z_col.len()
        )));
    }
    let mut best_crp = (0, f64::INFINITY);
    let mut best_cdp = (0, usize::MAX);
    for pos in 0..set.len() {
        let d = squared_distance(x_col, &set.crp[pos]);
        if d < best_crp.1 {
            best_crp = (pos, d);
        }
        let h = hamming(z_col, &set.cdp[pos]);
        if h < best_cdp.1 {
            best_cdp = (pos, h);
        }
    }
    Ok(DayMatch {
        crp_label: set.labels[best_crp.0],
        cdp_label: set.labels[best_cdp.0],
        hamming_similarity: 1.0 - best_cdp.1 as f64 / n_loc.max(1) as f64,
    })
}
