//! Active/break spells of the all-India aggregate and wet/dry spells at grid
//! and regional scale.
//!
//! A spell is a maximal run of qualifying days inside one season with at
//! least `min_run` days.

use alloc::vec::Vec;
use core::ops::Range;

use crate::grid::{CalendarIndex, GridGeometry, RainfallField};
use crate::matrix::Matrix;
use crate::patterns::TemporalPatternSet;
use crate::stats;
use crate::{Error, Result};

/// Minimum run length of all-India active and break spells.
pub const ALL_INDIA_MIN_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpellKind {
    Active,
    Break,
    Wet,
    Dry,
}

impl SpellKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpellKind::Active => "active",
            SpellKind::Break => "break",
            SpellKind::Wet => "wet",
            SpellKind::Dry => "dry",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpellScale {
    AllIndia,
    Region(usize),
    Grid(usize),
}

/// Inclusive day-index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spell {
    pub start: usize,
    pub end: usize,
}

impl Spell {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpellSet {
    pub kind: SpellKind,
    pub scale: SpellScale,
    /// Qualifying days, ascending (including those in runs shorter than `min_run`).
    pub days: Vec<usize>,
    pub spells: Vec<Spell>,
}

impl SpellSet {
    fn from_mask(kind: SpellKind, scale: SpellScale, mask: &[bool], segments: &[Range<usize>], min_run: usize) -> Self {
        let days = (0..mask.len()).filter(|&t| mask[t]).collect();
        let spells = runs(mask, segments)
            .into_iter()
            .filter(|(value, spell)| *value && spell.len() >= min_run.max(1))
            .map(|(_, spell)| spell)
            .collect();
        Self { kind, scale, days, spells }
    }

    pub fn mean_length(&self) -> Option<f64> {
        if self.spells.is_empty() {
            None
        } else {
            Some(self.spells.iter().map(Spell::len).sum::<usize>() as f64 / self.spells.len() as f64)
        }
    }

    pub fn contains(&self, t: usize) -> bool {
        self.days.binary_search(&t).is_ok()
    }
}

/// Maximal runs of equal values inside each segment, in order.
pub fn runs<T: PartialEq + Copy>(values: &[T], segments: &[Range<usize>]) -> Vec<(T, Spell)> {
    let mut out = Vec::new();
    for seg in segments {
        let mut start = seg.start;
        for t in seg.clone() {
            if t + 1 == seg.end || values[t + 1] != values[t] {
                out.push((values[t], Spell { start, end: t }));
                start = t + 1;
            }
        }
    }
    out
}

fn segments(calendar: &CalendarIndex, span_seasons: bool) -> Vec<Range<usize>> {
    if span_seasons {
        if calendar.is_empty() {
            Vec::new()
        } else {
            alloc::vec![0..calendar.len()]
        }
    } else {
        calendar.seasons().to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveBreak {
    pub active: SpellSet,
    pub brk: SpellSet,
    /// Mean of `Y` over the full period.
    pub mu: f64,
    /// Population standard deviation of `Y` over the full period.
    pub sigma: f64,
    /// Cluster labels flagged active / break (cluster definition only).
    pub active_clusters: Vec<usize>,
    pub break_clusters: Vec<usize>,
}

/// Threshold definition: active days have `Y(t) ≥ μ+σ`, break days `Y(t) < μ−σ`.
///
/// A constant series (`σ = 0`) has neither.
pub fn act_brk_threshold(y: &[f64], calendar: &CalendarIndex, min_run: usize) -> ActiveBreak {
    let (mu, sigma) = stats::mean_std(y).unwrap_or((0.0, 0.0));
    let degenerate = sigma == 0.0;
    let active: Vec<bool> = y.iter().map(|&v| !degenerate && v >= mu + sigma).collect();
    let brk: Vec<bool> = y.iter().map(|&v| !degenerate && v < mu - sigma).collect();
    let segs = calendar.seasons();
    ActiveBreak {
        active: SpellSet::from_mask(SpellKind::Active, SpellScale::AllIndia, &active, segs, min_run),
        brk: SpellSet::from_mask(SpellKind::Break, SpellScale::AllIndia, &brk, segs, min_run),
        mu,
        sigma,
        active_clusters: Vec::new(),
        break_clusters: Vec::new(),
    }
}

/// Cluster definition: a day is active (break) when its label is an active
/// cluster, `μ_k ≥ μ_Y+σ_Y` (break cluster, `μ_k ≤ μ_Y−σ_Y`). `cluster_means`
/// lists `(label, μ_k)` for the candidate (prominent) clusters.
pub fn act_brk_cluster(
    u: &[usize],
    cluster_means: &[(usize, f64)],
    y: &[f64],
    calendar: &CalendarIndex,
    min_run: usize,
) -> ActiveBreak {
    let (mu, sigma) = stats::mean_std(y).unwrap_or((0.0, 0.0));
    let degenerate = sigma == 0.0;
    let active_clusters: Vec<usize> =
        cluster_means.iter().filter(|(_, m)| !degenerate && *m >= mu + sigma).map(|(l, _)| *l).collect();
    let break_clusters: Vec<usize> =
        cluster_means.iter().filter(|(_, m)| !degenerate && *m <= mu - sigma).map(|(l, _)| *l).collect();
    let active: Vec<bool> = u.iter().map(|l| active_clusters.contains(l)).collect();
    let brk: Vec<bool> = u.iter().map(|l| break_clusters.contains(l)).collect();
    let segs = calendar.seasons();
    ActiveBreak {
        active: SpellSet::from_mask(SpellKind::Active, SpellScale::AllIndia, &active, segs, min_run),
        brk: SpellSet::from_mask(SpellKind::Break, SpellScale::AllIndia, &brk, segs, min_run),
        mu,
        sigma,
        active_clusters,
        break_clusters,
    }
}

/// Side-by-side statistics of two day sets at the same scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SpellComparison {
    pub size_a: usize,
    pub size_b: usize,
    pub intersection: usize,
    /// Mean of `Y(t)/S` over the set's days (mm/day/grid).
    pub mean_rain_a: Option<f64>,
    pub mean_rain_b: Option<f64>,
    /// Mean number of locations with `x(s,t)` above their local mean.
    pub above_mean_a: Option<f64>,
    pub above_mean_b: Option<f64>,
    pub spells_a: usize,
    pub spells_b: usize,
    pub mean_length_a: Option<f64>,
    pub mean_length_b: Option<f64>,
}

pub fn compare_spells(a: &SpellSet, b: &SpellSet, field: &RainfallField) -> Result<SpellComparison> {
    if a.scale != b.scale {
        return Err(Error::ScaleMismatch);
    }
    let y = field.daily_aggregate();
    let n_loc = field.n_locations().max(1) as f64;
    let local = field.local_means();
    let x = field.x();
    let above: Vec<usize> =
        (0..field.n_days()).map(|t| (0..field.n_locations()).filter(|&s| x.get(s, t) > local[s]).count()).collect();
    let mean_over = |days: &[usize], f: &dyn Fn(usize) -> f64| {
        if days.is_empty() {
            None
        } else {
            Some(days.iter().map(|&t| f(t)).sum::<f64>() / days.len() as f64)
        }
    };
    let intersection = a.days.iter().filter(|t| b.contains(**t)).count();
    Ok(SpellComparison {
        size_a: a.days.len(),
        size_b: b.days.len(),
        intersection,
        mean_rain_a: mean_over(&a.days, &|t| y[t] / n_loc),
        mean_rain_b: mean_over(&b.days, &|t| y[t] / n_loc),
        above_mean_a: mean_over(&a.days, &|t| above[t] as f64),
        above_mean_b: mean_over(&b.days, &|t| above[t] as f64),
        spells_a: a.spells.len(),
        spells_b: b.spells.len(),
        mean_length_a: a.mean_length(),
        mean_length_b: b.mean_length(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WetDrySpells {
    pub wet: SpellSet,
    pub dry: SpellSet,
}

impl WetDrySpells {
    fn from_series(series: &[u8], scale: SpellScale, segs: &[Range<usize>], min_run: usize) -> Self {
        let wet: Vec<bool> = series.iter().map(|&b| b == 1).collect();
        let dry: Vec<bool> = wet.iter().map(|w| !w).collect();
        Self {
            wet: SpellSet::from_mask(SpellKind::Wet, scale, &wet, segs, min_run),
            dry: SpellSet::from_mask(SpellKind::Dry, scale, &dry, segs, min_run),
        }
    }
}

/// Grid-scale wet/dry spells of each location's row of `z`.
///
/// `span_seasons` treats the whole record as one run (off by default in the CLI).
pub fn local_spells(z: &Matrix<u8>, calendar: &CalendarIndex, min_run: usize, span_seasons: bool) -> Vec<WetDrySpells> {
    let segs = segments(calendar, span_seasons);
    (0..z.rows()).map(|s| WetDrySpells::from_series(z.row(s), SpellScale::Grid(s), &segs, min_run)).collect()
}

/// Wet/dry spells of each region's canonical discretized series.
pub fn regional_spells(temporal: &TemporalPatternSet, calendar: &CalendarIndex, span_seasons: bool) -> Vec<WetDrySpells> {
    let segs = segments(calendar, span_seasons);
    temporal
        .labels
        .iter()
        .zip(&temporal.cds)
        .map(|(&label, cds)| WetDrySpells::from_series(cds, SpellScale::Region(label), &segs, 1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    /// Fraction of (day, neighbour pair) with equal states.
    pub neighbor_agreement: Option<f64>,
    /// Fraction of (location, consecutive day pair) with equal states.
    pub day_persistence: Option<f64>,
}

pub fn coherence_stats(z: &Matrix<u8>, geometry: &GridGeometry, calendar: &CalendarIndex) -> Coherence {
    let mut agree = 0usize;
    let mut pairs = 0usize;
    for (a, b) in geometry.edges() {
        agree += z.row(a).iter().zip(z.row(b)).filter(|(p, q)| p == q).count();
        pairs += z.cols();
    }
    let mut same = 0usize;
    let mut steps = 0usize;
    for t in 0..z.cols().saturating_sub(1) {
        if calendar.is_consecutive(t) {
            for s in 0..z.rows() {
                steps += 1;
                same += usize::from(z.get(s, t) == z.get(s, t + 1));
            }
        }
    }
    let frac = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
    Coherence { neighbor_agreement: frac(agree, pairs), day_persistence: frac(same, steps) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `x(s,t) > μ_s`, the location's mean over the record.
    LocalMean,
    /// `x(s,t) > c` mm/day.
    Fixed(f64),
}

pub fn threshold_discretize(field: &RainfallField, mode: Threshold) -> Result<Matrix<u8>> {
    let x = field.x();
    let thresholds = match mode {
        Threshold::LocalMean => field.local_means(),
        Threshold::Fixed(c) => {
            if !(c >= 0.0) {
                return Err(Error::InvalidParameter(alloc::format!("threshold must be >= 0, got {c}")));
            }
            alloc::vec![c; field.n_locations()]
        }
    };
    let mut z = Matrix::filled(x.rows(), x.cols(), 0u8);
    for s in 0..x.rows() {
        for t in 0..x.cols() {
            z.set(s, t, u8::from(x.get(s, t) > thresholds[s]));
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CalendarDay;
    use alloc::vec;

    fn one_season(n: usize) -> CalendarIndex {
        CalendarIndex::from_days((0..n).map(|d| CalendarDay { year: 2000, day_of_season: d as u16 }).collect()).unwrap()
    }

    fn field(x: Vec<Vec<f64>>) -> RainfallField {
        let coords: Vec<(f64, f64)> = (0..x.len()).map(|i| (0.0, i as f64)).collect();
        RainfallField::new(
            GridGeometry::from_coordinates(&coords).unwrap(),
            one_season(x[0].len()),
            Matrix::from_rows(&x).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn threshold_example() {
        let y = [1.0, 1.0, 9.0, 9.0, 9.0, 1.0, 1.0, 1.0];
        let r = act_brk_threshold(&y, &one_season(8), 3);
        assert_eq!(r.mu, 4.0);
        assert!((r.sigma - libm::sqrt(15.0)).abs() < 1e-12);
        assert_eq!(r.active.days, vec![2, 3, 4]);
        assert_eq!(r.active.spells, vec![Spell { start: 2, end: 4 }]);
        assert!(r.brk.days.is_empty());
    }

    #[test]
    fn constant_series_has_no_spells() {
        let r = act_brk_threshold(&[5.0; 10], &one_season(10), 3);
        assert!(r.active.days.is_empty() && r.brk.days.is_empty());
    }

    #[test]
    fn short_runs_are_days_but_not_spells() {
        let y = [0.0, 10.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let r = act_brk_threshold(&y, &one_season(8), 3);
        assert_eq!(r.active.days, vec![1, 2]);
        assert!(r.active.spells.is_empty());
    }

    #[test]
    fn spells_stop_at_season_boundaries() {
        let cal = CalendarIndex::full_seasons(2000, 2);
        let mut y = vec![0.0; 244];
        for v in &mut y[120..124] {
            *v = 100.0;
        }
        let r = act_brk_threshold(&y, &cal, 3);
        assert_eq!(r.active.days.len(), 4);
        // two runs of two days, split by the season boundary
        assert!(r.active.spells.is_empty());
        let r = act_brk_threshold(&y, &cal, 2);
        assert_eq!(r.active.spells, vec![Spell { start: 120, end: 121 }, Spell { start: 122, end: 123 }]);
    }

    #[test]
    fn cluster_definition_boundaries() {
        let y = [1.0, 1.0, 9.0, 9.0, 9.0, 1.0, 1.0, 1.0];
        let cal = one_season(8);
        let (mu, sigma) = stats::mean_std(&y).unwrap();
        let u = [0, 0, 1, 1, 1, 0, 0, 0];
        let r = act_brk_cluster(&u, &[(0, 1.0), (1, mu + sigma)], &y, &cal, 3);
        assert_eq!(r.active_clusters, vec![1]);
        assert_eq!(r.active.spells, vec![Spell { start: 2, end: 4 }]);
        let r = act_brk_cluster(&u, &[(0, mu), (1, mu)], &y, &cal, 3);
        assert!(r.active.days.is_empty() && r.brk.days.is_empty());

        let season = CalendarIndex::full_seasons(2000, 1);
        let yy: Vec<f64> = (0..122).map(|t| t as f64).collect();
        let r = act_brk_cluster(&[4; 122], &[(4, 1e6)], &yy, &season, 3);
        assert_eq!(r.active.spells, vec![Spell { start: 0, end: 121 }]);
    }

    #[test]
    fn comparison_statistics() {
        // S = 357 locations, day 0 aggregate 3570
        let x = vec![vec![10.0, 0.0]; 357];
        let f = field(x);
        let a = SpellSet { kind: SpellKind::Active, scale: SpellScale::AllIndia, days: vec![0], spells: vec![] };
        let c = compare_spells(&a, &a, &f).unwrap();
        assert_eq!(c.intersection, 1);
        assert_eq!(c.mean_rain_a, Some(10.0));
        assert_eq!(c.mean_rain_a, c.mean_rain_b);
        assert_eq!(c.above_mean_a, Some(357.0));
        let b = SpellSet { days: vec![1], ..a.clone() };
        assert_eq!(compare_spells(&a, &b, &f).unwrap().intersection, 0);
        let g = SpellSet { scale: SpellScale::Grid(0), ..a.clone() };
        assert_eq!(compare_spells(&a, &g, &f), Err(Error::ScaleMismatch));
    }

    #[test]
    fn local_run_scan() {
        let z = Matrix::from_rows(&[vec![1, 1, 0, 0, 0, 1]]).unwrap();
        let r = &local_spells(&z, &one_season(6), 1, false)[0];
        let wet: Vec<usize> = r.wet.spells.iter().map(Spell::len).collect();
        let dry: Vec<usize> = r.dry.spells.iter().map(Spell::len).collect();
        assert_eq!(wet, vec![2, 1]);
        assert_eq!(dry, vec![3]);
        assert_eq!(r.wet.mean_length(), Some(1.5));
        assert_eq!(r.dry.mean_length(), Some(3.0));
    }

    #[test]
    fn all_wet_and_alternating_rows() {
        let cal = CalendarIndex::full_seasons(2000, 2);
        let z = Matrix::from_rows(&[vec![1; 244], (0..244).map(|t| (t % 2) as u8).collect()]).unwrap();
        let r = local_spells(&z, &cal, 1, false);
        assert_eq!(r[0].wet.spells.len(), 2);
        assert!(r[0].wet.spells.iter().all(|s| s.len() == 122));
        assert!(r[0].dry.spells.is_empty());
        assert!(r[1].wet.spells.iter().chain(&r[1].dry.spells).all(|s| s.len() == 1));
        let spanning = local_spells(&z, &cal, 1, true);
        assert_eq!(spanning[0].wet.spells, vec![Spell { start: 0, end: 243 }]);
    }

    #[test]
    fn regional_scan() {
        let temporal = TemporalPatternSet {
            labels: vec![3, 5],
            cts: vec![vec![0.0; 6]; 2],
            cds: vec![vec![0, 0, 1, 1, 1, 0], vec![0; 6]],
            cluster_locations: vec![vec![0], vec![1]],
            sizes: vec![1, 1],
            empty_labels: vec![],
        };
        let r = regional_spells(&temporal, &one_season(6), false);
        assert_eq!(r[0].wet.scale, SpellScale::Region(3));
        assert_eq!(r[0].wet.spells, vec![Spell { start: 2, end: 4 }]);
        let dry: Vec<usize> = r[0].dry.spells.iter().map(Spell::len).collect();
        assert_eq!(dry, vec![2, 1]);
        assert_eq!(r[1].dry.spells.len(), 1);
    }

    #[test]
    fn coherence_examples() {
        let geom = GridGeometry::from_coordinates(&[(0.0, 0.0), (0.0, 1.0)]).unwrap();
        let z = Matrix::from_rows(&[vec![0, 0], vec![0, 1]]).unwrap();
        let c = coherence_stats(&z, &geom, &one_season(2));
        assert_eq!(c.neighbor_agreement, Some(0.5));
        assert_eq!(c.day_persistence, Some(0.5));

        let z = Matrix::filled(2, 2, 1u8);
        let c = coherence_stats(&z, &geom, &one_season(2));
        assert_eq!((c.neighbor_agreement, c.day_persistence), (Some(1.0), Some(1.0)));

        let g = GridGeometry::rectangular(2, 2, (0.0, 0.0));
        let checker = Matrix::from_rows(&[vec![0; 3], vec![1; 3], vec![1; 3], vec![0; 3]]).unwrap();
        let c = coherence_stats(&checker, &g, &one_season(3));
        assert_eq!((c.neighbor_agreement, c.day_persistence), (Some(0.0), Some(1.0)));
    }

    #[test]
    fn discretization_thresholds() {
        let f = field(vec![vec![4.9, 5.1, 3.0], vec![2.0, 2.0, 2.0]]);
        let z = threshold_discretize(&f, Threshold::Fixed(5.0)).unwrap();
        assert_eq!(z.row(0), &[0, 1, 0]);
        let z = threshold_discretize(&f, Threshold::LocalMean).unwrap();
        assert_eq!(z.row(1), &[0, 0, 0]);
        let z = threshold_discretize(&f, Threshold::Fixed(0.0)).unwrap();
        assert_eq!(z.row(0), &[1, 1, 1]);
        assert!(threshold_discretize(&f, Threshold::Fixed(-1.0)).is_err());
    }
}
