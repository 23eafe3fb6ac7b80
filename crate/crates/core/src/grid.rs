//! Grid geometry, the June–September calendar, and rainfall fields.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::matrix::Matrix;
use crate::stats;
use crate::{Error, Result};

/// Days in a June 1 – September 30 season.
pub const SEASON_LENGTH: usize = 122;

/// First day-of-season index of June, July, August, September.
const MONTH_STARTS: [u16; 4] = [0, 30, 61, 92];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub id: usize,
    pub lat: f64,
    pub lon: f64,
}

/// Locations plus their spatial neighbourhoods `Ω(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    locations: Vec<Location>,
    adjacency: Vec<Vec<usize>>,
    color: Vec<u8>,
}

impl GridGeometry {
    /// Rook adjacency on a 1° lattice.
    pub fn from_coordinates(coords: &[(f64, f64)]) -> Result<Self> {
        Self::from_coordinates_with_spacing(coords, 1.0)
    }

    /// Rook adjacency on a lattice with the given spacing in degrees.
    ///
    /// Boundary and coastal cells simply have fewer neighbours.
    pub fn from_coordinates_with_spacing(coords: &[(f64, f64)], spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Geometry(format!("spacing must be positive, got {spacing}")));
        }
        let lat0 = coords.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let lon0 = coords.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let mut cells = BTreeMap::new();
        let mut keys = Vec::with_capacity(coords.len());
        for (id, &(lat, lon)) in coords.iter().enumerate() {
            if !lat.is_finite() || !lon.is_finite() {
                return Err(Error::Geometry(format!("location {id} has non-finite coordinates")));
            }
            let key = (
                libm::round((lat - lat0) / spacing) as i64,
                libm::round((lon - lon0) / spacing) as i64,
            );
            if let Some(other) = cells.insert(key, id) {
                return Err(Error::Geometry(format!("locations {other} and {id} share a grid cell")));
            }
            keys.push(key);
        }
        let adjacency = keys
            .iter()
            .map(|&(r, c)| {
                let mut nb: Vec<usize> = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                    .iter()
                    .filter_map(|k| cells.get(k).copied())
                    .collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        let locations = coords
            .iter()
            .enumerate()
            .map(|(id, &(lat, lon))| Location { id, lat, lon })
            .collect();
        Self::from_adjacency(locations, adjacency)
    }

    /// A `rows × cols` rectangle of 1° cells with its south-west corner at `origin`.
    pub fn rectangular(rows: usize, cols: usize, origin: (f64, f64)) -> Self {
        let coords: Vec<(f64, f64)> = (0..rows * cols)
            .map(|i| (origin.0 + (i / cols) as f64, origin.1 + (i % cols) as f64))
            .collect();
        Self::from_coordinates(&coords).expect("rectangular lattice is valid")
    }

    /// Validates and adopts an explicit neighbourhood structure.
    ///
    /// The neighbourhood graph must be symmetric, irreflexive and bipartite
    /// (the sampler's two-colour sweeps rely on the last property).
    pub fn from_adjacency(locations: Vec<Location>, mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = locations.len();
        if adjacency.len() != n {
            return Err(Error::Geometry(format!("{} adjacency lists for {n} locations", adjacency.len())));
        }
        for (s, loc) in locations.iter().enumerate() {
            if loc.id != s {
                return Err(Error::Geometry(format!("location at position {s} has id {}", loc.id)));
            }
        }
        for (s, nb) in adjacency.iter_mut().enumerate() {
            nb.sort_unstable();
            nb.dedup();
            if nb.contains(&s) {
                return Err(Error::Geometry(format!("location {s} is its own neighbour")));
            }
            if let Some(&bad) = nb.iter().find(|&&o| o >= n) {
                return Err(Error::Geometry(format!("location {s} lists unknown neighbour {bad}")));
            }
        }
        for (s, nb) in adjacency.iter().enumerate() {
            for &o in nb {
                if adjacency[o].binary_search(&s).is_err() {
                    return Err(Error::Geometry(format!("adjacency {s}->{o} is not symmetric")));
                }
            }
        }
        let color = two_color(&adjacency)?;
        Ok(Self { locations, adjacency, color })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.adjacency[s]
    }

    /// Lattice colour (0 or 1); neighbours always differ.
    pub fn color(&self, s: usize) -> u8 {
        self.color[s]
    }

    /// Each undirected edge once, as `(s, s')` with `s < s'`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(s, nb)| nb.iter().filter(move |&&o| o > s).map(move |&o| (s, o)))
    }
}

fn two_color(adjacency: &[Vec<usize>]) -> Result<Vec<u8>> {
    let mut color = alloc::vec![u8::MAX; adjacency.len()];
    let mut queue = VecDeque::new();
    for start in 0..adjacency.len() {
        if color[start] != u8::MAX {
            continue;
        }
        color[start] = 0;
        queue.push_back(start);
        while let Some(s) = queue.pop_front() {
            for &o in &adjacency[s] {
                if color[o] == u8::MAX {
                    color[o] = 1 - color[s];
                    queue.push_back(o);
                } else if color[o] == color[s] {
                    return Err(Error::Geometry(format!("neighbourhood graph is not bipartite at edge {s}-{o}")));
                }
            }
        }
    }
    Ok(color)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CalendarDay {
    pub year: i32,
    /// 0 = June 1, 121 = September 30.
    pub day_of_season: u16,
}

impl CalendarDay {
    pub fn month(&self) -> u8 {
        month_and_day(self.day_of_season).0
    }
}

/// Maps a day-of-season index to `(month, day_of_month)`.
pub fn month_and_day(day_of_season: u16) -> (u8, u8) {
    let idx = MONTH_STARTS.iter().rposition(|&m| m <= day_of_season).unwrap_or(0);
    (6 + idx as u8, (day_of_season - MONTH_STARTS[idx] + 1) as u8)
}

/// Day-of-season index of a June–September date, `None` outside the window.
pub fn day_of_season(month: u8, day: u8) -> Option<u16> {
    let lengths = [30u8, 31, 31, 30];
    if !(6..=9).contains(&month) || day == 0 || day > lengths[(month - 6) as usize] {
        return None;
    }
    Some(MONTH_STARTS[(month - 6) as usize] + u16::from(day) - 1)
}

/// Ordered analysis days. Seasons are maximal runs of calendar-consecutive
/// days within one year; no day pair crosses a season boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarIndex {
    days: Vec<CalendarDay>,
    seasons: Vec<Range<usize>>,
    years: Vec<i32>,
}

impl CalendarIndex {
    /// Complete 122-day seasons for `n_years` consecutive years.
    pub fn full_seasons(first_year: i32, n_years: usize) -> Self {
        let days = (0..n_years)
            .flat_map(|y| {
                (0..SEASON_LENGTH as u16).map(move |d| CalendarDay { year: first_year + y as i32, day_of_season: d })
            })
            .collect();
        Self::from_days(days).expect("full seasons are ordered")
    }

    pub fn from_days(days: Vec<CalendarDay>) -> Result<Self> {
        for w in days.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Calendar(format!("days out of order: {:?} then {:?}", w[0], w[1])));
            }
        }
        if let Some(bad) = days.iter().find(|d| usize::from(d.day_of_season) >= SEASON_LENGTH) {
            return Err(Error::Calendar(format!("day_of_season {} out of range", bad.day_of_season)));
        }
        let mut seasons = Vec::new();
        let mut start = 0;
        for t in 1..=days.len() {
            if t == days.len() || !consecutive(&days[t - 1], &days[t]) {
                seasons.push(start..t);
                start = t;
            }
        }
        let mut years: Vec<i32> = days.iter().map(|d| d.year).collect();
        years.dedup();
        Ok(Self { days, seasons, years })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn season_length(&self) -> usize {
        SEASON_LENGTH
    }

    pub fn day(&self, t: usize) -> CalendarDay {
        self.days[t]
    }

    pub fn days(&self) -> &[CalendarDay] {
        &self.days
    }

    pub fn month(&self, t: usize) -> u8 {
        self.days[t].month()
    }

    /// Distinct years in order.
    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    /// Position of day `t`'s year in [`Self::years`].
    pub fn year_index(&self, t: usize) -> usize {
        self.years.binary_search(&self.days[t].year).expect("year present")
    }

    /// Whether days `t` and `t + 1` are adjacent calendar days of one season.
    pub fn is_consecutive(&self, t: usize) -> bool {
        t + 1 < self.days.len() && consecutive(&self.days[t], &self.days[t + 1])
    }

    /// Index ranges of the seasons (maximal consecutive runs).
    pub fn seasons(&self) -> &[Range<usize>] {
        &self.seasons
    }
}

fn consecutive(a: &CalendarDay, b: &CalendarDay) -> bool {
    a.year == b.year && b.day_of_season == a.day_of_season + 1
}

/// Daily rainfall `x(s,t)` in mm/day on a grid and calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct RainfallField {
    geometry: GridGeometry,
    calendar: CalendarIndex,
    x: Matrix<f64>,
}

impl RainfallField {
    pub fn new(geometry: GridGeometry, calendar: CalendarIndex, x: Matrix<f64>) -> Result<Self> {
        if x.rows() != geometry.len() || x.cols() != calendar.len() {
            return Err(Error::Dimension(format!(
                "rainfall is {}x{}, geometry has {} locations and calendar {} days",
                x.rows(),
                x.cols(),
                geometry.len(),
                calendar.len()
            )));
        }
        for s in 0..x.rows() {
            for (t, &value) in x.row(s).iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::NonFiniteRainfall { location: s, day: t });
                }
                if value < 0.0 {
                    return Err(Error::NegativeRainfall { location: s, day: t, value });
                }
            }
        }
        Ok(Self { geometry, calendar, x })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn calendar(&self) -> &CalendarIndex {
        &self.calendar
    }

    pub fn x(&self) -> &Matrix<f64> {
        &self.x
    }

    pub fn n_locations(&self) -> usize {
        self.x.rows()
    }

    pub fn n_days(&self) -> usize {
        self.x.cols()
    }

    /// `Y(t) = Σ_s x(s,t)`.
    pub fn daily_aggregate(&self) -> Vec<f64> {
        daily_aggregate(self)
    }

    /// Per-location mean over all days, `μ_s`.
    pub fn local_means(&self) -> Vec<f64> {
        (0..self.n_locations()).map(|s| stats::mean(self.x.row(s)).unwrap_or(0.0)).collect()
    }
}

pub fn daily_aggregate(field: &RainfallField) -> Vec<f64> {
    let x = field.x();
    let mut y = alloc::vec![0.0; x.cols()];
    for s in 0..x.rows() {
        for (acc, v) in y.iter_mut().zip(x.row(s)) {
            *acc += v;
        }
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YearClass {
    Excess,
    Deficient,
    Normal,
}

impl YearClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            YearClass::Excess => "excess",
            YearClass::Deficient => "deficient",
            YearClass::Normal => "normal",
        }
    }
}

/// Labels each total as excess (`> μ+σ`), deficient (`< μ−σ`) or normal.
pub fn classify_totals(totals: &[f64]) -> Result<Vec<YearClass>> {
    if totals.len() < 2 {
        return Err(Error::TooFewYears(totals.len()));
    }
    let (mu, sigma) = stats::mean_std(totals).expect("non-empty");
    Ok(totals
        .iter()
        .map(|&a| {
            if a > mu + sigma {
                YearClass::Excess
            } else if a < mu - sigma {
                YearClass::Deficient
            } else {
                YearClass::Normal
            }
        })
        .collect())
}

/// Seasonal totals per year and their excess/deficient/normal class.
pub fn classify_years(field: &RainfallField) -> Result<Vec<(i32, f64, YearClass)>> {
    let cal = field.calendar();
    let y = field.daily_aggregate();
    let mut totals = alloc::vec![0.0; cal.n_years()];
    for (t, v) in y.iter().enumerate() {
        totals[cal.year_index(t)] += v;
    }
    let classes = classify_totals(&totals)?;
    Ok(cal.years().iter().zip(totals).zip(classes).map(|((&yr, a), c)| (yr, a, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn two_by_two() -> RainfallField {
        let geom = GridGeometry::from_coordinates(&[(20.0, 75.0), (20.0, 76.0)]).unwrap();
        let cal = CalendarIndex::full_seasons(2000, 1);
        let cal = CalendarIndex::from_days(cal.days()[..2].to_vec()).unwrap();
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        RainfallField::new(geom, cal, x).unwrap()
    }

    #[test]
    fn rook_adjacency_from_coordinates() {
        let g = GridGeometry::from_coordinates(&[(20.0, 75.0), (20.0, 76.0), (25.0, 80.0)]).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert!(g.neighbors(2).is_empty());
        assert_ne!(g.color(0), g.color(1));
    }

    #[test]
    fn diagonal_cells_are_not_neighbors() {
        let g = GridGeometry::from_coordinates(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!(g.neighbors(0).is_empty());
    }

    #[test]
    fn asymmetric_adjacency_rejected() {
        let locs = vec![Location { id: 0, lat: 0.0, lon: 0.0 }, Location { id: 1, lat: 0.0, lon: 1.0 }];
        assert!(GridGeometry::from_adjacency(locs.clone(), vec![vec![1], vec![]]).is_err());
        assert!(GridGeometry::from_adjacency(locs, vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn rectangular_grid_edges() {
        let g = GridGeometry::rectangular(3, 4, (10.0, 70.0));
        // 3 rows of 3 horizontal edges + 2 rows of 4 vertical edges
        assert_eq!(g.edges().count(), 9 + 8);
        for (a, b) in g.edges() {
            assert_ne!(g.color(a), g.color(b));
        }
    }

    #[test]
    fn month_mapping() {
        assert_eq!(month_and_day(0), (6, 1));
        assert_eq!(month_and_day(29), (6, 30));
        assert_eq!(month_and_day(30), (7, 1));
        assert_eq!(month_and_day(91), (8, 31));
        assert_eq!(month_and_day(121), (9, 30));
        assert_eq!(day_of_season(9, 30), Some(121));
        assert_eq!(day_of_season(5, 31), None);
        assert_eq!(day_of_season(6, 31), None);
    }

    #[test]
    fn seasons_split_at_year_boundaries() {
        let cal = CalendarIndex::full_seasons(2000, 3);
        assert_eq!(cal.len(), 366);
        assert_eq!(cal.seasons(), &[0..122, 122..244, 244..366]);
        assert!(cal.is_consecutive(120));
        assert!(!cal.is_consecutive(121));
        assert_eq!(cal.year_index(200), 1);
    }

    #[test]
    fn field_echoes_input_and_aggregates() {
        let f = two_by_two();
        assert_eq!(f.x().row(0), &[0.0, 1.0]);
        assert_eq!(f.daily_aggregate(), vec![2.0, 4.0]);
    }

    #[test]
    fn negative_rainfall_rejected() {
        let f = two_by_two();
        let x = Matrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let err = RainfallField::new(f.geometry().clone(), f.calendar().clone(), x).unwrap_err();
        assert!(matches!(err, Error::NegativeRainfall { location: 0, day: 0, .. }));
    }

    #[test]
    fn aggregate_of_single_day() {
        let geom = GridGeometry::from_coordinates(&[(0.0, 0.0), (0.0, 1.0)]).unwrap();
        let cal = CalendarIndex::from_days(vec![CalendarDay { year: 2001, day_of_season: 5 }]).unwrap();
        let x = Matrix::from_rows(&[vec![1.5], vec![2.5]]).unwrap();
        let f = RainfallField::new(geom, cal, x).unwrap();
        assert_eq!(f.daily_aggregate(), vec![4.0]);
    }

    #[test]
    fn year_classification_examples() {
        use YearClass::*;
        assert_eq!(classify_totals(&[10.0, 10.0, 10.0, 22.0]).unwrap(), vec![Normal, Normal, Normal, Excess]);
        assert_eq!(classify_totals(&[7.0, 7.0, 7.0]).unwrap(), vec![Normal, Normal, Normal]);
        assert_eq!(classify_totals(&[0.0, 10.0, 20.0]).unwrap(), vec![Deficient, Normal, Excess]);
        assert_eq!(classify_totals(&[3.0]), Err(Error::TooFewYears(1)));
    }
}
