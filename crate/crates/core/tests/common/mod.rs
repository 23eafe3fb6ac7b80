#![allow(dead_code)]

use monsoon_core::grid::SEASON_LENGTH;
use monsoon_core::{CalendarIndex, GridGeometry, Matrix, RainfallField};

/// The first `len` days of consecutive full seasons from 2000.
pub fn calendar(len: usize) -> CalendarIndex {
    let full = CalendarIndex::full_seasons(2000, len / SEASON_LENGTH + 1);
    CalendarIndex::from_days(full.days()[..len].to_vec()).unwrap()
}

pub fn field(rows: usize, cols: usize, x: Vec<Vec<f64>>) -> RainfallField {
    let cal = calendar(x[0].len());
    RainfallField::new(GridGeometry::rectangular(rows, cols, (20.0, 75.0)), cal, Matrix::from_rows(&x).unwrap()).unwrap()
}

/// Maximal runs `(value, start, end)` found by walking the series and
/// closing the open run whenever the value or the year changes.
pub fn naive_runs<T: PartialEq + Copy>(values: &[T], cal: &CalendarIndex) -> Vec<(T, usize, usize)> {
    let mut out = Vec::new();
    let mut open: Option<(T, usize)> = None;
    for t in 0..values.len() {
        if let Some((v, start)) = open {
            let same_year = cal.day(t).year == cal.day(t - 1).year;
            if v != values[t] || !same_year {
                out.push((v, start, t - 1));
                open = Some((values[t], t));
            }
        } else {
            open = Some((values[t], t));
        }
    }
    if let Some((v, start)) = open {
        out.push((v, start, values.len() - 1));
    }
    out
}
