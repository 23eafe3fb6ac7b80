//! CSV formats.
//!
//! Every file starts with a header row; lines beginning with `#` are
//! comments (outputs carry a `# config-sha256=...` stamp). Dates are ISO
//! `YYYY-MM-DD`. Pattern and region labels are one-based in files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};

use monsoon_core::grid::{day_of_season, month_and_day};
use monsoon_core::transitions::TransitionModel;
use monsoon_core::{CalendarDay, CalendarIndex, GridGeometry, LatentState, Matrix, RainfallField};

pub const STAMP_PREFIX: &str = "# config-sha256=";
/// Gaps listed in a missing-data error.
pub const MAX_LISTED_GAPS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: expected header `{expected}`, found `{found}`", path.display())]
    Header { path: PathBuf, expected: String, found: String },
    #[error("{}:{line}: {message}", path.display())]
    Record { path: PathBuf, line: u64, message: String },
    #[error("{}: {count} missing location-day values; first gaps: {listing}", path.display())]
    Gaps { path: PathBuf, count: usize, listing: String },
    #[error("{}: {message}", path.display())]
    Content { path: PathBuf, message: String },
}

type Result<T, E = DataError> = std::result::Result<T, E>;

pub fn to_date(day: CalendarDay) -> NaiveDate {
    let (month, dom) = month_and_day(day.day_of_season);
    NaiveDate::from_ymd_opt(day.year, u32::from(month), u32::from(dom)).expect("season days are valid dates")
}

/// Calendar day of a June–September date.
pub fn from_date(date: NaiveDate) -> Option<CalendarDay> {
    day_of_season(date.month() as u8, date.day() as u8).map(|d| CalendarDay { year: date.year(), day_of_season: d })
}

/// A header-checked CSV reader that skips `#` comment lines.
struct Table {
    path: PathBuf,
    reader: csv::Reader<File>,
}

impl Table {
    fn open(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|source| DataError::Io { path: path.into(), source })?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
        let found = reader.headers().map_err(|source| DataError::Csv { path: path.into(), source })?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(DataError::Header {
                path: path.into(),
                expected: header.join(","),
                found: found.iter().collect::<Vec<_>>().join(","),
            });
        }
        Ok(Self { path: path.into(), reader })
    }

    /// Rows with their line numbers.
    fn rows(&mut self) -> Result<Vec<(u64, csv::StringRecord)>> {
        let mut out = Vec::new();
        for rec in self.reader.records() {
            let rec = rec.map_err(|source| DataError::Csv { path: self.path.clone(), source })?;
            let line = rec.position().map_or(0, |p| p.line());
            out.push((line, rec));
        }
        Ok(out)
    }

    fn err(&self, line: u64, message: impl Into<String>) -> DataError {
        DataError::Record { path: self.path.clone(), line, message: message.into() }
    }

    fn parse<T: std::str::FromStr>(&self, line: u64, rec: &csv::StringRecord, col: usize, what: &str) -> Result<T> {
        let raw = rec.get(col).unwrap_or("");
        raw.parse().map_err(|_| self.err(line, format!("invalid {what} {raw:?}")))
    }

    fn date(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<NaiveDate> {
        let raw = rec.get(col).unwrap_or("");
        NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| self.err(line, format!("invalid date {raw:?}")))
    }
}

/// Geometry with rook adjacency at `spacing` degrees. Ids must be `0..S`.
pub fn read_geometry(path: &Path, spacing: f64) -> Result<GridGeometry> {
    let mut table = Table::open(path, &["location_id", "lat", "lon"])?;
    let mut coords: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (line, rec) in table.rows()? {
        let id: usize = table.parse(line, &rec, 0, "location_id")?;
        let lat: f64 = table.parse(line, &rec, 1, "lat")?;
        let lon: f64 = table.parse(line, &rec, 2, "lon")?;
        if coords.insert(id, (lat, lon)).is_some() {
            return Err(table.err(line, format!("duplicate location_id {id}")));
        }
    }
    if let Some((pos, id)) = coords.keys().enumerate().find(|(i, id)| i != *id) {
        return Err(DataError::Content {
            path: path.into(),
            message: format!("location ids must be 0..{}; id {pos} is missing (next is {id})", coords.len()),
        });
    }
    let list: Vec<(f64, f64)> = coords.into_values().collect();
    GridGeometry::from_coordinates_with_spacing(&list, spacing)
        .map_err(|e| DataError::Content { path: path.into(), message: e.to_string() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedField {
    pub field: RainfallField,
    /// Rows outside June–September that were ignored.
    pub skipped_rows: usize,
}

/// Reads a long-format rainfall file against a geometry file.
pub fn load_rainfall(data: &Path, geometry: &Path, spacing: f64) -> Result<LoadedField> {
    let geometry = read_geometry(geometry, spacing)?;
    let n_loc = geometry.len();
    let mut table = Table::open(data, &["location_id", "date", "rain_mm"])?;
    let mut values: BTreeMap<CalendarDay, Vec<Option<f64>>> = BTreeMap::new();
    let mut skipped_rows = 0;
    for (line, rec) in table.rows()? {
        let id: usize = table.parse(line, &rec, 0, "location_id")?;
        let date = table.date(line, &rec, 1)?;
        let rain: f64 = table.parse(line, &rec, 2, "rain_mm")?;
        let Some(day) = from_date(date) else {
            skipped_rows += 1;
            continue;
        };
        if id >= n_loc {
            return Err(table.err(line, format!("location_id {id} is not in the geometry")));
        }
        if !rain.is_finite() {
            return Err(table.err(line, format!("non-finite rainfall {rain}")));
        }
        if rain < 0.0 {
            return Err(table.err(line, format!("negative rainfall {rain}")));
        }
        let slot = &mut values.entry(day).or_insert_with(|| vec![None; n_loc])[id];
        if slot.replace(rain).is_some() {
            return Err(table.err(line, format!("duplicate row for location {id} on {date}")));
        }
    }
    if values.is_empty() {
        return Err(DataError::Content { path: data.into(), message: "no June-September rows".into() });
    }
    let days: Vec<CalendarDay> = values.keys().copied().collect();
    let mut x = Matrix::filled(n_loc, days.len(), 0.0);
    let mut gaps = Vec::new();
    let mut count = 0;
    for (t, row) in values.values().enumerate() {
        for (s, v) in row.iter().enumerate() {
            match v {
                Some(v) => x.set(s, t, *v),
                None => {
                    count += 1;
                    if gaps.len() < MAX_LISTED_GAPS {
                        gaps.push(format!("location {s} on {}", to_date(days[t])));
                    }
                }
            }
        }
    }
    if count > 0 {
        return Err(DataError::Gaps { path: data.into(), count, listing: gaps.join("; ") });
    }
    let content = |e: monsoon_core::Error| DataError::Content { path: data.into(), message: e.to_string() };
    let calendar = CalendarIndex::from_days(days).map_err(content)?;
    let field = RainfallField::new(geometry, calendar, x).map_err(content)?;
    Ok(LoadedField { field, skipped_rows })
}

/// Reads a `location_id,flag` mask with a 0/1 flag per location.
pub fn read_mask(path: &Path, n_loc: usize) -> Result<Vec<bool>> {
    let mut table = Table::open(path, &["location_id", "flag"])?;
    let mut mask = vec![None; n_loc];
    for (line, rec) in table.rows()? {
        let id: usize = table.parse(line, &rec, 0, "location_id")?;
        let flag: u8 = table.parse(line, &rec, 1, "flag")?;
        if id >= n_loc || flag > 1 {
            return Err(table.err(line, format!("bad mask row {id},{flag}")));
        }
        mask[id] = Some(flag == 1);
    }
    mask.into_iter()
        .enumerate()
        .map(|(s, m)| m.ok_or_else(|| DataError::Content { path: path.into(), message: format!("location {s} missing") }))
        .collect()
}

/// Writes stamped CSV and report files into one directory.
#[derive(Debug, Clone)]
pub struct Output {
    dir: PathBuf,
    stamp: String,
}

impl Output {
    pub fn new(dir: &Path, config_hash: impl std::fmt::Display) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.into(), source })?;
        Ok(Self { dir: dir.into(), stamp: format!("{STAMP_PREFIX}{config_hash}\n") })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.path(name);
        let io = |source| DataError::Io { path: path.clone(), source };
        let mut file = File::create(&path).map_err(io)?;
        file.write_all(self.stamp.as_bytes()).map_err(io)?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |source| DataError::Csv { path: path.clone(), source };
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(path)
    }

    /// `key=value` lines.
    pub fn report(&self, name: &str, entries: &[(String, String)]) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = self.stamp.clone();
        for (k, v) in entries {
            text.push_str(&format!("{k}={v}\n"));
        }
        std::fs::write(&path, text).map_err(|source| DataError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

pub fn write_rainfall(out: &Output, name: &str, field: &RainfallField) -> Result<PathBuf> {
    let cal = field.calendar();
    let rows = (0..field.n_locations()).flat_map(|s| {
        (0..field.n_days()).map(move |t| vec![s.to_string(), to_date(cal.day(t)).to_string(), field.x().get(s, t).to_string()])
    });
    out.csv(name, &["location_id", "date", "rain_mm"], rows)
}

pub fn write_geometry(out: &Output, name: &str, geometry: &GridGeometry) -> Result<PathBuf> {
    let rows = geometry.locations().iter().map(|l| vec![l.id.to_string(), l.lat.to_string(), l.lon.to_string()]);
    out.csv(name, &["location_id", "lat", "lon"], rows)
}

/// Ground truth: `kind` is `z` (id `location@date`, label 0/1), `u`
/// (id = date) or `v` (id = location); `u`/`v` labels are one-based.
pub fn write_truth(out: &Output, name: &str, calendar: &CalendarIndex, state: &LatentState) -> Result<PathBuf> {
    let mut rows: Vec<[String; 3]> = Vec::new();
    for s in 0..state.z.rows() {
        for t in 0..state.z.cols() {
            rows.push([format!("{s}@{}", to_date(calendar.day(t))), "z".into(), state.z.get(s, t).to_string()]);
        }
    }
    for (t, &l) in state.u.iter().enumerate() {
        rows.push([to_date(calendar.day(t)).to_string(), "u".into(), (l + 1).to_string()]);
    }
    for (s, &l) in state.v.iter().enumerate() {
        rows.push([s.to_string(), "v".into(), (l + 1).to_string()]);
    }
    out.csv(name, &["location_id_or_day", "kind", "label"], rows)
}

/// Planted day and location labels (zero-based) from a truth file.
pub fn read_truth_labels(path: &Path, field: &RainfallField) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut table = Table::open(path, &["location_id_or_day", "kind", "label"])?;
    let index = date_index(field.calendar());
    let mut u = vec![None; field.n_days()];
    let mut v = vec![None; field.n_locations()];
    for (line, rec) in table.rows()? {
        let kind = rec.get(1).unwrap_or("");
        if kind == "z" {
            continue;
        }
        let label: usize = table.parse(line, &rec, 2, "label")?;
        if label == 0 {
            return Err(table.err(line, "labels start at 1"));
        }
        match kind {
            "u" => {
                let date = table.date(line, &rec, 0)?;
                let t = *index.get(&date).ok_or_else(|| table.err(line, format!("{date} is not in the data")))?;
                u[t] = Some(label - 1);
            }
            "v" => {
                let s: usize = table.parse(line, &rec, 0, "location_id")?;
                *v.get_mut(s).ok_or_else(|| table.err(line, format!("unknown location {s}")))? = Some(label - 1);
            }
            other => return Err(table.err(line, format!("unknown kind {other:?}"))),
        }
    }
    let complete = |labels: Vec<Option<usize>>, what: &str| {
        labels.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| DataError::Content {
            path: path.into(),
            message: format!("truth file does not label every {what}"),
        })
    };
    Ok((complete(u, "day")?, complete(v, "location")?))
}

fn date_index(calendar: &CalendarIndex) -> BTreeMap<NaiveDate, usize> {
    calendar.days().iter().enumerate().map(|(t, &d)| (to_date(d), t)).collect()
}

pub const STATE_Z: &str = "state_z.csv";
pub const STATE_U: &str = "state_u.csv";
pub const STATE_V: &str = "state_v.csv";

pub fn write_state(out: &Output, calendar: &CalendarIndex, state: &LatentState) -> Result<()> {
    let rows = (0..state.z.rows()).flat_map(|s| {
        (0..state.z.cols()).map(move |t| [s.to_string(), to_date(calendar.day(t)).to_string(), state.z.get(s, t).to_string()])
    });
    out.csv(STATE_Z, &["location_id", "date", "z"], rows)?;
    let rows = state.u.iter().enumerate().map(|(t, &l)| [to_date(calendar.day(t)).to_string(), (l + 1).to_string()]);
    out.csv(STATE_U, &["date", "u"], rows)?;
    let rows = state.v.iter().enumerate().map(|(s, &l)| [s.to_string(), (l + 1).to_string()]);
    out.csv(STATE_V, &["location_id", "v"], rows)?;
    Ok(())
}

/// Reads the three state files of a fitted run in `dir`.
pub fn read_state(dir: &Path, field: &RainfallField) -> Result<LatentState> {
    let index = date_index(field.calendar());
    let (n_loc, n_days) = (field.n_locations(), field.n_days());

    let path = dir.join(STATE_Z);
    let mut table = Table::open(&path, &["location_id", "date", "z"])?;
    let mut z = Matrix::filled(n_loc, n_days, 0u8);
    let mut seen = 0usize;
    for (line, rec) in table.rows()? {
        let s: usize = table.parse(line, &rec, 0, "location_id")?;
        let date = table.date(line, &rec, 1)?;
        let value: u8 = table.parse(line, &rec, 2, "z")?;
        let t = *index.get(&date).ok_or_else(|| table.err(line, format!("{date} is not in the data")))?;
        if s >= n_loc || value > 1 {
            return Err(table.err(line, format!("bad state row {s},{date},{value}")));
        }
        z.set(s, t, value);
        seen += 1;
    }
    if seen != n_loc * n_days {
        return Err(DataError::Content { path, message: format!("{seen} rows for {n_loc}x{n_days} sites") });
    }

    let path = dir.join(STATE_U);
    let mut table = Table::open(&path, &["date", "u"])?;
    let mut u = vec![None; n_days];
    for (line, rec) in table.rows()? {
        let date = table.date(line, &rec, 0)?;
        let label: usize = table.parse(line, &rec, 1, "u")?;
        let t = *index.get(&date).ok_or_else(|| table.err(line, format!("{date} is not in the data")))?;
        u[t] = Some(label.checked_sub(1).ok_or_else(|| table.err(line, "labels start at 1"))?);
    }
    let u = u.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| DataError::Content {
        path: path.clone(),
        message: "not every day has a label".into(),
    })?;

    let path = dir.join(STATE_V);
    let mut table = Table::open(&path, &["location_id", "v"])?;
    let mut v = vec![None; n_loc];
    for (line, rec) in table.rows()? {
        let s: usize = table.parse(line, &rec, 0, "location_id")?;
        let label: usize = table.parse(line, &rec, 1, "v")?;
        let slot = v.get_mut(s).ok_or_else(|| table.err(line, format!("unknown location {s}")))?;
        *slot = Some(label.checked_sub(1).ok_or_else(|| table.err(line, "labels start at 1"))?);
    }
    let v = v.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| DataError::Content {
        path: path.clone(),
        message: "not every location has a label".into(),
    })?;
    Ok(LatentState { z, u, v })
}

/// Square matrix with a `from,<label>...` header and one row per label.
pub fn write_label_matrix(out: &Output, name: &str, labels: &[usize], m: &Matrix<f64>) -> Result<PathBuf> {
    let names: Vec<String> = labels.iter().map(|l| (l + 1).to_string()).collect();
    let mut header = vec!["from"];
    header.extend(names.iter().map(String::as_str));
    let rows = (0..m.rows()).map(|i| {
        let mut row = vec![names[i].clone()];
        row.extend(m.row(i).iter().map(f64::to_string));
        row
    });
    out.csv(name, &header, rows)
}

/// Reads a transition matrix written by [`write_label_matrix`].
pub fn read_transitions(path: &Path) -> Result<TransitionModel> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let csv_err = |source| DataError::Csv { path: path.into(), source };
    let header = reader.headers().map_err(csv_err)?.clone();
    let bad = |message: String| DataError::Content { path: path.into(), message };
    if header.get(0) != Some("from") {
        return Err(bad("first column must be `from`".into()));
    }
    let parse_label = |raw: &str| -> Option<usize> { raw.parse::<usize>().ok().and_then(|l| l.checked_sub(1)) };
    let labels: Vec<usize> = header
        .iter()
        .skip(1)
        .map(|h| parse_label(h).ok_or_else(|| bad(format!("bad label {h:?} in header"))))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.get(0).and_then(parse_label) != labels.get(i).copied() {
            return Err(bad(format!("row {} must be labelled {}", i + 1, labels.get(i).map_or(0, |l| l + 1))));
        }
        let row: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad probability {v:?}"))))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let matrix = Matrix::from_rows(&rows).map_err(|e| bad(e.to_string()))?;
    TransitionModel::from_matrix(labels, matrix).map_err(|e| bad(e.to_string()))
}

pub const PATTERNS: &str = "patterns.csv";

/// Canonical rainfall patterns (zero-based label → CRP) from a patterns file.
pub fn read_crp(path: &Path) -> Result<BTreeMap<usize, Vec<f64>>> {
    let mut table = Table::open(path, &["label", "location_id", "crp_value", "cdp_value"])?;
    let mut out: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (line, rec) in table.rows()? {
        let label: usize = table.parse(line, &rec, 0, "label")?;
        let s: usize = table.parse(line, &rec, 1, "location_id")?;
        let value: f64 = table.parse(line, &rec, 2, "crp_value")?;
        let label = label.checked_sub(1).ok_or_else(|| table.err(line, "labels start at 1"))?;
        out.entry(label).or_default().push((s, value));
    }
    out.into_iter()
        .map(|(label, mut entries)| {
            entries.sort_by_key(|e| e.0);
            if entries.iter().enumerate().any(|(i, e)| e.0 != i) {
                return Err(DataError::Content { path: path.into(), message: format!("pattern {} is incomplete", label + 1) });
            }
            Ok((label, entries.into_iter().map(|e| e.1).collect()))
        })
        .collect()
}
