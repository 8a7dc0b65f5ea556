//! CSV formats:
//!
//! * `weather.csv`: `date,tmax_c,humidity_pct`
//! * `ead.csv`: `date,all,children,adult,elderly,outdoor,indoor`
//! * `mobility.csv`: `date,mobility_pct`, sparse
//! * `holidays.txt`: one date per line, `#` comments

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::calendar::{build_calendar_labels, load_holidays};
use super::mobility::{fill_mobility, MobilityFill};
use super::synth::SynthDataset;
use super::{DailyRecord, GroupCounts};
use crate::error::{Error, Result};

pub const WEATHER_HEADER: [&str; 3] = ["date", "tmax_c", "humidity_pct"];
pub const EAD_HEADER: [&str; 7] = ["date", "all", "children", "adult", "elderly", "outdoor", "indoor"];
pub const MOBILITY_HEADER: [&str; 2] = ["date", "mobility_pct"];

#[derive(Clone, Debug, PartialEq)]
pub struct WeatherRow {
    pub date: NaiveDate,
    pub tmax: f64,
    pub humidity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EadRow {
    pub date: NaiveDate,
    pub counts: GroupCounts,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MobilityRow {
    pub date: NaiveDate,
    pub mobility: f64,
}

/// A merged day whose mobility may still be missing.
#[derive(Clone, Debug, PartialEq)]
pub struct MergedDay {
    pub date: NaiveDate,
    pub tmax: f64,
    pub humidity: f64,
    pub ead: GroupCounts,
    pub mobility: Option<f64>,
}

/// Locations of the input files of one dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub weather: PathBuf,
    pub ead: PathBuf,
    pub mobility: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
}

impl DatasetPaths {
    /// Conventional file names inside `dir`; optional files are used when present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        DatasetPaths {
            weather: dir.join("weather.csv"),
            ead: dir.join("ead.csv"),
            mobility: opt("mobility.csv"),
            holidays: opt("holidays.txt"),
        }
    }
}

struct Rows<'a> {
    path: &'a Path,
    reader: csv::Reader<&'a [u8]>,
}

fn open<'a>(path: &'a Path, bytes: &'a [u8], header: &[&str]) -> Result<Rows<'a>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(bytes);
    let got = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(parse_err(
            path,
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                got.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(Rows { path, reader })
}

impl Rows<'_> {
    fn for_each(mut self, mut f: impl FnMut(u64, &csv::StringRecord) -> Result<()>) -> Result<()> {
        let mut rec = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut rec) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = rec.position().map_or(0, |p| p.line());
                    f(line, &rec)?;
                }
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Err(parse_err(self.path, line, e.to_string()));
                }
            }
        }
    }
}

fn parse_err(path: &Path, line: u64, message: String) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn field<'r>(path: &Path, line: u64, rec: &'r csv::StringRecord, idx: usize, name: &str) -> Result<&'r str> {
    rec.get(idx)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| parse_err(path, line, format!("missing `{name}`")))
}

fn date_field(path: &Path, line: u64, rec: &csv::StringRecord) -> Result<NaiveDate> {
    let s = field(path, line, rec, 0, "date")?;
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| parse_err(path, line, format!("bad date `{s}`: {e}")))
}

fn float_field(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let s = field(path, line, rec, idx, name)?;
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad `{name}` value `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite `{name}`")));
    }
    Ok(v)
}

fn count_field(path: &Path, line: u64, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<u32> {
    let s = field(path, line, rec, idx, name)?;
    s.parse()
        .map_err(|_| parse_err(path, line, format!("`{name}` must be a nonnegative integer, got `{s}`")))
}

fn check_width(path: &Path, line: u64, rec: &csv::StringRecord, n: usize) -> Result<()> {
    if rec.len() != n {
        return Err(parse_err(
            path,
            line,
            format!("expected {n} fields, found {}", rec.len()),
        ));
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Sorts by date and rejects duplicates.
fn sorted_unique<T>(path: &Path, mut rows: Vec<T>, date: impl Fn(&T) -> NaiveDate) -> Result<Vec<T>> {
    rows.sort_by_key(|r| date(r));
    if let Some(w) = rows.windows(2).find(|w| date(&w[0]) == date(&w[1])) {
        return Err(Error::Data(format!(
            "{}: duplicate date {}",
            path.display(),
            date(&w[0])
        )));
    }
    Ok(rows)
}

pub fn parse_weather_csv(path: &Path, bytes: &[u8]) -> Result<Vec<WeatherRow>> {
    let mut rows = Vec::new();
    open(path, bytes, &WEATHER_HEADER)?.for_each(|line, rec| {
        check_width(path, line, rec, 3)?;
        let humidity = float_field(path, line, rec, 2, "humidity_pct")?;
        if !(0.0..=100.0).contains(&humidity) {
            return Err(parse_err(path, line, format!("humidity {humidity} outside [0, 100]")));
        }
        rows.push(WeatherRow {
            date: date_field(path, line, rec)?,
            tmax: float_field(path, line, rec, 1, "tmax_c")?,
            humidity,
        });
        Ok(())
    })?;
    sorted_unique(path, rows, |r| r.date)
}

pub fn load_weather_csv(path: &Path) -> Result<Vec<WeatherRow>> {
    parse_weather_csv(path, &read(path)?)
}

pub fn parse_ead_csv(path: &Path, bytes: &[u8]) -> Result<Vec<EadRow>> {
    let mut rows = Vec::new();
    open(path, bytes, &EAD_HEADER)?.for_each(|line, rec| {
        check_width(path, line, rec, 7)?;
        let c = |i: usize| count_field(path, line, rec, i, EAD_HEADER[i]);
        rows.push(EadRow {
            date: date_field(path, line, rec)?,
            counts: GroupCounts {
                all: c(1)?,
                children: c(2)?,
                adult: c(3)?,
                elderly: c(4)?,
                outdoor: c(5)?,
                indoor: c(6)?,
            },
        });
        Ok(())
    })?;
    sorted_unique(path, rows, |r| r.date)
}

pub fn load_ead_csv(path: &Path) -> Result<Vec<EadRow>> {
    parse_ead_csv(path, &read(path)?)
}

pub fn parse_mobility_csv(path: &Path, bytes: &[u8]) -> Result<Vec<MobilityRow>> {
    let mut rows = Vec::new();
    open(path, bytes, &MOBILITY_HEADER)?.for_each(|line, rec| {
        check_width(path, line, rec, 2)?;
        let mobility = float_field(path, line, rec, 1, "mobility_pct")?;
        if mobility <= 0.0 {
            return Err(parse_err(
                path,
                line,
                format!("mobility must be positive, got {mobility}"),
            ));
        }
        rows.push(MobilityRow {
            date: date_field(path, line, rec)?,
            mobility,
        });
        Ok(())
    })?;
    sorted_unique(path, rows, |r| r.date)
}

pub fn load_mobility_csv(path: &Path) -> Result<Vec<MobilityRow>> {
    parse_mobility_csv(path, &read(path)?)
}

fn describe_gaps(missing: &[NaiveDate]) -> String {
    let mut runs: Vec<(NaiveDate, NaiveDate)> = Vec::new();
    for &d in missing {
        match runs.last_mut() {
            Some((_, end)) if end.succ_opt() == Some(d) => *end = d,
            _ => runs.push((d, d)),
        }
    }
    runs.iter()
        .map(|(a, b)| if a == b { a.to_string() } else { format!("{a}..{b}") })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Date-joins the three sources over the span covered by both weather and
/// dispatch data. Every day of that span must be present in both.
pub fn merge(weather: &[WeatherRow], ead: &[EadRow], mobility: &[MobilityRow]) -> Result<Vec<MergedDay>> {
    let (Some(w0), Some(e0)) = (weather.first(), ead.first()) else {
        return Err(Error::Data("weather and dispatch files must both be nonempty".into()));
    };
    let start = w0.date.max(e0.date);
    let end = weather.last().unwrap().date.min(ead.last().unwrap().date);
    if end < start {
        return Err(Error::Data("weather and dispatch files do not overlap".into()));
    }
    let w: BTreeMap<NaiveDate, &WeatherRow> = weather.iter().map(|r| (r.date, r)).collect();
    let e: BTreeMap<NaiveDate, &EadRow> = ead.iter().map(|r| (r.date, r)).collect();
    let m: BTreeMap<NaiveDate, f64> = mobility.iter().map(|r| (r.date, r.mobility)).collect();

    let span: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).collect();
    let missing_w: Vec<NaiveDate> = span.iter().copied().filter(|d| !w.contains_key(d)).collect();
    let missing_e: Vec<NaiveDate> = span.iter().copied().filter(|d| !e.contains_key(d)).collect();
    if !missing_w.is_empty() || !missing_e.is_empty() {
        let mut msg = String::from("date gaps in merged span:");
        if !missing_w.is_empty() {
            let _ = write!(msg, " weather missing {}", describe_gaps(&missing_w));
        }
        if !missing_e.is_empty() {
            let _ = write!(msg, " dispatch missing {}", describe_gaps(&missing_e));
        }
        return Err(Error::Data(msg));
    }
    Ok(span
        .into_iter()
        .map(|d| MergedDay {
            date: d,
            tmax: w[&d].tmax,
            humidity: w[&d].humidity,
            ead: e[&d].counts,
            mobility: m.get(&d).copied(),
        })
        .collect())
}

/// Loads, merges, labels and gap-fills a dataset.
pub fn load_dataset(paths: &DatasetPaths, fill: &MobilityFill) -> Result<Vec<DailyRecord>> {
    let weather = load_weather_csv(&paths.weather)?;
    let ead = load_ead_csv(&paths.ead)?;
    let mobility = match &paths.mobility {
        Some(p) => load_mobility_csv(p)?,
        None => Vec::new(),
    };
    let holidays = match &paths.holidays {
        Some(p) => load_holidays(p)?,
        None => BTreeSet::new(),
    };
    let merged = merge(&weather, &ead, &mobility)?;
    let dates: Vec<NaiveDate> = merged.iter().map(|d| d.date).collect();
    let labels = build_calendar_labels(&dates, &holidays);
    fill_mobility(&merged, &labels, fill)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_weather_csv(path: &Path, rows: &[WeatherRow]) -> Result<()> {
    let mut s = WEATHER_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.date, r.tmax, r.humidity);
    }
    write_atomic(path, s.as_bytes())
}

pub fn write_ead_csv(path: &Path, rows: &[EadRow]) -> Result<()> {
    let mut s = EAD_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let c = &r.counts;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.date, c.all, c.children, c.adult, c.elderly, c.outdoor, c.indoor
        );
    }
    write_atomic(path, s.as_bytes())
}

pub fn write_mobility_csv(path: &Path, rows: &[MobilityRow]) -> Result<()> {
    let mut s = MOBILITY_HEADER.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{}", r.date, r.mobility);
    }
    write_atomic(path, s.as_bytes())
}

pub fn write_holidays(path: &Path, holidays: &BTreeSet<NaiveDate>) -> Result<()> {
    let mut s = String::from("# non-working days besides weekends\n");
    for d in holidays {
        let _ = writeln!(s, "{d}");
    }
    write_atomic(path, s.as_bytes())
}

/// Writes the input files of a generated dataset plus its ground truth
/// (`ground_truth.json`, `lambda.csv`) into `dir`.
pub fn write_dataset(dir: &Path, data: &SynthDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let weather: Vec<WeatherRow> = data
        .records
        .iter()
        .map(|r| WeatherRow {
            date: r.date,
            tmax: r.tmax,
            humidity: r.humidity,
        })
        .collect();
    let ead: Vec<EadRow> = data
        .records
        .iter()
        .map(|r| EadRow {
            date: r.date,
            counts: r.ead,
        })
        .collect();
    let mobility: Vec<MobilityRow> = data
        .records
        .iter()
        .zip(&data.mobility_observed)
        .filter(|(_, obs)| **obs)
        .map(|(r, _)| MobilityRow {
            date: r.date,
            mobility: r.mobility,
        })
        .collect();
    write_weather_csv(&dir.join("weather.csv"), &weather)?;
    write_ead_csv(&dir.join("ead.csv"), &ead)?;
    write_mobility_csv(&dir.join("mobility.csv"), &mobility)?;
    write_holidays(&dir.join("holidays.txt"), &data.holidays)?;

    let mut lam = String::from("date,lambda_all,mobility_true\n");
    for (r, l) in data.records.iter().zip(&data.lambda) {
        let _ = writeln!(lam, "{},{},{}", r.date, l, r.mobility);
    }
    write_atomic(&dir.join("lambda.csv"), lam.as_bytes())?;
    let json = serde_json::to_string_pretty(&data.truth).map_err(|e| Error::Data(e.to_string()))?;
    write_atomic(&dir.join("ground_truth.json"), json.as_bytes())
}
