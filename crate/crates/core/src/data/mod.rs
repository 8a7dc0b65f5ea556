//! Daily covariates and dispatch counts: ingestion, gap filling, windowing
//! and synthetic generation.

mod calendar;
mod io;
mod mobility;
mod synth;
mod windows;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calendar::{build_calendar_labels, load_holidays, parse_holidays};
pub use io::{
    load_dataset, load_ead_csv, load_mobility_csv, load_weather_csv, merge, write_atomic, write_dataset, write_ead_csv,
    write_holidays, write_mobility_csv, write_weather_csv, DatasetPaths, EadRow, MergedDay, MobilityRow, WeatherRow,
};
pub use mobility::{fill_mobility, MobilityFill};
pub use synth::{synth_generate, GroundTruth, MobilityKnot, SynthConfig, SynthDataset};
pub use windows::{make_target_windows, make_windows, records_in_span, FeatureWindow};

/// Dispatch category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    All,
    Children,
    Adult,
    Elderly,
    Outdoor,
    Indoor,
}

impl GroupKey {
    pub const ALL: [GroupKey; 6] = [
        GroupKey::All,
        GroupKey::Children,
        GroupKey::Adult,
        GroupKey::Elderly,
        GroupKey::Outdoor,
        GroupKey::Indoor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::All => "all",
            GroupKey::Children => "children",
            GroupKey::Adult => "adult",
            GroupKey::Elderly => "elderly",
            GroupKey::Outdoor => "outdoor",
            GroupKey::Indoor => "indoor",
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GroupKey::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown group `{s}`")))
    }
}

/// Counts per category for one day.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub all: u32,
    pub children: u32,
    pub adult: u32,
    pub elderly: u32,
    pub outdoor: u32,
    pub indoor: u32,
}

impl GroupCounts {
    pub fn get(&self, g: GroupKey) -> u32 {
        match g {
            GroupKey::All => self.all,
            GroupKey::Children => self.children,
            GroupKey::Adult => self.adult,
            GroupKey::Elderly => self.elderly,
            GroupKey::Outdoor => self.outdoor,
            GroupKey::Indoor => self.indoor,
        }
    }

    /// Age groups and location groups each sum to `all`.
    pub fn is_consistent(&self) -> bool {
        self.children + self.adult + self.elderly == self.all && self.outdoor + self.indoor == self.all
    }
}

/// One calendar day of fused covariates and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    /// Daily maximum temperature, °C.
    pub tmax: f64,
    /// Daily mean relative humidity, percent.
    pub humidity: f64,
    /// Percent of baseline presence; 100 is the baseline.
    pub mobility: f64,
    /// 1 on working days, 0 on weekends and holidays.
    pub day_label: u8,
    pub ead: GroupCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Temperature,
    Humidity,
    DayLabel,
    Mobility,
}

impl Feature {
    pub const ORDER: [Feature; 4] = [
        Feature::Temperature,
        Feature::Humidity,
        Feature::DayLabel,
        Feature::Mobility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::Temperature => "temperature",
            Feature::Humidity => "humidity",
            Feature::DayLabel => "day_label",
            Feature::Mobility => "mobility",
        }
    }

    pub fn value(self, r: &DailyRecord) -> f64 {
        match self {
            Feature::Temperature => r.tmax,
            Feature::Humidity => r.humidity,
            Feature::DayLabel => f64::from(r.day_label),
            Feature::Mobility => r.mobility,
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "temperature" | "tmax" | "temp" => Ok(Feature::Temperature),
            "humidity" | "hum" => Ok(Feature::Humidity),
            "day_label" | "daylabel" | "label" => Ok(Feature::DayLabel),
            "mobility" | "mob" => Ok(Feature::Mobility),
            other => Err(Error::Config(format!("unknown feature `{other}`"))),
        }
    }
}

/// Enabled input features. Column order is always
/// temperature, humidity, day label, mobility.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureMask {
    pub temperature: bool,
    pub humidity: bool,
    pub day_label: bool,
    pub mobility: bool,
}

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::all()
    }
}

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask {
            temperature: true,
            humidity: true,
            day_label: true,
            mobility: true,
        }
    }

    pub fn without(mut self, f: Feature) -> Self {
        *self.flag_mut(f) = false;
        self
    }

    pub fn contains(&self, f: Feature) -> bool {
        match f {
            Feature::Temperature => self.temperature,
            Feature::Humidity => self.humidity,
            Feature::DayLabel => self.day_label,
            Feature::Mobility => self.mobility,
        }
    }

    fn flag_mut(&mut self, f: Feature) -> &mut bool {
        match f {
            Feature::Temperature => &mut self.temperature,
            Feature::Humidity => &mut self.humidity,
            Feature::DayLabel => &mut self.day_label,
            Feature::Mobility => &mut self.mobility,
        }
    }

    pub fn features(&self) -> Vec<Feature> {
        Feature::ORDER.into_iter().filter(|f| self.contains(*f)).collect()
    }

    pub fn width(&self) -> usize {
        self.features().len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width() == 0 {
            return Err(Error::Config("feature mask enables no features".into()));
        }
        Ok(())
    }

    /// Compact code used in checkpoints and file names, e.g. `thdm`.
    pub fn code(&self) -> String {
        self.features()
            .iter()
            .map(|f| match f {
                Feature::Temperature => 't',
                Feature::Humidity => 'h',
                Feature::DayLabel => 'd',
                Feature::Mobility => 'm',
            })
            .collect()
    }

    /// Parses a comma-separated list such as `temperature,humidity,day_label`,
    /// or the shorthand `all`.
    pub fn parse_list(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(FeatureMask::all());
        }
        let mut mask = FeatureMask {
            temperature: false,
            humidity: false,
            day_label: false,
            mobility: false,
        };
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            *mask.flag_mut(part.parse()?) = true;
        }
        mask.validate()?;
        Ok(mask)
    }
}

impl TryFrom<String> for FeatureMask {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        FeatureMask::parse_list(&s)
    }
}

impl From<FeatureMask> for String {
    fn from(m: FeatureMask) -> String {
        m.to_string()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.features().iter().map(|f| f.as_str()).collect();
        f.write_str(&names.join(","))
    }
}

/// Inclusive calendar span.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DateSpan {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateSpan {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("span end {end} precedes start {start}")));
        }
        Ok(DateSpan { start, end })
    }

    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> {
        let end = self.end;
        self.start.iter_days().take_while(move |d| *d <= end)
    }
}

impl FromStr for DateSpan {
    type Err = Error;

    /// `YYYY-MM-DD..YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("span `{s}` is not START..END")))?;
        DateSpan::new(parse_date(a)?, parse_date(b)?)
    }
}

impl TryFrom<String> for DateSpan {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DateSpan> for String {
    fn from(s: DateSpan) -> String {
        s.to_string()
    }
}

impl fmt::Display for DateSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Config(format!("bad date `{s}`: {e}")))
}
