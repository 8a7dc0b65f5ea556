use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::error::{Error, Result};

/// 0 for Saturdays, Sundays and listed holidays, 1 otherwise.
pub fn build_calendar_labels(dates: &[NaiveDate], holidays: &BTreeSet<NaiveDate>) -> Vec<u8> {
    dates
        .iter()
        .map(|d| {
            let weekend = matches!(d.weekday(), Weekday::Sat | Weekday::Sun);
            u8::from(!(weekend || holidays.contains(d)))
        })
        .collect()
}

/// One ISO date per line; `#` starts a comment.
pub fn parse_holidays(text: &str, path: &Path) -> Result<BTreeSet<NaiveDate>> {
    let mut out = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let d = NaiveDate::parse_from_str(content, "%Y-%m-%d").map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n as u64 + 1,
            message: format!("bad holiday date `{content}`: {e}"),
        })?;
        out.insert(d);
    }
    Ok(out)
}

pub fn load_holidays(path: &Path) -> Result<BTreeSet<NaiveDate>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_holidays(&text, path)
}
