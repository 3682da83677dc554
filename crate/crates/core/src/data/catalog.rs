//! Earthquake catalog ingestion.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};

use crate::{Error, Result};

/// One catalog row: event origin time, location label and magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub origin: DateTime<Utc>,
    pub location: String,
    pub magnitude: f64,
}

/// Accepts `MM/DD/YY`, `MM/DD/YYYY` and `YYYY-MM-DD`.
fn parse_date(s: &str, line: usize) -> Result<NaiveDate> {
    let s = s.trim();
    let fail = |msg: String| Error::Parse { line, msg };
    if s.contains('/') {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(fail(format!("bad date {s:?}")));
        }
        let month: u32 = parts[0].parse().map_err(|_| fail(format!("bad month in {s:?}")))?;
        let day: u32 = parts[1].parse().map_err(|_| fail(format!("bad day in {s:?}")))?;
        let mut year: i32 = parts[2].parse().map_err(|_| fail(format!("bad year in {s:?}")))?;
        if year < 100 {
            year += if year < 70 { 2000 } else { 1900 };
        }
        NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| fail(format!("bad date {s:?}")))
    } else {
        s.parse::<NaiveDate>()
            .map_err(|e| fail(format!("bad date {s:?}: {e}")))
    }
}

/// Accepts `HH:MM:SS` and tolerates a `.` in place of either `:`
/// (catalog sources are not always consistent).
fn parse_time_of_day(s: &str, line: usize) -> Result<NaiveTime> {
    let fail = |msg: String| Error::Parse { line, msg };
    let parts: Vec<&str> = s.trim().split([':', '.']).collect();
    if parts.len() != 3 {
        return Err(fail(format!("bad time {s:?}")));
    }
    let h: u32 = parts[0].parse().map_err(|_| fail(format!("bad hour in {s:?}")))?;
    let m: u32 = parts[1].parse().map_err(|_| fail(format!("bad minute in {s:?}")))?;
    let sec: u32 = parts[2].parse().map_err(|_| fail(format!("bad second in {s:?}")))?;
    NaiveTime::from_hms_opt(h, m, sec).ok_or_else(|| fail(format!("bad time {s:?}")))
}

/// Loads a catalog CSV with columns `date,time,location,magnitude`,
/// returning entries sorted by origin time.
pub fn load_catalog(path: &Path) -> Result<Vec<CatalogEntry>> {
    let file = fs::File::open(path)?;
    read_catalog(BufReader::new(file))
}

pub(crate) fn read_catalog<R: BufRead>(reader: R) -> Result<Vec<CatalogEntry>> {
    let mut entries = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let n = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if trimmed.to_ascii_lowercase().starts_with("date,") {
                continue;
            }
            // No header; fall through and parse as data.
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let date = parse_date(fields[0], n)?;
        let time = parse_time_of_day(fields[1], n)?;
        let magnitude: f64 = fields[3].parse().map_err(|e| Error::Parse {
            line: n,
            msg: format!("bad magnitude {:?}: {e}", fields[3]),
        })?;
        if magnitude < 0.0 {
            return Err(Error::Parse {
                line: n,
                msg: format!("negative magnitude {magnitude}"),
            });
        }
        entries.push(CatalogEntry {
            origin: date.and_time(time).and_utc(),
            location: fields[2].to_string(),
            magnitude,
        });
    }
    entries.sort_by_key(|e| e.origin);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regional_row() {
        let entries = read_catalog("date,time,location,magnitude\n11/19/17,12:37:44,Parma,4.4\n".as_bytes())
            .unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].magnitude, 4.4);
        assert_eq!(entries[0].location, "Parma");
        assert_eq!(entries[0].origin.to_rfc3339(), "2017-11-19T12:37:44+00:00");
    }

    #[test]
    fn tolerates_dot_in_time() {
        let entries =
            read_catalog("date,time,location,magnitude\n01/14/18,09:18.44,Peru,7.1\n".as_bytes())
                .unwrap();
        assert_eq!(entries[0].origin.to_rfc3339(), "2018-01-14T09:18:44+00:00");
        // Dot in the first position too.
        let entries =
            read_catalog("date,time,location,magnitude\n01/11/18,18.26:24,Myanmar,6.0\n".as_bytes())
                .unwrap();
        assert_eq!(entries[0].origin.to_rfc3339(), "2018-01-11T18:26:24+00:00");
    }

    #[test]
    fn empty_file_with_header() {
        let entries = read_catalog("date,time,location,magnitude\n".as_bytes()).unwrap();
        assert!(entries.is_empty());
    }

    #[test]
    fn sorted_by_origin() {
        let csv = "date,time,location,magnitude\n\
                   12/03/17,23:34:11,Amatrice,4.0\n\
                   11/19/17,12:10:12,Parma,3.3\n";
        let entries = read_catalog(csv.as_bytes()).unwrap();
        assert_eq!(entries[0].location, "Parma");
        assert_eq!(entries[1].location, "Amatrice");
    }

    #[test]
    fn bad_timestamp_reports_row() {
        let csv = "date,time,location,magnitude\n11/19/17,2pm,Parma,3.3\n";
        match read_catalog(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
