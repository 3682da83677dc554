//! Waveform CSV schema and campaign storage layout.
//!
//! Schema: `timestamp,station,component,value,unit` with ISO-8601 UTC
//! timestamps. Values are written with Rust's shortest round-trip float
//! formatting, so a write→read cycle reproduces sample values bit for bit.
//!
//! Campaign layout: one directory per station, one CSV per UTC day
//! (`<root>/<station>/<YYYY-MM-DD>.csv`). Lines starting with `#` are
//! treated as comments.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};

use super::{dt_nanos, Channel, ChannelMeta, Component, MultiChannelRecord, TimeSeriesSegment, Unit};
use crate::{Error, Result};

const HEADER: &str = "timestamp,station,component,value,unit";
const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.9fZ";

/// Gap rule: a discontinuity longer than 1.5 nominal sample intervals
/// terminates the current segment.
const GAP_FACTOR: f64 = 1.5;

fn format_time(t: DateTime<Utc>) -> String {
    t.format(TS_FORMAT).to_string()
}

fn parse_time(s: &str, line: usize) -> Result<DateTime<Utc>> {
    s.parse::<DateTime<Utc>>().map_err(|e| Error::Parse {
        line,
        msg: format!("bad timestamp {s:?}: {e}"),
    })
}

/// Writes a record in the waveform CSV schema, rows ordered by (time, channel).
/// An optional comment (e.g. a config digest) is emitted as a `#` line
/// before the header; readers skip it.
pub fn write_waveform_csv<W: Write>(
    out: &mut W,
    record: &MultiChannelRecord,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{HEADER}")?;
    // Streaming merge over per-channel segment cursors keeps memory flat.
    struct Cursor<'a> {
        ch: usize,
        meta: &'a ChannelMeta,
        seg: &'a TimeSeriesSegment,
        idx: usize,
        t: i64,
        dt: i64,
    }
    let mut cursors: Vec<Cursor> = Vec::new();
    let mut pending: Vec<std::slice::Iter<TimeSeriesSegment>> = Vec::new();
    for ch in &record.channels {
        pending.push(ch.segments.iter());
    }
    for (i, iter) in pending.iter_mut().enumerate() {
        for seg in iter.by_ref() {
            if seg.is_empty() {
                continue;
            }
            cursors.push(Cursor {
                ch: i,
                meta: &record.channels[i].meta,
                seg,
                idx: 0,
                t: seg.start.timestamp_nanos_opt().unwrap_or(0),
                dt: dt_nanos(seg.rate),
            });
        }
    }
    while !cursors.is_empty() {
        let k = cursors
            .iter()
            .enumerate()
            .min_by_key(|(_, c)| (c.t, c.ch))
            .map(|(k, _)| k)
            .unwrap();
        {
            let c = &mut cursors[k];
            let time = DateTime::<Utc>::from_timestamp_nanos(c.t);
            writeln!(
                out,
                "{},{},{},{},{}",
                format_time(time),
                c.meta.station,
                c.meta.component,
                c.seg.samples[c.idx],
                c.seg.unit
            )?;
            c.idx += 1;
            c.t += c.dt;
        }
        if cursors[k].idx >= cursors[k].seg.len() {
            cursors.swap_remove(k);
        }
    }
    Ok(())
}

#[derive(Debug)]
struct RawRow {
    t_nanos: i64,
    value: f64,
    unit: Unit,
}

/// Splits a time-ordered row stream into contiguous segments at gaps.
fn build_segments(rows: &[RawRow], meta: &ChannelMeta) -> Result<Vec<TimeSeriesSegment>> {
    let dt = dt_nanos(meta.sample_rate);
    let mut segments = Vec::new();
    let mut start = 0usize;
    for i in 1..=rows.len() {
        let split = if i == rows.len() {
            true
        } else {
            let step = rows[i].t_nanos - rows[i - 1].t_nanos;
            if step <= 0 {
                return Err(Error::Config(format!(
                    "channel {}: non-increasing timestamps",
                    meta.label()
                )));
            }
            if (step as f64) < 0.5 * dt as f64 {
                return Err(Error::Config(format!(
                    "channel {}: sample spacing {} ns is faster than the declared rate {} Hz",
                    meta.label(),
                    step,
                    meta.sample_rate
                )));
            }
            step as f64 > GAP_FACTOR * dt as f64
        };
        if split {
            let chunk = &rows[start..i];
            let unit = chunk[0].unit;
            if chunk.iter().any(|r| r.unit != unit) {
                return Err(Error::Config(format!(
                    "channel {}: mixed units within one segment",
                    meta.label()
                )));
            }
            segments.push(TimeSeriesSegment {
                start: DateTime::<Utc>::from_timestamp_nanos(chunk[0].t_nanos),
                rate: meta.sample_rate,
                unit,
                samples: chunk.iter().map(|r| r.value).collect(),
            });
            start = i;
        }
    }
    Ok(segments)
}

fn parse_rows<R: BufRead>(
    reader: R,
    metas: &[ChannelMeta],
    rows: &mut BTreeMap<usize, Vec<RawRow>>,
) -> Result<()> {
    let mut header_seen = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let n = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !header_seen {
            if trimmed != HEADER {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected header {HEADER:?}, got {trimmed:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let mut fields = trimmed.split(',');
        let (ts, station, comp, value, unit) = match (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) {
            (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
            _ => {
                return Err(Error::Parse {
                    line: n,
                    msg: "expected 5 comma-separated fields".into(),
                })
            }
        };
        let component = Component::parse(comp).ok_or_else(|| Error::Parse {
            line: n,
            msg: format!("unknown component {comp:?}"),
        })?;
        let Some(idx) = metas
            .iter()
            .position(|m| m.station == station && m.component == component)
        else {
            // Rows for channels the caller did not request are skipped.
            continue;
        };
        let t = parse_time(ts, n)?;
        let value: f64 = value.parse().map_err(|e| Error::Parse {
            line: n,
            msg: format!("bad value {value:?}: {e}"),
        })?;
        let unit = Unit::parse(unit).ok_or_else(|| Error::Parse {
            line: n,
            msg: format!("unknown unit {unit:?}"),
        })?;
        rows.entry(idx).or_default().push(RawRow {
            t_nanos: t.timestamp_nanos_opt().unwrap_or(0),
            value,
            unit,
        });
    }
    Ok(())
}

/// Reads one waveform CSV into a record, splitting segments at any timestamp
/// discontinuity larger than 1.5 sample intervals. Rows whose (station,
/// component) is absent from `metas` are ignored.
pub fn read_waveform_csv<R: BufRead>(reader: R, metas: &[ChannelMeta]) -> Result<MultiChannelRecord> {
    let mut rows: BTreeMap<usize, Vec<RawRow>> = BTreeMap::new();
    parse_rows(reader, metas, &mut rows)?;
    assemble(metas, rows)
}

fn assemble(
    metas: &[ChannelMeta],
    rows: BTreeMap<usize, Vec<RawRow>>,
) -> Result<MultiChannelRecord> {
    let mut channels = Vec::with_capacity(metas.len());
    for (idx, meta) in metas.iter().enumerate() {
        let segments = match rows.get(&idx) {
            Some(r) => build_segments(r, meta)?,
            None => Vec::new(),
        };
        channels.push(Channel {
            meta: meta.clone(),
            segments,
        });
    }
    MultiChannelRecord::new(channels)
}

/// Reads a waveform CSV file from disk. See [`read_waveform_csv`].
pub fn ingest_csv(path: &Path, metas: &[ChannelMeta]) -> Result<MultiChannelRecord> {
    let file = fs::File::open(path)?;
    read_waveform_csv(BufReader::new(file), metas)
}

/// Writes a record into the campaign layout: one directory per station,
/// one CSV per UTC day holding all of that station's components.
pub fn store_campaign(root: &Path, record: &MultiChannelRecord, comment: Option<&str>) -> Result<()> {
    // Group channels by station, then split each station's data at UTC
    // day boundaries and emit one file per day.
    let mut stations: BTreeMap<&str, Vec<&Channel>> = BTreeMap::new();
    for ch in &record.channels {
        stations.entry(&ch.meta.station).or_default().push(ch);
    }
    for (station, chans) in stations {
        let dir = root.join(station);
        fs::create_dir_all(&dir)?;
        let station_rec = MultiChannelRecord {
            channels: chans.iter().map(|c| (*c).clone()).collect(),
        };
        let (lo, hi) = match station_rec.time_span() {
            Some(span) => span,
            None => continue,
        };
        let mut day = lo.date_naive();
        let last = (hi - Duration::nanoseconds(1)).date_naive();
        while day <= last {
            let t0 = day.and_hms_opt(0, 0, 0).unwrap().and_utc();
            let t1 = t0 + Duration::days(1);
            let channels: Vec<Channel> = chans
                .iter()
                .map(|c| Channel {
                    meta: c.meta.clone(),
                    segments: c
                        .segments
                        .iter()
                        .filter_map(|s| s.slice_between(t0, t1))
                        .collect(),
                })
                .filter(|c| !c.segments.is_empty())
                .collect();
            if !channels.is_empty() {
                let path = dir.join(format!("{}.csv", day.format("%Y-%m-%d")));
                let file = fs::File::create(&path)?;
                let mut w = BufWriter::new(file);
                write_waveform_csv(&mut w, &MultiChannelRecord { channels }, comment)?;
                w.flush()?;
            }
            day = day.succ_opt().unwrap();
        }
    }
    Ok(())
}

/// Loads the requested channels from a campaign directory tree, merging
/// day files back into continuous segments where no real gap exists.
pub fn load_campaign(root: &Path, metas: &[ChannelMeta]) -> Result<MultiChannelRecord> {
    let mut rows: BTreeMap<usize, Vec<RawRow>> = BTreeMap::new();
    let mut stations: Vec<&str> = metas.iter().map(|m| m.station.as_str()).collect();
    stations.sort_unstable();
    stations.dedup();
    for station in stations {
        let dir = root.join(station);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<_> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
            .collect();
        files.sort();
        for path in files {
            let file = fs::File::open(&path)?;
            parse_rows(BufReader::new(file), metas, &mut rows)?;
        }
    }
    for r in rows.values_mut() {
        r.sort_by_key(|row| row.t_nanos);
    }
    assemble(metas, rows)
}
