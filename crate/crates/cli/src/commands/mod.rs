//! Subcommand implementations.

pub mod correlate;
pub mod events;
pub mod identify;
pub mod ingest;
pub mod levels;
pub mod report;
pub mod simulate;
pub mod spectrogram;
pub mod tilt;
pub mod track;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};

use ambvib::data::{ChannelMeta, Component, MultiChannelRecord, SensorKind, TimeSeriesSegment, Unit};
use ambvib::modal::{EnvKind, EnvSeries};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

/// Environment variable naming the default campaign root.
pub const ROOT_ENV: &str = "AMBVIB_ROOT";

/// Resolution order: explicit flag, then AMBVIB_ROOT, then the config.
pub fn resolve_data_dir(flag: Option<PathBuf>, config: &PipelineConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&config.campaign.root))
}

/// Channel metadata: from the config when given, otherwise discovered from
/// the campaign files (station/component/unit read from the rows, rate
/// inferred from the first sample spacing).
pub fn channel_metas(data: &Path, config: &PipelineConfig) -> CliResult<Vec<ChannelMeta>> {
    if !config.channel.is_empty() {
        return config.channel.iter().map(|c| c.to_meta()).collect();
    }
    discover_channels(data)
}

fn discover_channels(root: &Path) -> CliResult<Vec<ChannelMeta>> {
    if !root.is_dir() {
        return Err(CliError::Data(format!(
            "campaign directory {} does not exist",
            root.display()
        )));
    }
    let mut metas: Vec<ChannelMeta> = Vec::new();
    let mut stations: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    stations.sort();
    for dir in stations {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
            .collect();
        files.sort();
        let Some(first) = files.first() else { continue };
        // First two timestamps per channel give the rate; unit gives the
        // sensor kind. Raw counts need explicit [[channel]] config.
        let mut seen: BTreeMap<(String, Component), (DateTime<Utc>, Option<DateTime<Utc>>, Unit)> =
            BTreeMap::new();
        let reader = BufReader::new(fs::File::open(first)?);
        for line in reader.lines().take(100_000) {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with("timestamp") {
                continue;
            }
            let fields: Vec<&str> = t.split(',').collect();
            if fields.len() != 5 {
                continue;
            }
            let (Ok(ts), Some(comp), Some(unit)) = (
                fields[0].parse::<DateTime<Utc>>(),
                Component::parse(fields[2]),
                Unit::parse(fields[4]),
            ) else {
                continue;
            };
            let key = (fields[1].to_string(), comp);
            match seen.get_mut(&key) {
                None => {
                    seen.insert(key, (ts, None, unit));
                }
                Some((_, second @ None, _)) => *second = Some(ts),
                Some(_) => {}
            }
            if seen.values().all(|v| v.1.is_some()) && seen.len() >= 3 {
                break;
            }
        }
        for ((station, comp), (t0, t1, unit)) in seen {
            let Some(t1) = t1 else { continue };
            let dt_ns = (t1 - t0).num_nanoseconds().unwrap_or(0);
            if dt_ns <= 0 {
                continue;
            }
            let rate = (1.0e9 / dt_ns as f64 * 1000.0).round() / 1000.0;
            let kind = match unit {
                Unit::MetersPerSecond => SensorKind::Velocity,
                Unit::MetersPerSecond2 | Unit::G => SensorKind::Acceleration,
                Unit::Counts | Unit::Volts => {
                    return Err(CliError::Usage(format!(
                        "channel {station}.{comp} holds raw {unit}; declare [[channel]] metadata in the config"
                    )))
                }
            };
            metas.push(ChannelMeta::new(station, comp, 0.0, kind, 1.0, rate)?);
        }
    }
    if metas.is_empty() {
        return Err(CliError::Data(format!(
            "no waveform data found under {}",
            root.display()
        )));
    }
    Ok(metas)
}

/// Loads the campaign and fails loudly when it holds no samples.
pub fn load_campaign_checked(data: &Path, metas: &[ChannelMeta]) -> CliResult<MultiChannelRecord> {
    let record = ambvib::data::load_campaign(data, metas)?;
    if record.time_span().is_none() {
        return Err(CliError::Data(format!(
            "no waveform data found under {}",
            data.display()
        )));
    }
    Ok(record)
}

/// Creates an output CSV carrying the config digest as its first line.
pub fn create_csv(
    out_dir: &Path,
    name: &str,
    digest: &str,
    header: &str,
) -> CliResult<BufWriter<fs::File>> {
    fs::create_dir_all(out_dir)?;
    let mut w = BufWriter::new(fs::File::create(out_dir.join(name))?);
    writeln!(w, "# config {digest}")?;
    writeln!(w, "{header}")?;
    Ok(w)
}

/// Reads an environmental CSV (`timestamp,value`, `#` comments allowed).
pub fn load_env_series(path: &Path, kind: EnvKind) -> CliResult<EnvSeries> {
    let reader = BufReader::new(
        fs::File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?,
    );
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("timestamp") {
            continue;
        }
        let mut fields = t.split(',');
        let (Some(ts), Some(value)) = (fields.next(), fields.next()) else {
            return Err(CliError::Data(format!(
                "{}:{}: expected timestamp,value",
                path.display(),
                lineno + 1
            )));
        };
        let ts: DateTime<Utc> = ts.trim().parse().map_err(|e| {
            CliError::Data(format!("{}:{}: bad timestamp: {e}", path.display(), lineno + 1))
        })?;
        let value: f64 = value.trim().parse().map_err(|e| {
            CliError::Data(format!("{}:{}: bad value: {e}", path.display(), lineno + 1))
        })?;
        samples.push((ts, value));
    }
    samples.sort_by_key(|s| s.0);
    Ok(EnvSeries::new(kind, samples)?)
}

/// Finds a channel by `station.component` label.
pub fn find_channel<'a>(
    record: &'a MultiChannelRecord,
    label: &str,
) -> CliResult<&'a ambvib::data::Channel> {
    record
        .channels
        .iter()
        .find(|c| c.meta.label() == label)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "channel {label:?} not found; available: {}",
                record
                    .channels
                    .iter()
                    .map(|c| c.meta.label())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
}

/// Longest contiguous segment of a channel.
pub fn longest_segment(ch: &ambvib::data::Channel) -> CliResult<&TimeSeriesSegment> {
    ch.segments
        .iter()
        .max_by_key(|s| s.len())
        .ok_or_else(|| CliError::Data(format!("channel {} has no data", ch.meta.label())))
}

pub fn format_utc(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
