//! Time-series data model: channel metadata, gap-aware segments, multi-channel
//! records, unit conversion, hourly windowing and campaign storage.
//!
//! A [`TimeSeriesSegment`] is strictly contiguous: any timestamp discontinuity
//! larger than 1.5 sample intervals ends a segment. Windowing therefore
//! degrades gracefully across blackouts and sensor removals.

mod catalog;
mod csv;

pub use catalog::{load_catalog, CatalogEntry};
pub use csv::{
    ingest_csv, load_campaign, read_waveform_csv, store_campaign, write_waveform_csv,
};

use chrono::{DateTime, Duration, TimeZone, Utc};

use crate::{Error, Result};

/// Default analysis window length in seconds (one hour).
pub const DEFAULT_WINDOW_S: i64 = 3600;
/// Default minimum fraction of a window every channel must cover.
pub const DEFAULT_MIN_COVERAGE: f64 = 0.95;

/// Sensing axis of a tri-axial instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub fn as_str(&self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Y => "y",
            Component::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Component> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Some(Component::X),
            "y" => Some(Component::Y),
            "z" => Some(Component::Z),
            _ => None,
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical quantity a transducer measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorKind {
    /// Electrodynamic velocimeter; sensitivity in V/(m/s).
    Velocity,
    /// Accelerometer; sensitivity in V/(m/s²).
    Acceleration,
}

/// Unit of the stored sample values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Counts,
    Volts,
    MetersPerSecond,
    MetersPerSecond2,
    G,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Counts => "counts",
            Unit::Volts => "volts",
            Unit::MetersPerSecond => "m/s",
            Unit::MetersPerSecond2 => "m/s2",
            Unit::G => "g",
        }
    }

    pub fn parse(s: &str) -> Option<Unit> {
        match s.trim().to_ascii_lowercase().as_str() {
            "counts" => Some(Unit::Counts),
            "volts" | "v" => Some(Unit::Volts),
            "m/s" => Some(Unit::MetersPerSecond),
            "m/s2" | "m/s^2" | "m/s\u{b2}" => Some(Unit::MetersPerSecond2),
            "g" => Some(Unit::G),
            _ => None,
        }
    }

    /// True for units that already carry a physical meaning (not raw counts/volts).
    pub fn is_physical(&self) -> bool {
        matches!(
            self,
            Unit::MetersPerSecond | Unit::MetersPerSecond2 | Unit::G
        )
    }
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static description of one recording channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMeta {
    pub station: String,
    pub component: Component,
    /// Sensor height above the structure base, meters.
    pub height_m: f64,
    pub sensor_kind: SensorKind,
    /// Transducer sensitivity: V/(m/s) for velocimeters, V/(m/s²) for accelerometers.
    pub sensitivity: f64,
    pub sample_rate: f64,
}

impl ChannelMeta {
    pub fn new(
        station: impl Into<String>,
        component: Component,
        height_m: f64,
        sensor_kind: SensorKind,
        sensitivity: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        if sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(Error::Parameter(format!(
                "sample_rate must be positive, got {sample_rate}"
            )));
        }
        if sensitivity <= 0.0 || !sensitivity.is_finite() {
            return Err(Error::Parameter(format!(
                "sensitivity must be positive, got {sensitivity}"
            )));
        }
        Ok(Self {
            station: station.into(),
            component,
            height_m,
            sensor_kind,
            sensitivity,
            sample_rate,
        })
    }

    /// Channel label used in CSV outputs, e.g. `S942.x`.
    pub fn label(&self) -> String {
        format!("{}.{}", self.station, self.component)
    }
}

/// Nominal sample spacing in integer nanoseconds.
pub(crate) fn dt_nanos(rate: f64) -> i64 {
    (1.0e9 / rate).round() as i64
}

/// A strictly contiguous run of samples. A gap always ends a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSegment {
    pub start: DateTime<Utc>,
    pub rate: f64,
    pub unit: Unit,
    pub samples: Vec<f64>,
}

impl TimeSeriesSegment {
    pub fn new(start: DateTime<Utc>, rate: f64, unit: Unit, samples: Vec<f64>) -> Result<Self> {
        if rate <= 0.0 || !rate.is_finite() {
            return Err(Error::Parameter(format!("rate must be positive, got {rate}")));
        }
        Ok(Self {
            start,
            rate,
            unit,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    /// Timestamp of sample `k`.
    pub fn time_at(&self, k: usize) -> DateTime<Utc> {
        self.start + Duration::nanoseconds(k as i64 * dt_nanos(self.rate))
    }

    /// One sample interval past the last sample (exclusive end).
    pub fn end(&self) -> DateTime<Utc> {
        self.time_at(self.samples.len())
    }

    /// Samples with timestamps in `[t0, t1)`, or `None` when empty.
    pub fn slice_between(&self, t0: DateTime<Utc>, t1: DateTime<Utc>) -> Option<TimeSeriesSegment> {
        let dt = dt_nanos(self.rate);
        let from_start = |t: DateTime<Utc>| (t - self.start).num_nanoseconds().unwrap_or(i64::MAX);
        let k0 = div_ceil(from_start(t0), dt).max(0);
        let k1 = div_ceil(from_start(t1), dt).min(self.samples.len() as i64);
        if k1 <= k0 {
            return None;
        }
        Some(TimeSeriesSegment {
            start: self.time_at(k0 as usize),
            rate: self.rate,
            unit: self.unit,
            samples: self.samples[k0 as usize..k1 as usize].to_vec(),
        })
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    let d = a.div_euclid(b);
    if a.rem_euclid(b) != 0 {
        d + 1
    } else {
        d
    }
}

/// One channel: metadata plus its (time-ordered, non-overlapping) segments.
#[derive(Debug, Clone)]
pub struct Channel {
    pub meta: ChannelMeta,
    pub segments: Vec<TimeSeriesSegment>,
}

impl Channel {
    /// Total recorded duration across segments, seconds.
    pub fn covered_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s()).sum()
    }

    /// Concatenated samples, ignoring gaps. Only meaningful for gap-free channels.
    pub fn contiguous_samples(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.iter().map(|s| s.len()).sum());
        for s in &self.segments {
            out.extend_from_slice(&s.samples);
        }
        out
    }
}

/// Timestamped, gap-aware, multi-station waveform container.
#[derive(Debug, Clone)]
pub struct MultiChannelRecord {
    pub channels: Vec<Channel>,
}

impl MultiChannelRecord {
    /// Validates that segments within each channel are time-ordered and
    /// non-overlapping, and that (station, component, height) is unique.
    pub fn new(channels: Vec<Channel>) -> Result<Self> {
        for ch in &channels {
            for pair in ch.segments.windows(2) {
                if pair[1].start < pair[0].end() {
                    return Err(Error::Config(format!(
                        "channel {} has overlapping segments at {}",
                        ch.meta.label(),
                        pair[1].start
                    )));
                }
            }
        }
        for (i, a) in channels.iter().enumerate() {
            for b in channels.iter().skip(i + 1) {
                if a.meta.station == b.meta.station
                    && a.meta.component == b.meta.component
                    && a.meta.height_m == b.meta.height_m
                {
                    return Err(Error::Config(format!(
                        "duplicate channel {} at height {} m",
                        a.meta.label(),
                        a.meta.height_m
                    )));
                }
            }
        }
        Ok(Self { channels })
    }

    pub fn channel(&self, station: &str, component: Component) -> Option<&Channel> {
        self.channels
            .iter()
            .find(|c| c.meta.station == station && c.meta.component == component)
    }

    /// Earliest segment start and latest segment end over all channels.
    pub fn time_span(&self) -> Option<(DateTime<Utc>, DateTime<Utc>)> {
        let mut lo: Option<DateTime<Utc>> = None;
        let mut hi: Option<DateTime<Utc>> = None;
        for ch in &self.channels {
            for s in &ch.segments {
                if s.is_empty() {
                    continue;
                }
                lo = Some(lo.map_or(s.start, |v| v.min(s.start)));
                hi = Some(hi.map_or(s.end(), |v| v.max(s.end())));
            }
        }
        lo.zip(hi)
    }

    /// The shared sample rate, if all channels agree.
    pub fn common_rate(&self) -> Option<f64> {
        let mut rates = self.channels.iter().map(|c| c.meta.sample_rate);
        let first = rates.next()?;
        rates.all(|r| r == first).then_some(first)
    }
}

/// Converts raw counts or volts to physical units using the channel sensitivity.
///
/// `digitizer_gain` is in volts per count and is only used for count input.
pub fn counts_to_physical(
    segment: &TimeSeriesSegment,
    meta: &ChannelMeta,
    digitizer_gain: f64,
) -> Result<TimeSeriesSegment> {
    let volts_scale = match segment.unit {
        Unit::Counts => digitizer_gain,
        Unit::Volts => 1.0,
        other => {
            return Err(Error::InvalidState(format!(
                "segment already in physical unit {other}"
            )))
        }
    };
    let scale = volts_scale / meta.sensitivity;
    let unit = match meta.sensor_kind {
        SensorKind::Velocity => Unit::MetersPerSecond,
        SensorKind::Acceleration => Unit::MetersPerSecond2,
    };
    Ok(TimeSeriesSegment {
        start: segment.start,
        rate: segment.rate,
        unit,
        samples: segment.samples.iter().map(|v| v * scale).collect(),
    })
}

/// Splits a record into fixed-length windows aligned to wall-clock boundaries.
///
/// A window is emitted only when every channel of the record covers at least
/// `min_coverage` of it. Windows are aligned to multiples of `window_s` since
/// the UTC epoch, so the default 3600 s aligns to whole hours.
pub fn segment_hourly(
    record: &MultiChannelRecord,
    window_s: i64,
    min_coverage: f64,
) -> Vec<MultiChannelRecord> {
    let Some((lo, hi)) = record.time_span() else {
        return Vec::new();
    };
    if window_s <= 0 || record.channels.is_empty() {
        return Vec::new();
    }
    let first = lo.timestamp().div_euclid(window_s) * window_s;
    let mut out = Vec::new();
    let mut w = first;
    while w < hi.timestamp() {
        let t0 = Utc.timestamp_opt(w, 0).unwrap();
        let t1 = Utc.timestamp_opt(w + window_s, 0).unwrap();
        let mut channels = Vec::with_capacity(record.channels.len());
        let mut ok = true;
        for ch in &record.channels {
            let segs: Vec<TimeSeriesSegment> = ch
                .segments
                .iter()
                .filter_map(|s| s.slice_between(t0, t1))
                .collect();
            let covered: f64 = segs.iter().map(|s| s.duration_s()).sum();
            if covered < min_coverage * window_s as f64 {
                ok = false;
                break;
            }
            channels.push(Channel {
                meta: ch.meta.clone(),
                segments: segs,
            });
        }
        if ok {
            out.push(MultiChannelRecord { channels });
        }
        w += window_s;
    }
    out
}
