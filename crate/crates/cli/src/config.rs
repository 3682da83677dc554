//! Pipeline configuration: one TOML file with a section per module.
//! Every field has a documented default, so an empty (or absent) file is
//! a valid configuration.

use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use ambvib::data::{ChannelMeta, Component, SensorKind};
use ambvib::modal::BaselineMode;
use ambvib::response::TeleseismConfig;
use ambvib::ssi::SsiConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub campaign: CampaignSection,
    pub channel: Vec<ChannelSection>,
    pub window: WindowSection,
    pub ssi: SsiSection,
    pub ema: EmaSection,
    pub tracking: TrackingSection,
    pub env: EnvSection,
    pub events: EventsSection,
    pub tilt: TiltSection,
    pub spectrogram: SpectrogramSection,
    pub simulator: SimulatorSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    /// Default campaign root; `--data` and `AMBVIB_ROOT` take precedence.
    pub root: String,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self { root: "data".into() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub station: String,
    pub component: String,
    #[serde(default)]
    pub height_m: f64,
    /// "velocity" or "acceleration".
    pub sensor: String,
    /// V/(m/s) or V/(m/s²).
    #[serde(default = "one")]
    pub sensitivity: f64,
    pub rate_hz: f64,
}

fn one() -> f64 {
    1.0
}

impl ChannelSection {
    pub fn to_meta(&self) -> CliResult<ChannelMeta> {
        let component = Component::parse(&self.component)
            .ok_or_else(|| CliError::Usage(format!("bad component {:?}", self.component)))?;
        let kind = match self.sensor.as_str() {
            "velocity" => SensorKind::Velocity,
            "acceleration" => SensorKind::Acceleration,
            other => return Err(CliError::Usage(format!("bad sensor kind {other:?}"))),
        };
        Ok(ChannelMeta::new(
            &self.station,
            component,
            self.height_m,
            kind,
            self.sensitivity,
            self.rate_hz,
        )?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    pub seconds: i64,
    pub min_coverage: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self { seconds: 3600, min_coverage: 0.95 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsiSection {
    /// 0 derives the default from the sample rate.
    pub block_rows: usize,
    pub order_min: usize,
    pub order_max: usize,
    pub order_step: usize,
    pub freq_tol_pct: f64,
    pub damping_tol_pct: f64,
    pub mac_min: f64,
    pub min_cluster_fraction: f64,
    pub distance_cap: f64,
}

impl Default for SsiSection {
    fn default() -> Self {
        Self {
            block_rows: 0,
            order_min: 2,
            order_max: 40,
            order_step: 2,
            freq_tol_pct: 1.0,
            damping_tol_pct: 5.0,
            mac_min: 0.95,
            min_cluster_fraction: 1.0 / 3.0,
            distance_cap: 0.02,
        }
    }
}

impl SsiSection {
    pub fn to_config(&self, rate_hz: f64) -> SsiConfig {
        let mut config = SsiConfig::for_rate(rate_hz);
        if self.block_rows > 0 {
            config.block_rows = self.block_rows;
        }
        config.orders = (self.order_min..=self.order_max)
            .step_by(self.order_step.max(1))
            .collect();
        config.freq_tol = self.freq_tol_pct / 100.0;
        config.damping_tol = self.damping_tol_pct / 100.0;
        config.mac_min = self.mac_min;
        config.min_cluster_fraction = self.min_cluster_fraction;
        config.distance_cap = self.distance_cap;
        config
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmaSection {
    pub nfft: usize,
    pub overlap: f64,
    /// Station whose channels act as the measured input.
    pub input_station: String,
    pub min_prominence_decades: f64,
    pub band_hz: [f64; 2],
    pub tikhonov_eps: f64,
}

impl Default for EmaSection {
    fn default() -> Self {
        Self {
            nfft: 4096,
            overlap: 0.5,
            input_station: "S942".into(),
            min_prominence_decades: 0.5,
            band_hz: [0.5, 6.0],
            tikhonov_eps: ambvib::ema::DEFAULT_TIKHONOV_EPS,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineEntry {
    pub label: String,
    pub freq_hz: f64,
    #[serde(default)]
    pub shape_re: Vec<f64>,
    #[serde(default)]
    pub shape_im: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingSection {
    pub f_tol_pct: f64,
    pub mac_min: f64,
    pub baseline: Vec<BaselineEntry>,
}

impl Default for TrackingSection {
    fn default() -> Self {
        // Long-term mean frequencies of the reference campaign; a fifth
        // entry near 5.7 Hz can be added in the config file.
        let baseline = [1.0281, 1.2813, 4.0524, 4.4858]
            .iter()
            .enumerate()
            .map(|(k, &f)| BaselineEntry {
                label: format!("f{}", k + 1),
                freq_hz: f,
                shape_re: Vec::new(),
                shape_im: Vec::new(),
            })
            .collect();
        Self { f_tol_pct: 5.0, mac_min: 0.8, baseline }
    }
}

impl TrackingSection {
    pub fn baseline_modes(&self) -> CliResult<Vec<BaselineMode>> {
        self.baseline
            .iter()
            .map(|b| {
                let shape = if b.shape_re.is_empty() {
                    None
                } else {
                    if !b.shape_im.is_empty() && b.shape_im.len() != b.shape_re.len() {
                        return Err(CliError::Usage(format!(
                            "baseline {}: shape_re/shape_im lengths differ",
                            b.label
                        )));
                    }
                    Some(
                        b.shape_re
                            .iter()
                            .enumerate()
                            .map(|(k, &re)| {
                                Complex64::new(re, b.shape_im.get(k).copied().unwrap_or(0.0))
                            })
                            .collect(),
                    )
                };
                Ok(BaselineMode { label: b.label.clone(), freq_hz: b.freq_hz, shape })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub temperature_csv: Option<String>,
    pub wind_csv: Option<String>,
    pub max_lag_h: i64,
    pub regime_split_c: Option<f64>,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            temperature_csv: None,
            wind_csv: None,
            max_lag_h: 12,
            regime_split_c: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventsSection {
    /// Channel label ("S942.x"); default: the first discovered channel.
    pub channel: Option<String>,
    pub sta_s: f64,
    pub lta_s: f64,
    pub trigger_on: f64,
    pub trigger_off: f64,
    pub band_hz: [f64; 2],
    pub envelope_s: f64,
    pub threshold_k: f64,
    pub merge_gap_s: f64,
    pub taper_s: f64,
    pub edge_guard_s: f64,
    pub catalog_csv: Option<String>,
    pub regional_window_min: f64,
    pub teleseism_window_min: f64,
}

impl Default for EventsSection {
    fn default() -> Self {
        let t = TeleseismConfig::default();
        Self {
            channel: None,
            sta_s: 1.0,
            lta_s: 30.0,
            trigger_on: 4.0,
            trigger_off: 1.5,
            band_hz: [t.band_hz.0, t.band_hz.1],
            envelope_s: t.envelope_s,
            threshold_k: t.threshold_k,
            merge_gap_s: t.merge_gap_s,
            taper_s: t.taper_s,
            edge_guard_s: t.edge_guard_s,
            catalog_csv: None,
            regional_window_min: 5.0,
            teleseism_window_min: 30.0,
        }
    }
}

impl EventsSection {
    pub fn teleseism_config(&self) -> TeleseismConfig {
        TeleseismConfig {
            band_hz: (self.band_hz[0], self.band_hz[1]),
            envelope_s: self.envelope_s,
            threshold_k: self.threshold_k,
            merge_gap_s: self.merge_gap_s,
            taper_s: self.taper_s,
            edge_guard_s: self.edge_guard_s,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltSection {
    pub x_channel: String,
    pub y_channel: String,
    pub height_m: f64,
    pub lowpass_hz: f64,
    /// Output decimation of the tilt CSV, seconds per row.
    pub output_every_s: f64,
}

impl Default for TiltSection {
    fn default() -> Self {
        Self {
            x_channel: "S2.x".into(),
            y_channel: "S2.y".into(),
            height_m: 37.0,
            lowpass_hz: 0.5,
            output_every_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramSection {
    pub channel: Option<String>,
    pub nfft: usize,
    pub hop: usize,
}

impl Default for SpectrogramSection {
    fn default() -> Self {
        Self { channel: None, nfft: 4096, hop: 2048 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    /// ambient | base-drive | quiet-city | bells ("default" = ambient).
    pub scenario: String,
    pub rate_hz: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub snr: f64,
    pub start_utc: String,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        Self {
            scenario: "ambient".into(),
            rate_hz: 100.0,
            duration_s: 3600.0,
            seed: 7,
            snr: 10.0,
            start_utc: "2017-11-18T00:00:00Z".into(),
        }
    }
}

impl SimulatorSection {
    pub fn start(&self) -> CliResult<DateTime<Utc>> {
        self.start_utc
            .parse()
            .map_err(|e| CliError::Usage(format!("bad simulator.start_utc: {e}")))
    }
}

/// Loaded configuration plus the digest naming it in every output file.
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub digest: String,
}

pub fn load(path: Option<&Path>) -> CliResult<LoadedConfig> {
    let (text, label) = match path {
        Some(p) => (
            fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (String::new(), "builtin defaults".to_string()),
    };
    let config: PipelineConfig = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad config ({label}): {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hex_prefix(&hasher.finalize(), 12);
    Ok(LoadedConfig { config, digest })
}

pub fn hex_prefix(bytes: &[u8], len: usize) -> String {
    let mut s = String::with_capacity(len);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
        if s.len() >= len {
            break;
        }
    }
    s.truncate(len);
    s
}
