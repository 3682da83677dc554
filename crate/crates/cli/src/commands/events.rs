//! `events`: STA/LTA and teleseism detection with catalog matching.

use std::io::Write;
use std::path::Path;

use ambvib::data::load_catalog;
use ambvib::response::{match_catalog, sta_lta_detect, teleseism_scan, DetectionEvent};

use crate::commands::{channel_metas, create_csv, find_channel, format_utc, load_campaign_checked};
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::manifest::write_manifest;

pub fn run(
    lc: &LoadedConfig,
    data: &Path,
    catalog_flag: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let section = &lc.config.events;
    let metas = channel_metas(data, &lc.config)?;
    let record = load_campaign_checked(data, &metas)?;
    let channel = match &section.channel {
        Some(label) => find_channel(&record, label)?,
        None => &record.channels[0],
    };
    let catalog_path = catalog_flag
        .map(|p| p.to_path_buf())
        .or_else(|| section.catalog_csv.as_ref().map(Into::into));
    let catalog = match &catalog_path {
        Some(p) => load_catalog(p)?,
        None => Vec::new(),
    };

    // Regional triggers per contiguous segment, then long-period scans.
    let mut regional: Vec<DetectionEvent> = Vec::new();
    let mut teleseisms: Vec<DetectionEvent> = Vec::new();
    for seg in &channel.segments {
        regional.extend(sta_lta_detect(
            seg,
            section.sta_s,
            section.lta_s,
            section.trigger_on,
            section.trigger_off,
        )?);
        teleseisms.extend(teleseism_scan(seg, &section.teleseism_config())?);
    }
    let regional = match_catalog(regional, &catalog, section.regional_window_min)?;
    let teleseisms = match_catalog(teleseisms, &catalog, section.teleseism_window_min)?;

    let mut events: Vec<DetectionEvent> = regional.into_iter().chain(teleseisms).collect();
    events.sort_by_key(|e| e.trigger_time);

    let mut csv = create_csv(
        out,
        "events.csv",
        &lc.digest,
        "trigger_utc,duration_s,peak,band_lo,band_hi,catalog_location,catalog_mag",
    )?;
    for e in &events {
        let (location, magnitude) = e
            .matched_catalog
            .as_ref()
            .map(|c| (c.location.clone(), c.magnitude.to_string()))
            .unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            format_utc(e.trigger_time),
            e.duration_s,
            e.peak_value,
            e.band_hz.0,
            e.band_hz.1,
            location,
            magnitude
        )?;
    }
    csv.flush()?;
    write_manifest(
        out,
        "events",
        &lc.digest,
        &[
            ("data", data.display().to_string()),
            ("channel", channel.meta.label()),
            (
                "catalog",
                catalog_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            ),
        ],
        &[],
    )?;
    println!(
        "{} events ({} matched) on {} -> {}",
        events.len(),
        events.iter().filter(|e| e.matched_catalog.is_some()).count(),
        channel.meta.label(),
        out.join("events.csv").display()
    );
    Ok(())
}
