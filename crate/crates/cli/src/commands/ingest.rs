//! `ingest`: normalize a raw waveform CSV into the campaign layout,
//! converting counts/volts to physical units along the way.

use std::path::Path;

use ambvib::data::{counts_to_physical, ingest_csv, store_campaign, Channel, MultiChannelRecord};

use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

pub fn run(lc: &LoadedConfig, raw: &Path, gain_v_per_count: f64, out: &Path) -> CliResult<()> {
    if lc.config.channel.is_empty() {
        return Err(CliError::Usage(
            "ingest needs [[channel]] metadata in the config (station, component, sensor, sensitivity, rate_hz)"
                .into(),
        ));
    }
    let metas: Vec<_> = lc
        .config
        .channel
        .iter()
        .map(|c| c.to_meta())
        .collect::<CliResult<_>>()?;
    let record = ingest_csv(raw, &metas)?;

    let mut channels = Vec::with_capacity(record.channels.len());
    let mut segments_total = 0usize;
    let mut gaps = 0usize;
    for ch in record.channels {
        segments_total += ch.segments.len();
        gaps += ch.segments.len().saturating_sub(1);
        let converted: Result<Vec<_>, _> = ch
            .segments
            .iter()
            .map(|seg| {
                if seg.unit.is_physical() {
                    Ok(seg.clone())
                } else {
                    counts_to_physical(seg, &ch.meta, gain_v_per_count)
                }
            })
            .collect();
        channels.push(Channel { meta: ch.meta, segments: converted? });
    }
    let record = MultiChannelRecord::new(channels)?;
    store_campaign(out, &record, Some(&format!("config {}", lc.digest)))?;
    write_manifest(
        out,
        "ingest",
        &lc.digest,
        &[
            ("raw", raw.display().to_string()),
            ("gain_v_per_count", gain_v_per_count.to_string()),
        ],
        &[raw],
    )?;
    println!(
        "ingested {} channels, {segments_total} segments ({gaps} gaps) -> {}",
        record.channels.len(),
        out.display()
    );
    Ok(())
}
