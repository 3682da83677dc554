//! `spectrogram`: time–frequency power matrix of one channel.

use std::io::Write;
use std::path::Path;

use crate::commands::{channel_metas, create_csv, find_channel, format_utc, load_campaign_checked, longest_segment};
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::manifest::write_manifest;

pub fn run(
    lc: &LoadedConfig,
    data: &Path,
    channel_flag: Option<&str>,
    out: &Path,
) -> CliResult<()> {
    let section = &lc.config.spectrogram;
    let metas = channel_metas(data, &lc.config)?;
    let record = load_campaign_checked(data, &metas)?;
    let channel = match channel_flag.or(section.channel.as_deref()) {
        Some(label) => find_channel(&record, label)?,
        None => &record.channels[0],
    };
    let seg = longest_segment(channel)?;
    let sg = ambvib::dsp::spectrogram(seg, section.nfft, section.hop)?;

    let mut csv = create_csv(out, "spectrogram.csv", &lc.digest, "time,freq,power")?;
    for (t_idx, time) in sg.times.iter().enumerate() {
        for (f_idx, freq) in sg.freqs.iter().enumerate() {
            writeln!(csv, "{},{},{}", format_utc(*time), freq, sg.power[t_idx][f_idx])?;
        }
    }
    csv.flush()?;
    write_manifest(
        out,
        "spectrogram",
        &lc.digest,
        &[
            ("data", data.display().to_string()),
            ("channel", channel.meta.label()),
            ("nfft", section.nfft.to_string()),
            ("hop", section.hop.to_string()),
        ],
        &[],
    )?;
    println!(
        "spectrogram {} columns x {} bins -> {}",
        sg.times.len(),
        sg.freqs.len(),
        out.join("spectrogram.csv").display()
    );
    Ok(())
}
