//! `levels`: hourly maxima and daily averages of acceleration levels.

use std::io::Write;
use std::path::Path;

use ambvib::response::{daily_avg_hourly_max, hourly_max_abs};

use crate::commands::{channel_metas, create_csv, format_utc, load_campaign_checked};
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::manifest::write_manifest;

pub fn run(lc: &LoadedConfig, data: &Path, out: &Path) -> CliResult<()> {
    let metas = channel_metas(data, &lc.config)?;
    let record = load_campaign_checked(data, &metas)?;
    let hourly = hourly_max_abs(&record)?;
    let daily = daily_avg_hourly_max(&hourly)?;

    let mut h = create_csv(out, "hourly_max.csv", &lc.digest, "channel,hour_utc,max_abs")?;
    for (label, points) in &hourly.channels {
        for p in points {
            writeln!(h, "{label},{},{}", format_utc(p.time), p.value)?;
        }
    }
    h.flush()?;
    let mut d = create_csv(
        out,
        "daily_avg.csv",
        &lc.digest,
        "channel,day_utc,avg_of_hourly_max,flagged",
    )?;
    for (label, points) in &daily.channels {
        for p in points {
            writeln!(
                d,
                "{label},{},{},{}",
                p.time.date_naive(),
                p.value,
                if p.flagged { 1 } else { 0 }
            )?;
        }
    }
    d.flush()?;
    write_manifest(out, "levels", &lc.digest, &[("data", data.display().to_string())], &[])?;
    println!(
        "levels for {} channels -> {}",
        hourly.channels.len(),
        out.display()
    );
    Ok(())
}
