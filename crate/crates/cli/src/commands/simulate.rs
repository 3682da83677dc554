//! `simulate`: generate a synthetic campaign plus its ground-truth sidecar.

use std::io::Write;
use std::path::Path;

use ambvib::data::store_campaign;
use ambvib::sim;

use crate::commands::{create_csv, format_utc};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

pub fn run(
    lc: &LoadedConfig,
    scenario_flag: Option<&str>,
    duration_flag: Option<f64>,
    seed_flag: Option<u64>,
    out: &Path,
) -> CliResult<()> {
    let section = &lc.config.simulator;
    let scenario_name = scenario_flag.unwrap_or(&section.scenario);
    let duration = duration_flag.unwrap_or(section.duration_s);
    let seed = seed_flag.unwrap_or(section.seed);
    let start = section.start()?;
    let rate = section.rate_hz;

    let scenario = match scenario_name {
        "ambient" | "default" => sim::scenario_ambient(rate, seed, section.snr, start)?,
        "base-drive" => sim::scenario_base_drive(rate, seed, section.snr, start)?,
        "quiet-city" => sim::scenario_quiet_city(rate, seed, start)?,
        "bells" => sim::scenario_bells(rate, seed, start)?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown scenario {other:?} (ambient|base-drive|quiet-city|bells)"
            )))
        }
    };
    let record = sim::simulate(&scenario.model, &scenario.excitations, duration, seed, start)?;
    let waveforms = out.join("waveforms");
    store_campaign(&waveforms, &record, Some(&format!("config {}", lc.digest)))?;

    // Ground truth per analysis window (constant for these scenarios).
    let window_s = lc.config.window.seconds;
    let mut truth = create_csv(out, "truth.csv", &lc.digest, "window_start,mode_index,f_hz,xi")?;
    let n_windows = (duration / window_s as f64).ceil() as i64;
    for w in 0..n_windows.max(1) {
        let t = start + chrono::Duration::seconds(w * window_s);
        for (k, mode) in scenario.model.modes.iter().enumerate() {
            writeln!(truth, "{},{},{},{}", format_utc(t), k + 1, mode.freq_hz, mode.damping)?;
        }
    }
    truth.flush()?;

    write_manifest(
        out,
        "simulate",
        &lc.digest,
        &[
            ("scenario", scenario_name.to_string()),
            ("rate_hz", rate.to_string()),
            ("duration_s", duration.to_string()),
            ("seed", seed.to_string()),
            ("start", format_utc(start)),
        ],
        &[],
    )?;
    println!(
        "simulated {:.0} s at {} sps into {} ({} channels)",
        duration,
        rate,
        out.display(),
        record.channels.len()
    );
    Ok(())
}
