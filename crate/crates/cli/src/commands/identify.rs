//! `identify`: hourly modal identification, output-only (SSI) or against
//! the measured base input (CMIF).

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use ambvib::data::{segment_hourly, MultiChannelRecord};
use ambvib::dsp::{detrend_slice, DetrendMode};
use ambvib::ema;
use ambvib::ssi;

use crate::commands::{channel_metas, create_csv, format_utc, load_campaign_checked};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Ssi,
    Cmif,
}

pub fn run(lc: &LoadedConfig, method: Method, data: &Path, out: &Path) -> CliResult<()> {
    let metas = channel_metas(data, &lc.config)?;
    let record = load_campaign_checked(data, &metas)?;
    let windows = segment_hourly(
        &record,
        lc.config.window.seconds,
        lc.config.window.min_coverage,
    );
    if windows.is_empty() {
        return Err(CliError::Insufficient(format!(
            "no window reaches {:.0}% coverage",
            lc.config.window.min_coverage * 100.0
        )));
    }
    let rate = record
        .common_rate()
        .ok_or_else(|| CliError::Usage("channels disagree on sample rate".into()))?;

    match method {
        Method::Ssi => run_ssi(lc, &windows, rate, out)?,
        Method::Cmif => run_cmif(lc, &windows, rate, out)?,
    }
    write_manifest(
        out,
        "identify",
        &lc.digest,
        &[
            ("method", format!("{method:?}").to_lowercase()),
            ("data", data.display().to_string()),
            ("windows", windows.len().to_string()),
            ("rate_hz", rate.to_string()),
        ],
        &[],
    )?;
    Ok(())
}

fn run_ssi(
    lc: &LoadedConfig,
    windows: &[MultiChannelRecord],
    rate: f64,
    out: &Path,
) -> CliResult<()> {
    let config = lc.config.ssi.to_config(rate);
    // Windows are independent; the ordered collect keeps the output
    // byte-identical for any worker count.
    let results: Result<Vec<_>, ambvib::Error> = windows
        .par_iter()
        .map(|w| ssi::identify_window(w, &config))
        .collect();
    let results = results?;

    let labels: Vec<String> = windows[0].channels.iter().map(|c| c.meta.label()).collect();
    let mut header = String::from("window_start,mode_index,f_hz,xi,order,cluster_size");
    for l in &labels {
        header.push_str(&format!(",shape_re_{l}"));
    }
    for l in &labels {
        header.push_str(&format!(",shape_im_{l}"));
    }
    let mut csv = create_csv(out, "modes.csv", &lc.digest, &header)?;
    let mut total = 0usize;
    for (window, modes) in windows.iter().zip(&results) {
        let start = window.time_span().map(|(lo, _)| lo).unwrap();
        for (k, m) in modes.iter().enumerate() {
            total += 1;
            write!(
                csv,
                "{},{},{},{},{},{}",
                format_utc(start),
                k + 1,
                m.freq_hz,
                m.damping,
                m.order,
                m.cluster_size
            )?;
            for v in &m.shape {
                write!(csv, ",{}", v.re)?;
            }
            for v in &m.shape {
                write!(csv, ",{}", v.im)?;
            }
            writeln!(csv)?;
        }
    }
    csv.flush()?;
    println!(
        "identified {total} modes over {} windows -> {}",
        windows.len(),
        out.join("modes.csv").display()
    );
    Ok(())
}

fn run_cmif(
    lc: &LoadedConfig,
    windows: &[MultiChannelRecord],
    rate: f64,
    out: &Path,
) -> CliResult<()> {
    let section = &lc.config.ema;
    let split = |w: &MultiChannelRecord| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut min_len = usize::MAX;
        let mut slices: Vec<(bool, Vec<f64>)> = w
            .channels
            .iter()
            .map(|ch| {
                let x = detrend_slice(&ch.contiguous_samples(), DetrendMode::Mean);
                min_len = min_len.min(x.len());
                (ch.meta.station == section.input_station, x)
            })
            .collect();
        for (is_input, mut x) in slices.drain(..) {
            x.truncate(min_len);
            if is_input {
                inputs.push(x);
            } else {
                outputs.push(x);
            }
        }
        (inputs, outputs)
    };

    let per_window: Result<Vec<_>, ambvib::Error> = windows
        .par_iter()
        .map(|w| {
            let (inputs, outputs) = split(w);
            if inputs.is_empty() {
                return Err(ambvib::Error::Config(format!(
                    "input station {:?} not present",
                    section.input_station
                )));
            }
            let frf = ema::frf_h1(
                &inputs,
                &outputs,
                rate,
                section.nfft,
                section.overlap,
                section.tikhonov_eps,
            )?;
            let curves = ema::cmif(&frf);
            let peaks = ema::pick_peaks(
                &curves,
                section.min_prominence_decades,
                (section.band_hz[0], section.band_hz[1]),
            )?;
            Ok((curves, peaks))
        })
        .collect();
    let per_window = per_window?;

    let n_curves = per_window.first().map(|(c, _)| c.n_curves()).unwrap_or(0);
    let mut header = String::from("window_start,freq_hz");
    for k in 0..n_curves {
        header.push_str(&format!(",ev{}", k + 1));
    }
    let mut cmif_csv = create_csv(out, "cmif.csv", &lc.digest, &header)?;
    let mut peaks_csv = create_csv(out, "peaks.csv", &lc.digest, "window_start,freq_hz,curve_index")?;
    let mut total_peaks = 0usize;
    for (window, (curves, peaks)) in windows.iter().zip(&per_window) {
        let start = window.time_span().map(|(lo, _)| lo).unwrap();
        for (k, &f) in curves.freqs.iter().enumerate() {
            write!(cmif_csv, "{},{}", format_utc(start), f)?;
            for v in &curves.values[k] {
                write!(cmif_csv, ",{v}")?;
            }
            writeln!(cmif_csv)?;
        }
        for &(f, curve) in peaks {
            total_peaks += 1;
            writeln!(peaks_csv, "{},{},{}", format_utc(start), f, curve)?;
        }
    }
    cmif_csv.flush()?;
    peaks_csv.flush()?;
    println!(
        "CMIF over {} windows, {total_peaks} peaks -> {}",
        windows.len(),
        out.join("peaks.csv").display()
    );
    Ok(())
}
