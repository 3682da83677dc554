//! `report`: per-mode campaign summary (mean and percentile spread of
//! frequency and damping, detection rate), optionally with an SVG plot.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ambvib::modal::mode_statistics;

use crate::commands::{create_csv, track::read_trajectory};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;
use crate::svg;

fn labels_in(path: &Path) -> CliResult<Vec<String>> {
    let reader = BufReader::new(
        fs::File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?,
    );
    let mut labels = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("mode_label") {
            continue;
        }
        if let Some(label) = t.split(',').next() {
            labels.insert(label.to_string());
        }
    }
    Ok(labels.into_iter().collect())
}

pub fn run(lc: &LoadedConfig, traj_path: &Path, out: &Path, with_svg: bool) -> CliResult<()> {
    let labels = labels_in(traj_path)?;
    if labels.is_empty() {
        return Err(CliError::Insufficient(format!(
            "{} holds no trajectories",
            traj_path.display()
        )));
    }
    // Percentile conventions: (1, 99) on frequency, (5, 95) on damping.
    let mut csv = create_csv(
        out,
        "summary.csv",
        &lc.digest,
        "mode,mean_f_hz,delta_f_pct,mean_xi_pct,delta_xi_pct,detection_rate",
    )?;
    let mut plotted = Vec::new();
    let mut rows = 0usize;
    for label in &labels {
        let traj = read_trajectory(traj_path, label)?;
        match mode_statistics(&traj, (1.0, 99.0), (5.0, 95.0)) {
            Ok(s) => {
                rows += 1;
                writeln!(
                    csv,
                    "{label},{},{},{},{},{}",
                    s.mean_f_hz, s.delta_f_pct, s.mean_xi_pct, s.delta_xi_pct, s.detection_rate
                )?;
            }
            Err(e) => eprintln!("skipping {label}: {e}"),
        }
        if with_svg {
            let origin = traj.points.first().map(|p| p.window_start);
            let points: Vec<(f64, f64)> = traj
                .points
                .iter()
                .filter_map(|p| {
                    p.value.as_ref().map(|v| {
                        let hours = (p.window_start - origin.unwrap()).num_seconds() as f64 / 3600.0;
                        (hours, v.freq_hz)
                    })
                })
                .collect();
            plotted.push((label.clone(), points));
        }
    }
    csv.flush()?;
    if rows == 0 {
        return Err(CliError::Insufficient(
            "no trajectory had at least two detected windows".into(),
        ));
    }
    if with_svg {
        let series: Vec<svg::Series> = plotted
            .iter()
            .map(|(label, points)| svg::Series { label, points: points.clone() })
            .collect();
        svg::write_line_plot(
            &out.join("frequencies.svg"),
            "Identified natural frequencies over the campaign",
            "hours since campaign start",
            "frequency [Hz]",
            &series,
        )?;
    }
    write_manifest(
        out,
        "report",
        &lc.digest,
        &[("traj", traj_path.display().to_string()), ("modes", rows.to_string())],
        &[traj_path],
    )?;
    println!("summary for {rows} modes -> {}", out.join("summary.csv").display());
    Ok(())
}
