//! `track`: assign per-window mode estimates to baseline modes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use num_complex::Complex64;

use ambvib::modal::track_modes;
use ambvib::ssi::ModeEstimate;

use crate::commands::{create_csv, format_utc};
use crate::config::LoadedConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::write_manifest;

/// Parses a modes.csv produced by `identify --method ssi`.
pub fn read_modes_csv(path: &Path) -> CliResult<Vec<(DateTime<Utc>, Vec<ModeEstimate>)>> {
    let reader = BufReader::new(
        fs::File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?,
    );
    let mut by_window: BTreeMap<DateTime<Utc>, Vec<ModeEstimate>> = BTreeMap::new();
    let mut n_shape = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if t.starts_with("window_start") {
            n_shape = t.split(',').filter(|f| f.starts_with("shape_re_")).count();
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 6 + 2 * n_shape {
            return Err(CliError::Data(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 1,
                6 + 2 * n_shape,
                fields.len()
            )));
        }
        let bad = |what: &str| CliError::Data(format!("{}:{}: bad {what}", path.display(), lineno + 1));
        let window_start: DateTime<Utc> = fields[0].parse().map_err(|_| bad("timestamp"))?;
        let freq_hz: f64 = fields[2].parse().map_err(|_| bad("f_hz"))?;
        let damping: f64 = fields[3].parse().map_err(|_| bad("xi"))?;
        let order: usize = fields[4].parse().map_err(|_| bad("order"))?;
        let cluster_size: usize = fields[5].parse().map_err(|_| bad("cluster_size"))?;
        let mut shape = Vec::with_capacity(n_shape);
        for k in 0..n_shape {
            let re: f64 = fields[6 + k].parse().map_err(|_| bad("shape_re"))?;
            let im: f64 = fields[6 + n_shape + k].parse().map_err(|_| bad("shape_im"))?;
            shape.push(Complex64::new(re, im));
        }
        by_window.entry(window_start).or_default().push(ModeEstimate {
            freq_hz,
            damping,
            shape,
            order,
            cluster_size,
            window_start: Some(window_start),
        });
    }
    Ok(by_window.into_iter().collect())
}

pub fn run(lc: &LoadedConfig, modes_path: &Path, out: &Path) -> CliResult<()> {
    let estimates = read_modes_csv(modes_path)?;
    if estimates.is_empty() {
        return Err(CliError::Insufficient(format!(
            "{} holds no mode estimates",
            modes_path.display()
        )));
    }
    let baseline = lc.config.tracking.baseline_modes()?;
    let trajectories = track_modes(
        &estimates,
        &baseline,
        lc.config.tracking.f_tol_pct / 100.0,
        lc.config.tracking.mac_min,
    )?;
    let mut csv = create_csv(
        out,
        "trajectories.csv",
        &lc.digest,
        "mode_label,window_start,detected,f_hz,xi",
    )?;
    for traj in &trajectories {
        for p in &traj.points {
            match &p.value {
                Some(v) => writeln!(
                    csv,
                    "{},{},1,{},{}",
                    traj.label,
                    format_utc(p.window_start),
                    v.freq_hz,
                    v.damping
                )?,
                None => writeln!(csv, "{},{},0,,", traj.label, format_utc(p.window_start))?,
            }
        }
    }
    csv.flush()?;
    write_manifest(
        out,
        "track",
        &lc.digest,
        &[("modes", modes_path.display().to_string()), ("windows", estimates.len().to_string())],
        &[modes_path],
    )?;
    for traj in &trajectories {
        println!("{}: detection rate {:.2}", traj.label, traj.detection_rate());
    }
    Ok(())
}

/// Reads one labelled trajectory back from trajectories.csv.
pub fn read_trajectory(path: &Path, label: &str) -> CliResult<ambvib::modal::ModeTrajectory> {
    let reader = BufReader::new(
        fs::File::open(path)
            .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?,
    );
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("mode_label") {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Data(format!(
                "{}:{}: expected 5 fields",
                path.display(),
                lineno + 1
            )));
        }
        if fields[0] != label {
            continue;
        }
        let bad = |what: &str| CliError::Data(format!("{}:{}: bad {what}", path.display(), lineno + 1));
        let window_start: DateTime<Utc> = fields[1].parse().map_err(|_| bad("timestamp"))?;
        let value = if fields[2] == "1" {
            Some(ambvib::modal::TrackedPoint {
                freq_hz: fields[3].parse().map_err(|_| bad("f_hz"))?,
                damping: fields[4].parse().map_err(|_| bad("xi"))?,
                shape: Vec::new(),
            })
        } else {
            None
        };
        points.push(ambvib::modal::TrajectoryPoint { window_start, value });
    }
    if points.is_empty() {
        return Err(CliError::Data(format!(
            "no trajectory labelled {label:?} in {}",
            path.display()
        )));
    }
    Ok(ambvib::modal::ModeTrajectory { label: label.to_string(), points })
}
