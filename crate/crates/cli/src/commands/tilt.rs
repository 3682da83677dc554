//! `tilt`: quasi-static inclination from low-passed accelerations.

use std::io::Write;
use std::path::Path;

use ambvib::dsp::{iir_filter, FilterKind};
use ambvib::response::{axis_phase_shift, tilt_series, STANDARD_GRAVITY};

use crate::commands::{channel_metas, create_csv, find_channel, format_utc, load_campaign_checked, longest_segment};
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::manifest::write_manifest;

pub fn run(lc: &LoadedConfig, data: &Path, out: &Path) -> CliResult<()> {
    let section = &lc.config.tilt;
    let metas = channel_metas(data, &lc.config)?;
    let record = load_campaign_checked(data, &metas)?;
    let ch_x = find_channel(&record, &section.x_channel)?;
    let ch_y = find_channel(&record, &section.y_channel)?;
    let seg_x = longest_segment(ch_x)?;
    let seg_y = longest_segment(ch_y)?;

    // Trim to the common time window before filtering.
    let t0 = seg_x.start.max(seg_y.start);
    let t1 = seg_x.end().min(seg_y.end());
    let (Some(x), Some(y)) = (seg_x.slice_between(t0, t1), seg_y.slice_between(t0, t1)) else {
        return Err(crate::error::CliError::Insufficient(
            "x and y tilt channels do not overlap in time".into(),
        ));
    };
    let low_x = iir_filter(&x, FilterKind::Lowpass(section.lowpass_hz), 4, true)?;
    let low_y = iir_filter(&y, FilterKind::Lowpass(section.lowpass_hz), 4, true)?;
    let tilt = tilt_series(&low_x, &low_y, STANDARD_GRAVITY, section.height_m)?;
    for w in &tilt.warnings {
        eprintln!("warning: {w}");
    }

    let stride = ((section.output_every_s * tilt.rate).round() as usize).max(1);
    for (name, theta) in [("tilt_x.csv", &tilt.theta_x), ("tilt_y.csv", &tilt.theta_y)] {
        let mut csv = create_csv(out, name, &lc.digest, "time_utc,theta_rad,displacement_mm")?;
        for (k, &th) in theta.iter().enumerate().step_by(stride) {
            let t = tilt.start
                + chrono::Duration::nanoseconds((k as f64 / tilt.rate * 1e9) as i64);
            writeln!(csv, "{},{},{}", format_utc(t), th, th * tilt.height_m * 1000.0)?;
        }
        csv.flush()?;
    }

    let mut report = std::fs::File::create(out.join("phase_shift.txt"))?;
    writeln!(report, "# config {}", lc.digest)?;
    match axis_phase_shift(&tilt, (20.0, 28.0)) {
        Ok(lag) => {
            writeln!(report, "y_lag_after_x_h={lag}")?;
            println!("daily-component lag: y delayed {lag:.2} h after x");
        }
        Err(e) => {
            writeln!(report, "y_lag_after_x_h=")?;
            writeln!(report, "note={e}")?;
            println!("phase shift not computed: {e}");
        }
    }
    write_manifest(
        out,
        "tilt",
        &lc.digest,
        &[
            ("data", data.display().to_string()),
            ("x_channel", section.x_channel.clone()),
            ("y_channel", section.y_channel.clone()),
            ("height_m", section.height_m.to_string()),
        ],
        &[],
    )?;
    Ok(())
}
