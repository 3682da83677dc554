//! Minimal static SVG line plots (one polyline per series).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::CliResult;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub fn write_line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> CliResult<()> {
    let (w, h) = (900.0f64, 420.0f64);
    let (ml, mr, mt, mb) = (70.0, 20.0, 40.0, 50.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        return Ok(());
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )?;
    writeln!(f, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>")?;
    writeln!(
        f,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{}</text>",
        ml,
        escape(title)
    )?;
    // Axes.
    writeln!(
        f,
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        h - mb,
        w - mr,
        h - mb
    )?;
    writeln!(f, "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>", h - mb)?;
    for k in 0..=4 {
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        writeln!(
            f,
            "<text x=\"8\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{:.4}</text>",
            sy(yv) + 4.0,
            yv
        )?;
        writeln!(
            f,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{:.1}</text>",
            sx(xv) - 10.0,
            h - mb + 16.0,
            xv
        )?;
    }
    writeln!(
        f,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (w - ml) / 2.0,
        h - 12.0,
        escape(x_label)
    )?;
    writeln!(
        f,
        "<text x=\"14\" y=\"{mt}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        escape(y_label)
    )?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            f,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" points=\"{}\"/>",
            pts.join(" ")
        )?;
        writeln!(
            f,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            w - mr - 90.0,
            mt + 16.0 * i as f64,
            escape(s.label)
        )?;
    }
    writeln!(f, "</svg>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
