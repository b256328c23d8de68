//! CSV, SVG and image outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::hr::{HeartRateResult, TrendSeries};
use crate::track::WidthSeries;

/// `frame_index,time_s,width_px,gap_flag`
pub fn widths_csv(series: &WidthSeries) -> String {
    let mut out = String::from("frame_index,time_s,width_px,gap_flag\n");
    for (i, (w, g)) in series.widths.iter().zip(&series.gaps).enumerate() {
        let _ = writeln!(out, "{i},{:.6},{w:.6},{}", i as f64 / series.fps, u8::from(*g));
    }
    out
}

/// `frame_index,time_s,value`
pub fn stage_csv(series: &TrendSeries) -> String {
    let mut out = String::from("frame_index,time_s,value\n");
    for (i, v) in series.values.iter().enumerate() {
        let _ = writeln!(out, "{i},{:.6},{v:.9}", i as f64 / series.fps);
    }
    out
}

/// `peak_time_s`
pub fn peaks_csv(result: &HeartRateResult) -> String {
    let mut out = String::from("peak_time_s\n");
    for t in &result.peak_times {
        let _ = writeln!(out, "{t:.6}");
    }
    out
}

/// `peak_count, duration_s, bpm`
pub fn summary_line(result: &HeartRateResult) -> String {
    format!(
        "peak_count={} duration_s={:.3} bpm={:.2}",
        result.peak_count, result.duration_s, result.bpm
    )
}

/// Polyline of the series with a circle at every peak.
pub fn trace_svg(series: &TrendSeries, result: &HeartRateResult) -> String {
    const W: f64 = 960.0;
    const H: f64 = 300.0;
    const PAD: f64 = 30.0;
    let n = series.values.len().max(2);
    let (lo, hi) = series
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (-1.0, 1.0) };
    let px = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64;
    let py = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{} ({}): {}</text>"#,
        series.stage.name(),
        series.values.len(),
        summary_line(result)
    );
    let points: Vec<String> = series
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
        points.join(" ")
    );
    for &i in &result.peak_indices {
        if let Some(&v) = series.values.get(i) {
            let _ = writeln!(
                svg,
                r#"<circle class="peak" cx="{:.2}" cy="{:.2}" r="3" fill="crimson"/>"#,
                px(i),
                py(v)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}
