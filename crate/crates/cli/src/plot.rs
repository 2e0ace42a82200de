//! Minimal static SVG line plots.

use std::fmt::Write;

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 48.0;

pub struct Series<'a> {
    pub title: &'a str,
    pub values: &'a [f64],
}

fn panel(out: &mut String, series: &Series<'_>, top: f64) {
    let pts: Vec<(usize, f64)> = series
        .values
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .collect();
    let (x0, y0) = (MARGIN, top + 24.0);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="dimgray"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{x0}" y="{}" font-size="13">{}</text>"#,
        top + 16.0,
        series.title
    );
    if pts.is_empty() {
        return;
    }
    let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let tmax = pts.last().map_or(1, |p| p.0).max(1) as f64;
    let path: Vec<String> = pts
        .iter()
        .map(|&(t, v)| {
            let x = x0 + PANEL_W * t as f64 / tmax;
            let y = y0 + PANEL_H * (1.0 - (v - lo) / span);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
        path.join(" ")
    );
    for (v, y) in [(hi, y0 + 10.0), (lo, y0 + PANEL_H)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{v:.3e}</text>"#,
            x0 - 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="10" text-anchor="end">t = {}</text>"#,
        x0 + PANEL_W,
        y0 + PANEL_H + 14.0,
        tmax
    );
}

/// Stack one panel per series.
pub fn svg(series: &[Series<'_>]) -> String {
    let height = series.len() as f64 * (PANEL_H + 48.0) + 16.0;
    let width = PANEL_W + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif">"#
    );
    for (k, s) in series.iter().enumerate() {
        panel(&mut out, s, 8.0 + k as f64 * (PANEL_H + 48.0));
    }
    out.push_str("</svg>\n");
    out
}
