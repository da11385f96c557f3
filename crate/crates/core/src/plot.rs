//! Static SVG charts of flexibility surfaces.
//!
//! Each chart carries its data verbatim in `data-values` attributes (W, one
//! value per start), so the figures can be checked against the CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::flexibility::FlexibilitySurface;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn x_of(start: u32) -> f64 {
    MARGIN + (WIDTH - 2.0 * MARGIN) * f64::from(start) / 1440.0
}

fn y_of(value: f64, top: f64) -> f64 {
    let span = HEIGHT - 2.0 * MARGIN;
    let frac = if top > 0.0 { value / top } else { 0.0 };
    HEIGHT - MARGIN - span * frac
}

/// Renders the chart for one window length.
pub fn render_window_chart(surface: &FlexibilitySurface, window_index: usize) -> String {
    let window = surface.windows[window_index];
    let pos = &surface.positive[window_index];
    let neg = &surface.negative[window_index];
    let peak = pos.iter().chain(neg).copied().fold(0.0, f64::max);
    let top = if peak > 0.0 { peak * 1.1 } else { 1.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">Flexibility, window {window} min</text>"#,
        WIDTH / 2.0
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>"#,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for h in (0..=24).step_by(3) {
        let x = x_of(h * 60);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{h}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    for k in 0..=4 {
        let v = top * f64::from(k) / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{:.2}</text>"#,
            MARGIN - 4.0,
            y_of(v, top) + 4.0,
            v / 1e6
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})">MW</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (name, values, colour) in [("positive", pos, "#1f77b4"), ("negative", neg, "#d62728")] {
        let points: Vec<String> = surface
            .starts
            .iter()
            .zip(values)
            .map(|(s, v)| format!("{:.3},{:.3}", x_of(*s), y_of(*v, top)))
            .collect();
        let data: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="{name}" fill="none" stroke="{colour}" stroke-width="1.5" data-window="{window}" data-values="{}" points="{}"/>"#,
            data.join(" "),
            points.join(" ")
        );
    }
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="45" font-family="sans-serif" font-size="12" fill="#1f77b4">ΔP+</text><text x="{}" y="45" font-family="sans-serif" font-size="12" fill="#d62728">ΔP−</text>"##,
        WIDTH - 140.0,
        WIDTH - 90.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Writes one chart per window length into `dir`, returning the file paths.
pub fn emit_plots(surface: &FlexibilitySurface, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if surface.is_empty() {
        return Err(Error::invalid("surface", "nothing to plot"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for (i, w) in surface.windows.iter().enumerate() {
        let path = dir.join(format!("flexibility_dt{w}.svg"));
        fs::write(&path, render_window_chart(surface, i)).map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Extracts `(class, data-values)` of every trace in a chart.
pub fn parse_chart_traces(svg: &str) -> Vec<(String, Vec<f64>)> {
    let attr = |line: &str, key: &str| -> Option<String> {
        let start = line.find(&format!("{key}=\""))? + key.len() + 2;
        let end = line[start..].find('"')? + start;
        Some(line[start..end].to_string())
    };
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| {
            let class = attr(l, "class")?;
            let values = attr(l, "data-values")?
                .split_whitespace()
                .map(|v| v.parse().ok())
                .collect::<Option<Vec<f64>>>()?;
            Some((class, values))
        })
        .collect()
}

/// Y pixel coordinates of every trace, for shape checks.
pub fn parse_chart_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
    svg.lines()
        .filter(|l| l.starts_with("<polyline"))
        .filter_map(|l| {
            let start = l.find("points=\"")? + 8;
            let end = l[start..].find('"')? + start;
            l[start..end]
                .split_whitespace()
                .map(|p| {
                    let (x, y) = p.split_once(',')?;
                    Some((x.parse().ok()?, y.parse().ok()?))
                })
                .collect()
        })
        .collect()
}
