use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::artifacts::{read_csv, CsvRow};
use super::{Aggregate, HarnessError, Method};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

fn color(m: Method) -> &'static str {
    match m {
        Method::Dynamic => "#d62728",
        Method::Passive => "#1f77b4",
        Method::None => "#2ca02c",
        Method::BruteForce => "#7f7f7f",
    }
}

/// Per-method curve: iteration -> aggregate over seeds.
fn curves(rows: &[CsvRow], aggregate: Aggregate) -> BTreeMap<Method, Vec<(usize, f64)>> {
    let mut grouped: BTreeMap<Method, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        grouped
            .entry(r.method)
            .or_default()
            .entry(r.iteration)
            .or_default()
            .push(r.normalized);
    }
    grouped
        .into_iter()
        .map(|(m, by_iter)| {
            let pts = by_iter
                .into_iter()
                .map(|(i, vals)| (i, aggregate.combine(&vals)))
                .collect();
            (m, pts)
        })
        .collect()
}

/// Renders normalized-reward curves as a standalone SVG document.
pub fn render_svg(rows: &[CsvRow], aggregate: Aggregate) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::InvalidState("no data rows to plot".into()));
    }
    let curves = curves(rows, aggregate);
    let x_max = rows.iter().map(|r| r.iteration).max().unwrap_or(0).max(1) as f64;
    let y_top = rows.iter().map(|r| r.normalized).fold(1.0_f64, f64::max);
    let y_max = (y_top * 10.0).ceil() / 10.0;
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * pw;
    let sy = |y: f64| TOP + ph - (y.max(0.0) / y_max) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{:.2},{:.2} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        LEFT,
        TOP,
        TOP + ph,
        LEFT + pw
    );
    let x_ticks = (x_max as usize).min(5);
    for k in 0..=x_ticks {
        let xv = (x_max * k as f64 / x_ticks as f64).round();
        let x = sx(xv);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{xv}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
        );
    }
    for k in 0..=5 {
        let yv = y_max * k as f64 / 5.0;
        let y = sy(yv);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{yv:.2}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">normalized reward ({})</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        match aggregate {
            Aggregate::Median => "median",
            Aggregate::Best => "best",
        }
    );
    // reference line at 1.0
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-dasharray="4 4"/>"#,
        LEFT + pw,
        y = sy(1.0)
    );

    for (m, pts) in &curves {
        let points: Vec<String> = pts
            .iter()
            .map(|(i, v)| format!("{:.2},{:.2}", sx(*i as f64), sy(*v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline data-method="{m}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            color(*m),
            points.join(" ")
        );
    }
    for (k, m) in curves.keys().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let x = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{m}</text>"#,
            x + 20.0,
            color(*m),
            x + 26.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads `csv_path` and writes the plot to `out_path`. Nothing is written
/// if the CSV is malformed or has no rows.
pub fn emit_svg_plot(csv_path: &Path, out_path: &Path, aggregate: Aggregate) -> Result<(), HarnessError> {
    let rows = read_csv(csv_path)?;
    let svg = render_svg(&rows, aggregate)?;
    std::fs::write(out_path, svg).map_err(|e| HarnessError::Io {
        path: out_path.to_path_buf(),
        message: e.to_string(),
    })
}
