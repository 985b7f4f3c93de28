//! Self-contained SVG line plots of experiment CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::stepper::least_squares_slope;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty csv")]
    Empty,
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {column:?} has a non-numeric value {value:?}")]
    NotNumeric { column: String, value: String },
    #[error("no plottable points in column {0:?}")]
    NoPoints(String),
}

pub type Result<T> = std::result::Result<T, PlotError>;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: Vec<String>,
    pub loglog: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope in the plotted coordinates.
    pub slope: Option<f64>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| PlotError::UnknownColumn(name.to_string()))
}

fn number(column: &str, raw: &str) -> Result<f64> {
    raw.trim().parse().map_err(|_| PlotError::NotNumeric {
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Reads the requested series; on log axes non-positive points are dropped.
pub fn read_series(text: &str, spec: &PlotSpec) -> Result<Vec<Series>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(PlotError::Empty);
    }
    let xi = column(&headers, &spec.x)?;
    let yi = spec
        .y
        .iter()
        .map(|y| column(&headers, y))
        .collect::<Result<Vec<_>>>()?;
    let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(PlotError::Empty);
    }
    let mut out = Vec::new();
    for (name, &c) in spec.y.iter().zip(&yi) {
        let mut points = Vec::new();
        for r in &records {
            let x = number(&spec.x, &r[xi])?;
            let y = number(name, &r[c])?;
            if !(x.is_finite() && y.is_finite()) || (spec.loglog && (x <= 0.0 || y <= 0.0)) {
                continue;
            }
            points.push(if spec.loglog { (x.log10(), y.log10()) } else { (x, y) });
        }
        if points.is_empty() {
            return Err(PlotError::NoPoints(name.clone()));
        }
        let distinct_x = points.iter().any(|p| p.0 != points[0].0);
        let slope = (points.len() >= 2 && distinct_x).then(|| least_squares_slope(&points));
        out.push(Series {
            name: name.clone(),
            points,
            slope,
        });
    }
    Ok(out)
}

/// A reference line of given slope through a point, with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Guide {
    pub slope: f64,
    pub through: (f64, f64),
    pub label: String,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| &s.points);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |a: f64, b: f64| if b > a { (a, b) } else { (a - 0.5, b + 0.5) };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

/// Renders series (already in plotted coordinates) and optional guides.
pub fn render_svg(series: &[Series], spec: &PlotSpec, guides: &[Guide], notes: &[String]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let axis = |name: &str| {
        if spec.loglog {
            format!("log10 {}", escape(name))
        } else {
            escape(name)
        }
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
            sx(fx),
            HEIGHT - MARGIN + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{fy:.3}</text>"#,
            MARGIN - 6.0,
            sy(fy) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        axis(&spec.x)
    );
    let ylabel = spec.y.iter().map(|y| axis(y)).collect::<Vec<_>>().join(", ");
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{ylabel}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for g in guides {
        let (gx, gy) = g.through;
        let ya = gy + g.slope * (x0 - gx);
        let yb = gy + g.slope * (x1 - gx);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            sx(x0),
            sy(ya),
            sx(x1),
            sy(yb)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="gray">{}</text>"#,
            sx(x1) - 60.0,
            sy(yb).clamp(MARGIN + 12.0, HEIGHT - MARGIN - 4.0),
            escape(&g.label)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let label = match s.slope {
            Some(m) => format!("{} (slope {m:.3})", s.name),
            None => s.name.clone(),
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            escape(&label)
        );
    }
    for (i, note) in notes.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN - 8.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            escape(note)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn is_residual_csv(text: &str) -> bool {
    text.lines()
        .next()
        .is_some_and(|h| h.split(',').any(|c| c == "residual_raw") && h.split(',').any(|c| c == "residual_gauged"))
}

/// Fitted slopes recorded by the normal-form experiment next to its CSV.
fn summary_notes(dir: &Path) -> Vec<String> {
    let Ok(text) = std::fs::read_to_string(dir.join("summary.json")) else {
        return Vec::new();
    };
    let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) else {
        return Vec::new();
    };
    let fmt = |x: &serde_json::Value| x.as_f64().map_or("exact".to_string(), |s| format!("{s:.3}"));
    v["bands"]
        .as_array()
        .map(|bands| {
            bands
                .iter()
                .map(|b| {
                    format!(
                        "k = {}: raw {}, gauged {}",
                        b["k"],
                        fmt(&b["slope_raw"]),
                        fmt(&b["slope_gauged"])
                    )
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Plots a CSV to `<csv stem>.svg` beside it and returns that path.
/// Residual CSVs on log axes get slope-2 and slope-3 guide lines and the
/// fitted slopes from `summary.json`.
pub fn plot(csv_path: &Path, spec: &PlotSpec) -> Result<PathBuf> {
    let text = std::fs::read_to_string(csv_path).map_err(|source| PlotError::Read {
        path: csv_path.to_path_buf(),
        source,
    })?;
    if text.trim().is_empty() {
        return Err(PlotError::Empty);
    }
    let series = read_series(&text, spec)?;
    let mut guides = Vec::new();
    let mut notes = Vec::new();
    if spec.loglog && is_residual_csv(&text) {
        let anchor = series[0].points[0];
        for slope in [2.0, 3.0] {
            guides.push(Guide {
                slope,
                through: anchor,
                label: format!("slope {slope}"),
            });
        }
        notes = summary_notes(csv_path.parent().unwrap_or(Path::new(".")));
    }
    let svg = render_svg(&series, spec, &guides, &notes);
    let out = csv_path.with_extension("svg");
    std::fs::write(&out, svg).map_err(|source| PlotError::Write {
        path: out.clone(),
        source,
    })?;
    Ok(out)
}
