//! Minimal standalone SVG line charts from the tool's CSV reports.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{MbrError, Result};

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub x: String,
    pub y: String,
    /// Column whose value names the series a row belongs to.
    pub series: String,
    pub title: String,
}

impl Default for ChartSpec {
    fn default() -> Self {
        ChartSpec {
            x: "mean_calls".into(),
            y: "accuracy".into(),
            series: "method".into(),
            title: String::new(),
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub type Series = BTreeMap<String, Vec<(f64, f64)>>;

/// Points grouped by series. Rows with empty x/y cells are skipped; when a
/// `trial` column is present only the aggregated (`all`) rows are used.
pub fn read_series(csv_text: &str, spec: &ChartSpec) -> Result<Series> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| MbrError::validation(format!("bad CSV header: {e}")))?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            MbrError::validation(format!(
                "unknown column `{name}`; available: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let (xi, yi, si) = (col(&spec.x)?, col(&spec.y)?, col(&spec.series)?);
    let trial = headers.iter().position(|h| h == "trial");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec.map_err(|e| MbrError::validation(format!("bad CSV row: {e}")))?);
    }
    let only_all = trial.is_some_and(|t| rows.iter().any(|r| &r[t] == "all"));

    let mut series = Series::new();
    for r in &rows {
        if only_all && &r[trial.unwrap()] != "all" {
            continue;
        }
        let (Ok(x), Ok(y)) = (r[xi].parse::<f64>(), r[yi].parse::<f64>()) else {
            continue;
        };
        series.entry(r[si].to_string()).or_default().push((x, y));
    }
    for pts in series.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }
    if series.values().all(|p| p.is_empty()) {
        return Err(MbrError::validation(format!(
            "no plottable points for `{}` against `{}`",
            spec.y, spec.x
        )));
    }
    Ok(series)
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(series: &Series, spec: &ChartSpec) -> String {
    let pts = || series.values().flatten();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = (y1 - y0) * 0.05;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !spec.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            esc(&spec.title)
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333"/>"##
    );
    for t in nice_ticks(x0, x1) {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#ddd"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
            sx(t),
            MARGIN_T,
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 16.0,
            crate::report::fmt_num(t)
        );
    }
    for t in nice_ticks(y0, y1) {
        let _ = writeln!(
            s,
            r##"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}" stroke="#ddd"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            sy(t),
            MARGIN_L,
            MARGIN_L + plot_w,
            MARGIN_L - 6.0,
            sy(t) + 4.0,
            crate::report::fmt_num(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        esc(&spec.x)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        esc(&spec.y)
    );
    for (k, (name, points)) in series.iter().enumerate() {
        if points.is_empty() {
            continue;
        }
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            esc(name)
        );
        for &(x, y) in points {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = MARGIN_T + 10.0 + 18.0 * k as f64;
        let lx = MARGIN_L + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Parse a report CSV and render it.
pub fn chart_from_csv(csv_text: &str, spec: &ChartSpec) -> Result<String> {
    Ok(render_svg(&read_series(csv_text, spec)?, spec))
}
