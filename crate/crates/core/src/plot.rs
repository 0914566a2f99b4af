//! Standalone SVG charts for the CSV artifacts.
//!
//! Output depends only on the CSV text, so identical input renders to
//! identical bytes.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::HISTOGRAM_HEADER;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    FprCurve,
    Histogram,
    LossLog,
}

/// One named polyline in data coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn schema(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_table(text: &str) -> Result<Table> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| schema("CSV is empty"))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| schema(format!("row {} is not numeric", n + 2)))?;
        if row.len() != header.len() {
            return Err(schema(format!("row {} has {} cells, header has {}", n + 2, row.len(), header.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(schema(format!("row {} holds a non-finite value", n + 2)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(schema("CSV has a header but no data rows"));
    }
    Ok(Table { header, rows })
}

fn column_series(table: &Table, x: usize, columns: std::ops::Range<usize>) -> Vec<Series> {
    columns
        .map(|c| Series {
            name: table.header[c].clone(),
            points: table.rows.iter().map(|r| (r[x], r[c])).collect(),
        })
        .collect()
}

/// Parses a CSV of the given kind into a chart, checking its header.
pub fn chart_from_csv(text: &str, kind: PlotKind) -> Result<Chart> {
    let table = parse_table(text)?;
    let h: Vec<&str> = table.header.iter().map(|s| s.as_str()).collect();
    match kind {
        PlotKind::FprCurve => {
            // `threshold` followed by one or more curves
            if h.len() < 2 || h[0] != "threshold" {
                return Err(schema("fpr-curve CSV must start with `threshold`"));
            }
            Ok(Chart {
                title: "Object-centric FPR".into(),
                x_label: "threshold".into(),
                y_label: "FPR".into(),
                series: column_series(&table, 0, 1..h.len()),
            })
        }
        PlotKind::Histogram => {
            if h.join(",") != HISTOGRAM_HEADER {
                return Err(schema(format!("histogram CSV header must be `{HISTOGRAM_HEADER}`")));
            }
            let step = |col: usize, name: &str| Series {
                name: name.into(),
                points: table.rows.iter().flat_map(|r| [(r[0], r[col]), (r[1], r[col])]).collect(),
            };
            Ok(Chart {
                title: "Similarity score density".into(),
                x_label: "score".into(),
                y_label: "probability".into(),
                series: vec![step(2, "traversable"), step(3, "non-traversable")],
            })
        }
        PlotKind::LossLog => {
            if h.len() < 3 || h[0] != "epoch" || h[1] != "step" || h[2] != "total" {
                return Err(schema("loss-log CSV must start with `epoch,step,total`"));
            }
            Ok(Chart {
                title: "Training loss".into(),
                x_label: "step".into(),
                y_label: "loss".into(),
                series: column_series(&table, 1, 2..h.len()),
            })
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Renders a chart with axes, tick labels, axis labels and a legend.
pub fn render_svg(chart: &Chart) -> String {
    let pts = || chart.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(pts().map(|p| p.0));
    let (y0, y1) = bounds(pts().map(|p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&chart.title));
    let _ = writeln!(
        o,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (x, y) = (sx(xv), sy(yv));
        let _ = writeln!(
            o,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            tick_label(xv)
        );
        let _ = writeln!(
            o,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        o,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        o,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    );
    for (i, s) in chart.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(o, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            o,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    o.push_str("</svg>\n");
    o
}

pub fn plot_csv(text: &str, kind: PlotKind) -> Result<String> {
    Ok(render_svg(&chart_from_csv(text, kind)?))
}
