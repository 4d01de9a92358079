//! CSV tables and SVG line charts.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact::parse_rational;
use num_traits::ToPrimitive;

/// A CSV table with a mandatory header row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Table(format!("row has {} fields, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::Table(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Table("missing header row".into()));
        }
        let mut table = Table::new(header);
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Table(e.to_string()))?;
            table.push(rec.iter().map(|f| f.trim().to_string()).collect())?;
        }
        Ok(table)
    }
}

/// Parses a numeric cell: decimal, integer, or `p/q` rational.
pub fn numeric_cell(s: &str) -> Result<f64> {
    if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    parse_rational(s)
        .ok()
        .and_then(|r| r.to_f64())
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Table(format!("non-numeric cell {s:?}")))
}

#[derive(Clone, Debug, Default)]
pub struct PlotOptions {
    /// Column for the horizontal axis; defaults to the first column.
    pub x: Option<String>,
    /// Column for the vertical axis; defaults to the second column.
    pub y: Option<String>,
    /// Fitted line `y = slope * x + intercept`.
    pub fit: Option<(f64, f64)>,
    pub title: Option<String>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::EPSILON);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() * step;
    (0..=count * 2)
        .map(|i| start + i as f64 * step)
        .take_while(|t| *t <= hi + step * 1e-9)
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders a self-contained SVG line chart of one column against another.
pub fn emit_plot(table: &Table, opts: &PlotOptions) -> Result<String> {
    if table.header.len() < 2 {
        return Err(Error::Table("plot needs at least two columns".into()));
    }
    if table.rows.len() < 2 {
        return Err(Error::Table(format!("plot needs at least two rows, got {}", table.rows.len())));
    }
    let pick = |name: &Option<String>, default: usize| -> Result<usize> {
        match name {
            Some(n) => table.column(n).ok_or_else(|| Error::Table(format!("no column {n:?}"))),
            None => Ok(default),
        }
    };
    let (xi, yi) = (pick(&opts.x, 0)?, pick(&opts.y, 1)?);
    let points = table
        .rows
        .iter()
        .map(|r| Ok((numeric_cell(&r[xi])?, numeric_cell(&r[yi])?)))
        .collect::<Result<Vec<(f64, f64)>>>()?;

    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if let Some((s, c)) = opts.fit {
        for x in [x0, x1] {
            y0 = y0.min(s * x + c);
            y1 = y1.max(s * x + c);
        }
    }
    if x1 - x0 < f64::EPSILON {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < f64::EPSILON {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = (y1 - y0) * 0.05;
    let (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(t) = &opts.title {
        let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(t));
    }
    let (ax0, ax1, ay0, ay1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(svg, r#"<g class="axes" stroke="black"><line x1="{ax0}" y1="{ay0}" x2="{ax1}" y2="{ay0}"/><line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{ay1}"/></g>"#);
    for t in nice_ticks(x0, x1, 8) {
        let x = sx(t);
        let _ = writeln!(svg, r#"<line x1="{x:.2}" y1="{ay0}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, ay0 + 5.0, ay0 + 18.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, ax0 - 5.0, ax0 - 8.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(&table.header[xi]));
    let _ = writeln!(svg, r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0, escape(&table.header[yi]));

    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    let _ = writeln!(svg, r##"<polyline class="data" fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##, path.join(" "));
    for &(x, y) in &points {
        let _ = writeln!(svg, r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f77b4"/>"##, sx(x), sy(y));
    }
    if let Some((s, c)) = opts.fit {
        let _ = writeln!(
            svg,
            r##"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="6 4"/>"##,
            sx(x0),
            sy(s * x0 + c),
            sx(x1),
            sy(s * x1 + c)
        );
        let _ = writeln!(svg, r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#d62728">slope {s:.4}</text>"##, ax1, ay1 + 14.0);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{:.6}", t);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}
