//! Minimal deterministic SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Values at or below zero are drawn at this level on a log axis.
pub const LOG_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Linear,
    Semilog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

pub fn emit_plot(
    series: &[Series],
    kind: PlotKind,
    title: &str,
    x_label: &str,
    path: &Path,
) -> io::Result<()> {
    fs::write(path, render(series, kind, title, x_label)?)
}

/// Renders the SVG text; identical input gives identical bytes.
pub fn render(series: &[Series], kind: PlotKind, title: &str, x_label: &str) -> io::Result<String> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty series"));
    }
    let mut floored = 0usize;
    let ty = |y: f64, floored: &mut usize| match kind {
        PlotKind::Linear => y,
        PlotKind::Semilog => {
            if y <= LOG_FLOOR || !y.is_finite() {
                *floored += 1;
                LOG_FLOOR.log10()
            } else {
                y.log10()
            }
        }
    };
    let mut pts: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in series {
        pts.push(s.points.iter().map(|&(x, y)| (x, ty(y, &mut floored))).collect());
    }
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        if y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if kind == PlotKind::Semilog {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut o = String::new();
    let w = |o: &mut String, s: String| o.push_str(&s);
    w(&mut o, format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    w(&mut o, format!("<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"));
    w(&mut o, format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        LEFT + pw / 2.0,
        escape(title)
    ));
    w(&mut o, format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    for i in 0..=5 {
        let x = x0 + (x1 - x0) * i as f64 / 5.0;
        let _ = writeln!(
            o,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            sx(x),
            TOP + ph + 18.0,
            tick(x)
        );
    }
    let y_ticks: Vec<f64> = match kind {
        PlotKind::Semilog => {
            let step = ((y1 - y0) / 8.0).ceil().max(1.0);
            let mut v = Vec::new();
            let mut y = y0;
            while y <= y1 + 1e-9 {
                v.push(y);
                y += step;
            }
            v
        }
        PlotKind::Linear => (0..=5).map(|i| y0 + (y1 - y0) * i as f64 / 5.0).collect(),
    };
    for y in y_ticks {
        let label = match kind {
            PlotKind::Semilog => format!("1e{}", y as i64),
            PlotKind::Linear => tick(y),
        };
        let _ = writeln!(
            o,
            "<line x1=\"{LEFT}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" stroke=\"#dddddd\"/><text x=\"{2:.1}\" y=\"{3:.1}\" text-anchor=\"end\">{label}</text>",
            sy(y),
            LEFT + pw,
            LEFT - 6.0,
            sy(y) + 4.0
        );
    }
    let _ = writeln!(
        o,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let d: Vec<String> = p
            .iter()
            .filter(|(_, y)| y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            o,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            d.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * k as f64;
        let _ = writeln!(
            o,
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{2:.1}\" y=\"{3:.1}\">{4}</text>",
            LEFT + pw + 10.0,
            LEFT + pw + 30.0,
            LEFT + pw + 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    if floored > 0 {
        let _ = writeln!(
            o,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" fill=\"#555555\">{floored} value(s) &lt;= 0 drawn at 1e-16</text>",
            LEFT + pw + 10.0,
            TOP + ph
        );
    }
    o.push_str("</svg>\n");
    Ok(o)
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        format!("{v:.2}")
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
