//! Minimal deterministic SVG charts.

use std::fmt::Write as _;

use chrono::NaiveDate;

use super::polyfit::{polyfit3, polyval3};

const W: f64 = 900.0;
const H: f64 = 420.0;
const PAD_L: f64 = 60.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 36.0;
const PAD_B: f64 = 44.0;

pub struct Series<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    pub color: &'a str,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        let pad = (y1 - y0) * 0.05;
        Frame {
            x0,
            x1,
            y0: y0 - pad,
            y1: y1 + pad,
        }
    }

    fn px(&self, x: f64) -> f64 {
        PAD_L + (x - self.x0) / (self.x1 - self.x0) * (W - PAD_L - PAD_R)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD_B - (y - self.y0) / (self.y1 - self.y0) * (H - PAD_T - PAD_B)
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, f: &Frame, x_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-size="14">{}</text>"#,
        PAD_L,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{PAD_L}" y="{PAD_T}" width="{}" height="{}" fill="none" stroke="grey"/>"#,
        W - PAD_L - PAD_R,
        H - PAD_T - PAD_B
    );
    for i in 0..=4 {
        let v = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="4" y="{:.1}">{:.1}</text>"#, f.py(v) + 4.0, v);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{}">{}</text>"#,
        W / 2.0,
        H - 8.0,
        escape(x_label)
    );
}

fn legend(out: &mut String, series: &[Series<'_>]) {
    for (i, s) in series.iter().enumerate() {
        let x = W - PAD_R - 160.0;
        let y = PAD_T + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{:.1}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            s.color
        );
        let _ = writeln!(out, r#"<text x="{}" y="{y:.1}">{}</text>"#, x + 14.0, escape(s.name));
    }
}

/// Lines over consecutive dates (e.g. actual vs estimated counts).
pub fn line_chart(title: &str, dates: &[NaiveDate], series: &[Series<'_>]) -> String {
    let n = dates.len().max(2);
    let f = Frame::new(
        (0..n).map(|i| i as f64),
        series.iter().flat_map(|s| s.values.iter().copied()),
    );
    let mut out = String::new();
    let label = match (dates.first(), dates.last()) {
        (Some(a), Some(b)) => format!("{a} .. {b}"),
        _ => String::new(),
    };
    header(&mut out, title, &f, &label);
    for s in series {
        let pts: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{:.1},{:.1}", f.px(i as f64), f.py(*v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Scatter of each series against `x` with its least-squares cubic overlaid.
pub fn scatter_cubic_chart(title: &str, x_label: &str, x: &[f64], series: &[Series<'_>]) -> String {
    let f = Frame::new(x.iter().copied(), series.iter().flat_map(|s| s.values.iter().copied()));
    let mut out = String::new();
    header(&mut out, title, &f, x_label);
    for s in series {
        for (xi, yi) in x.iter().zip(s.values) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="2" fill="{}" fill-opacity="0.5"/>"#,
                f.px(*xi),
                f.py(*yi),
                s.color
            );
        }
        if let Ok(c) = polyfit3(x, s.values) {
            let pts: Vec<String> = (0..=100)
                .map(|i| {
                    let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 100.0;
                    format!("{:.1},{:.1}", f.px(xv), f.py(polyval3(&c, xv)))
                })
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                s.color,
                pts.join(" ")
            );
        }
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}
