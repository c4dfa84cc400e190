//! Minimal SVG rendering for the report's plot families. The CSV plot tables
//! are the contract; these are a convenience view of them.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

pub const BLUE: &str = "#1f77b4";
pub const ORANGE: &str = "#d95f02";
const GREY: &str = "#888888";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub color: &'a str,
}

/// Shaded region between `lo` and `hi`.
pub struct Band<'a> {
    pub x: &'a [f64],
    pub lo: &'a [f64],
    pub hi: &'a [f64],
    pub color: &'a str,
}

struct Frame {
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Frame { height, x: pad(x), y: pad(y) }
    }

    fn px(&self, v: f64) -> f64 {
        MARGIN_LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        let h = self.height - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + h - (v - self.y.0) / (self.y.1 - self.y.0) * h
    }

    fn points(&self, x: &[f64], y: &[f64]) -> String {
        x.iter().zip(y).map(|(&a, &b)| format!("{:.2},{:.2}", self.px(a), self.py(b))).collect::<Vec<_>>().join(" ")
    }
}

fn header(out: &mut String, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (x0, x1, y0, y1) = (f.px(f.x.0), f.px(f.x.1), f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(out, r#"<g stroke="black" fill="none"><line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/><line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/></g>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, f.px(xv), y0 + 16.0, tick(xv));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, f.py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, f.height - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text transform="translate(16,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 { format!("{v:.0}") } else if v.abs() >= 1.0 { format!("{v:.1}") } else { format!("{v:.3}") }
}

fn range<'a>(vals: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Line plot with optional shaded bands and a dotted identity line.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    bands: &[Band],
    diagonal: bool,
) -> String {
    let xr = range(series.iter().flat_map(|s| s.x.iter()));
    let mut yr = range(series.iter().flat_map(|s| s.y.iter()).chain(bands.iter().flat_map(|b| b.lo.iter().chain(b.hi))));
    if diagonal {
        yr = (yr.0.min(xr.0), yr.1.max(xr.1));
    }
    let f = Frame::new(420.0, xr, yr);
    let mut out = String::new();
    header(&mut out, f.height, title);
    axes(&mut out, &f, x_label, y_label);
    for b in bands {
        let upper = f.points(b.x, b.hi);
        let lower: Vec<String> =
            b.x.iter().zip(b.lo).rev().map(|(&a, &v)| format!("{:.2},{:.2}", f.px(a), f.py(v))).collect();
        let _ = writeln!(out, r#"<polygon points="{upper} {}" fill="{}" fill-opacity="0.2" stroke="none"/>"#, lower.join(" "), b.color);
    }
    if diagonal {
        let lo = xr.0.max(yr.0);
        let hi = xr.1.min(yr.1);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{GREY}" stroke-dasharray="4 4"/>"#,
            f.px(lo),
            f.py(lo),
            f.px(hi),
            f.py(hi)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, f.points(s.x, s.y), s.color);
        let ly = MARGIN_TOP + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{}">{}</text>"#,
            MARGIN_LEFT + 10.0,
            s.color,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

const ROW: f64 = 22.0;

fn bar_frame(n_rows: usize, xr: (f64, f64)) -> Frame {
    let height = MARGIN_TOP + MARGIN_BOTTOM + ROW * n_rows as f64;
    Frame::new(height, xr, (0.0, n_rows as f64))
}

fn row_y(f: &Frame, i: usize) -> f64 {
    f.py(f.y.1 - i as f64) + 3.0
}

/// Break-down waterfall: each step starts where the previous one ended.
pub fn waterfall(title: &str, baseline: f64, prediction: f64, steps: &[(String, f64)]) -> String {
    let mut level = baseline;
    let mut ends = vec![baseline];
    for (_, c) in steps {
        level += c;
        ends.push(level);
    }
    let f = bar_frame(steps.len() + 2, range(ends.iter().chain([prediction].iter())));
    let mut out = String::new();
    header(&mut out, f.height, title);
    axes(&mut out, &f, "prediction", "");
    let label = |out: &mut String, i: usize, text: &str| {
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#, MARGIN_LEFT - 4.0, row_y(&f, i) + ROW / 2.0, escape(text));
    };
    let bar = |out: &mut String, i: usize, a: f64, b: f64, color: &str| {
        let (x0, x1) = (f.px(a.min(b)), f.px(a.max(b)));
        let _ = writeln!(out, r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#, row_y(&f, i), (x1 - x0).max(1.0), ROW - 6.0);
    };
    label(&mut out, 0, "baseline");
    bar(&mut out, 0, f.x.0, baseline, GREY);
    let mut level = baseline;
    for (i, (name, c)) in steps.iter().enumerate() {
        label(&mut out, i + 1, name);
        bar(&mut out, i + 1, level, level + c, if *c >= 0.0 { ORANGE } else { BLUE });
        level += c;
    }
    label(&mut out, steps.len() + 1, "prediction");
    bar(&mut out, steps.len() + 1, f.x.0, prediction, GREY);
    out.push_str("</svg>\n");
    out
}

/// Horizontal signed bars with optional error whiskers.
pub fn signed_bars(title: &str, bars: &[(String, f64, f64)]) -> String {
    let xr = range(bars.iter().flat_map(|(_, v, sd)| [v - sd, v + sd, 0.0]).collect::<Vec<_>>().iter());
    let f = bar_frame(bars.len(), xr);
    let mut out = String::new();
    header(&mut out, f.height, title);
    axes(&mut out, &f, "contribution", "");
    let zero = f.px(0.0);
    for (i, (name, v, sd)) in bars.iter().enumerate() {
        let y = row_y(&f, i);
        let (x0, x1) = (f.px(v.min(0.0)), f.px(v.max(0.0)));
        let color = if *v >= 0.0 { ORANGE } else { BLUE };
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#, MARGIN_LEFT - 4.0, y + ROW / 2.0, escape(name));
        let _ = writeln!(out, r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#, (x1 - x0).max(1.0), ROW - 6.0);
        if *sd > 0.0 {
            let cy = y + (ROW - 6.0) / 2.0;
            let _ = writeln!(out, r#"<line x1="{:.2}" y1="{cy:.2}" x2="{:.2}" y2="{cy:.2}" stroke="black"/>"#, f.px(v - sd), f.px(v + sd));
        }
    }
    let _ = writeln!(out, r#"<line x1="{zero:.2}" y1="{:.2}" x2="{zero:.2}" y2="{:.2}" stroke="black"/>"#, f.py(f.y.0), f.py(f.y.1));
    out.push_str("</svg>\n");
    out
}
