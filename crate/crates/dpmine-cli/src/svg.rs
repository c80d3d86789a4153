//! Minimal SVG 1.1 output: trace line charts and point scatters.
//!
//! Traces render as one `<polyline>` each; the truth reference renders as a
//! single horizontal `<line>`, so structural assertions can count elements.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 50.0;

pub struct TraceSeries<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub values: &'a [f64],
}

fn fmt_coord(v: f64) -> String {
    format!("{:.2}", v)
}

/// Line chart of one or more traces with a horizontal reference line.
pub fn trace_chart(title: &str, series: &[TraceSeries], truth: Option<f64>) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut max_len = 1usize;
    for s in series {
        for &v in s.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        max_len = max_len.max(s.values.len());
    }
    if let Some(t) = truth {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    if !lo.is_finite() || !hi.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo).abs() < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    let x_of = |i: usize| MARGIN + (i as f64 / (max_len.max(2) - 1) as f64) * (WIDTH - 2.0 * MARGIN);
    let y_of = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    // axes
    let _ = writeln!(
        out,
        r#"<path d="M {m} {t} L {m} {b} L {r} {b}" stroke="black" fill="none" stroke-width="1"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (k, v) in [(0.0, lo), (0.5, 0.5 * (lo + hi)), (1.0, hi)] {
        let y = HEIGHT - MARGIN - k * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
            MARGIN - 6.0,
            y + 4.0,
            v
        );
    }
    if let Some(t) = truth {
        let y = fmt_coord(y_of(t));
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="red" stroke-dasharray="6,4" stroke-width="1.5"/>"#,
            fmt_coord(MARGIN),
            fmt_coord(WIDTH - MARGIN)
        );
    }
    for s in series {
        let mut points = String::new();
        for (i, &v) in s.values.iter().enumerate() {
            let _ = write!(points, "{},{} ", fmt_coord(x_of(i)), fmt_coord(y_of(v)));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.2"><title>{}</title></polyline>"#,
            points.trim_end(),
            s.color,
            s.label
        );
    }
    // legend
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            y,
            s.color,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}

/// 2-D scatter of projected points.
pub fn scatter_chart(title: &str, points: &[(f64, f64)], color: &str) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &(x, y) in points {
        lo[0] = lo[0].min(x);
        hi[0] = hi[0].max(x);
        lo[1] = lo[1].min(y);
        hi[1] = hi[1].max(y);
    }
    for k in 0..2 {
        if !lo[k].is_finite() || hi[k] - lo[k] < 1e-12 {
            lo[k] = -1.0;
            hi[k] = 1.0;
        }
    }
    let x_of = |x: f64| MARGIN + (x - lo[0]) / (hi[0] - lo[0]) * (WIDTH - 2.0 * MARGIN);
    let y_of = |y: f64| HEIGHT - MARGIN - (y - lo[1]) / (hi[1] - lo[1]) * (HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    for &(x, y) in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="1.6" fill="{}" fill-opacity="0.5"/>"#,
            fmt_coord(x_of(x)),
            fmt_coord(y_of(y)),
            color
        );
    }
    out.push_str("</svg>\n");
    out
}
