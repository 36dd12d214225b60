//! Minimal SVG plots: axes, ticks and polylines.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line plot over fixed or data-derived axis ranges.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter().copied());
    let (x0, x1) = x_range.unwrap_or_else(|| extent(all().map(|p| p.0)));
    let (y0, y1) = y_range.unwrap_or_else(|| extent(all().map(|p| p.1)));
    let mut svg = frame(title, x_label, y_label, (x0, x1), (y0, y1));
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x, x0, x1), sy(y, y0, y1)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            W - MARGIN - 110.0,
            MARGIN + 14.0 * (k as f64 + 1.0),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Histogram with `bins` equal-width bars over the data range.
pub fn histogram(title: &str, x_label: &str, values: &[f64], bins: usize) -> String {
    let bins = bins.max(1);
    let (lo, mut hi) = extent(values.iter().copied());
    if hi <= lo {
        hi = lo + 1.0;
    }
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let mut svg = frame(title, x_label, "count", (lo, hi), (0.0, top));
    let bw = (hi - lo) / bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        let (xa, xb) = (sx(lo + bw * i as f64, lo, hi), sx(lo + bw * (i + 1) as f64, lo, hi));
        let ya = sy(c as f64, 0.0, top);
        let _ = writeln!(
            svg,
            r##"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            xb - xa,
            H - MARGIN - ya
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn sx(x: f64, x0: f64, x1: f64) -> f64 {
    MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN)
}

fn sy(y: f64, y0: f64, y1: f64) -> f64 {
    H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN)
}

fn frame(title: &str, x_label: &str, y_label: &str, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<polyline fill="none" stroke="black" points="{l},{t} {l},{b} {r},{b}"/>"#);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv, x0, x1), sy(yv, y0, y1));
        let _ = writeln!(s, r#"<line x1="{px:.1}" y1="{b}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, b + 4.0);
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#, b + 16.0, tick(xv));
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{py:.1}" x2="{l}" y2="{py:.1}" stroke="black"/>"#, l - 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#, l - 6.0, py + 3.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    s
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
