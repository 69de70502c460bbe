//! Minimal SVG histograms and trace plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Equal-width histogram over `[lo, hi]`; values outside are clamped into the end bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], extra: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let all = values.iter().chain(extra).copied().filter(|v| v.is_finite());
        let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let mut counts = vec![0; bins];
        let w = (hi - lo) / bins as f64;
        for v in values.iter().filter(|v| v.is_finite()) {
            let b = (((v - lo) / w) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn edges(&self, b: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn axes(out: &mut String, x_lo: f64, x_hi: f64, y_hi: f64) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN / 1.5);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{x0}" y="{}" text-anchor="start">{}</text>"#, y0 + 16.0, fmt(x_lo));
    let _ = writeln!(out, r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#, y0 + 16.0, fmt(x_hi));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 4.0, fmt(y_hi));
}

fn fmt(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Histogram bars with an optional vertical marker (the observed value).
pub fn histogram_svg(title: &str, hist: &Histogram, marker: Option<f64>) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let y_max = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    axes(&mut out, hist.lo, hist.hi, y_max);
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let pw = WIDTH - 1.5 * MARGIN;
    let ph = HEIGHT - MARGIN - MARGIN / 1.5;
    let bw = pw / hist.counts.len() as f64;
    for (b, &c) in hist.counts.iter().enumerate() {
        let h = ph * c as f64 / y_max;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#8da0cb" stroke="white"/>"##,
            x0 + b as f64 * bw,
            y0 - h,
            bw,
            h
        );
    }
    if let Some(m) = marker {
        let x = x0 + pw * ((m - hist.lo) / (hist.hi - hist.lo)).clamp(0.0, 1.0);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="#d7301f" stroke-width="2"/>"##, MARGIN / 1.5);
    }
    out.push_str("</svg>\n");
    out
}

/// One polyline per series, sharing axes.
pub fn trace_svg(title: &str, series: &[Vec<f64>]) -> String {
    const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
    let mut out = String::new();
    header(&mut out, title);
    let finite = series.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let len = series.iter().map(Vec::len).max().unwrap_or(1).max(2);
    axes(&mut out, 1.0, len as f64, hi);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN, fmt(lo));
    let pw = WIDTH - 1.5 * MARGIN;
    let ph = HEIGHT - MARGIN - MARGIN / 1.5;
    for (c, s) in series.iter().enumerate() {
        let mut pts = String::new();
        for (i, v) in s.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            let x = MARGIN + pw * i as f64 / (len - 1) as f64;
            let y = HEIGHT - MARGIN - ph * (v - lo) / (hi - lo);
            let _ = write!(pts, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1"/>"#,
            pts.trim_end(),
            COLORS[c % COLORS.len()]
        );
    }
    out.push_str("</svg>\n");
    out
}
