//! Minimal hand-written SVG plots. Output depends only on the input numbers,
//! formatted at fixed precision, so reruns are byte-identical.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Line<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for &(px, py) in points.filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

fn open(out: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#);
    let _ = writeln!(out, r#"<text x="{x0}" y="{}" text-anchor="start">{}</text>"#, y0 + 16.0, fmt(frame.x.0));
    let _ = writeln!(out, r#"<text x="{x1}" y="{}" text-anchor="end">{}</text>"#, y0 + 16.0, fmt(frame.x.1));
    let _ = writeln!(out, r#"<text x="{}" y="{y0}" text-anchor="end">{}</text>"#, x0 - 4.0, fmt(frame.y.0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 4.0, y1 + 4.0, fmt(frame.y.1));
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn fmt(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per entry, with a legend in the top-left corner.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, lines: &[Line<'_>]) -> String {
    let frame = Frame::fit(lines.iter().flat_map(|l| l.points.iter()));
    let mut out = String::new();
    open(&mut out, title, &frame, x_label, y_label);
    for (i, line) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, &(x, y)) in line.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if k == 0 { "M" } else { " L" }, frame.px(x), frame.py(y));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
        let ly = MARGIN + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, MARGIN + 8.0, escape(line.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Equal-width histogram of `values`, with an optional vertical marker.
pub fn histogram(title: &str, x_label: &str, values: &[f64], bins: usize, marker: Option<f64>) -> String {
    let bins = bins.max(1);
    let (lo, hi) = widen(
        values
            .iter()
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
    );
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values.iter().filter(|v| v.is_finite()) {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let frame = Frame { x: (lo, hi), y: (0.0, top) };
    let mut out = String::new();
    open(&mut out, title, &frame, x_label, "count");
    for (k, &c) in counts.iter().enumerate() {
        let x0 = frame.px(lo + k as f64 * width);
        let x1 = frame.px(lo + (k + 1) as f64 * width);
        let y = frame.py(c as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="white"/>"#,
            x1 - x0,
            frame.py(0.0) - y,
            PALETTE[0]
        );
    }
    if let Some(m) = marker.filter(|m| m.is_finite()) {
        let x = frame.px(m.clamp(lo, hi));
        let _ = writeln!(
            out,
            r#"<path d="M{x:.2} {} L{x:.2} {}" stroke="{}" stroke-dasharray="4 3"/>"#,
            frame.py(0.0),
            frame.py(top),
            PALETTE[1]
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_plot_is_deterministic_and_well_formed() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, (i as f64).sin())).collect();
        let a = line_plot("sin", "t", "u", &[Line { label: "a<b", points: &pts }]);
        let b = line_plot("sin", "t", "u", &[Line { label: "a<b", points: &pts }]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("a&lt;b"));
    }

    #[test]
    fn histogram_counts_every_value() {
        let values = [1.0, 1.0, 2.0, 3.0];
        let svg = histogram("h", "q", &values, 3, Some(2.0));
        assert_eq!(svg.matches("<rect x=").count(), 3);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn constant_inputs_do_not_divide_by_zero() {
        let svg = histogram("h", "q", &[5.0; 10], 4, None);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        let pts = [(1.0, 2.0), (1.0, 2.0)];
        let svg = line_plot("c", "x", "y", &[Line { label: "c", points: &pts }]);
        assert!(!svg.contains("NaN"));
    }
}
