//! Minimal SVG line plots: one polyline per curve plus a dashed reference.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

/// Curves longer than this are thinned before drawing.
pub const MAX_POINTS: usize = 500;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Panel {
    pub title: String,
    pub curves: Vec<Vec<(f64, f64)>>,
    pub reference: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let step = points.len().div_ceil(MAX_POINTS - 1);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(step).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

fn nice_ceiling(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 || x.is_infinite() {
        return 1.0;
    }
    let mag = 10f64.powf(x.log10().floor());
    let r = x / mag;
    let n = [1.0, 1.2, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0]
        .into_iter()
        .find(|&c| c >= r - 1e-12)
        .unwrap_or(10.0);
    n * mag
}

fn points_attr(points: &[(f64, f64)], sx: impl Fn(f64) -> f64, sy: impl Fn(f64) -> f64) -> String {
    let mut s = String::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", sx(x), sy(y));
    }
    s
}

pub fn render(panel: &Panel) -> String {
    let finite = |&(_, y): &(f64, f64)| y.is_finite();
    let xmax = panel
        .curves
        .iter()
        .flat_map(|c| c.iter().filter(|p| finite(p)).map(|p| p.0))
        .fold(1.0f64, f64::max);
    let ymax_data = panel
        .curves
        .iter()
        .flat_map(|c| c.iter().filter(|p| finite(p)).map(|p| p.1))
        .fold(panel.reference, f64::max);
    let xmax = nice_ceiling(xmax);
    let ymax = nice_ceiling(ymax_data * 1.05);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + pw * x / xmax;
    let sy = |y: f64| TOP + ph * (1.0 - y.clamp(0.0, ymax) / ymax);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&panel.title)
    );
    let (x0, y0, x1, y1) = (LEFT, TOP + ph, LEFT + pw, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=5 {
        let xv = xmax * i as f64 / 5.0;
        let yv = ymax * i as f64 / 5.0;
        let (tx, ty) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{tx:.2}" y1="{y0}" x2="{tx:.2}" y2="{:.2}" stroke="black"/><text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            format_tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ty:.2}" x2="{x0}" y2="{ty:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            ty + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">k</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">ϱ_k</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    let opacity = if panel.curves.len() > 10 { 0.35 } else { 0.9 };
    for (i, c) in panel.curves.iter().enumerate() {
        let pts: Vec<(f64, f64)> = c.iter().copied().filter(finite).collect();
        let pts = decimate(&pts);
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="0.8" stroke-opacity="{opacity}" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            points_attr(&pts, sx, sy)
        );
    }
    let r = panel.reference;
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="6 4" points="{}"/>"#,
        points_attr(&[(0.0, r), (xmax, r)], sx, sy)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">ϱ* = {:.4}</text>"#,
        x1 - 4.0,
        sy(r) - 6.0,
        r
    );
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    let t = format!("{v:.3}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t.is_empty() || t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_count_and_decimation() {
        let long: Vec<(f64, f64)> = (1..=2000).map(|k| (k as f64, 0.5)).collect();
        let panel = Panel {
            title: "a < b & c".into(),
            curves: vec![long, vec![(1.0, 0.2), (2.0, f64::NAN)]],
            reference: 0.5,
        };
        let svg = render(&panel);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("a &lt; b &amp; c"));
        let first = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let npts = first.split("points=\"").nth(1).unwrap().split(' ').count();
        assert!(npts <= MAX_POINTS + 1);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn ticks() {
        assert_eq!(format_tick(0.0), "0");
        assert_eq!(format_tick(0.25), "0.25");
        assert_eq!(format_tick(100.0), "100");
        assert_eq!(nice_ceiling(0.93), 1.0);
        assert_eq!(nice_ceiling(137.0), 150.0);
    }
}
