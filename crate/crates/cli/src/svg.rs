//! Minimal SVG charts: log-scale line plots and scatter panels.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

/// Line chart with a linear x axis and a base-10 log y axis. Points with a
/// non-positive or non-finite y are skipped.
pub fn log_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let (d0, mut d1) = (y0.floor(), y1.ceil());
    if d1 <= d0 {
        d1 = d0 + 1.0;
    }
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |ly: f64| TOP + (d1 - ly) / (d1 - d0) * ph;

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(title));
    // decade grid
    let step = ((d1 - d0) / 10.0).ceil().max(1.0);
    let mut d = d0;
    while d <= d1 {
        let y = sy(d);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#, LEFT - 6.0, y + 4.0, d as i64);
        d += step;
    }
    for i in 0..=5 {
        let xv = x0 + (x1 - x0) * i as f64 / 5.0;
        let x = sx(xv);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick(xv));
    }
    let _ = writeln!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>"##);
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.log10())))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if !coords.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                s.color,
                coords.join(" ")
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"{dash}/>"#, lx + 24.0, s.color);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v == v.round() {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Dot,
    Square,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Scatter {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    pub marker: Marker,
    pub color: &'static str,
}

/// A row of square scatter panels sharing the window `[lo, hi]²`.
pub fn scatter_panels(title: &str, panels: &[(String, Vec<Scatter>)], lo: f64, hi: f64) -> String {
    let side = 220.0;
    let gap = 20.0;
    let cols = panels.len().clamp(1, 3);
    let rows = panels.len().div_ceil(cols).max(1);
    let width = gap + cols as f64 * (side + gap);
    let height = 50.0 + rows as f64 * (side + 40.0) + 30.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, width / 2.0, escape(title));
    for (n, (name, scatters)) in panels.iter().enumerate() {
        let ox = gap + (n % cols) as f64 * (side + gap);
        let oy = 50.0 + (n / cols) as f64 * (side + 40.0);
        let map = |p: [f64; 2]| (ox + (p[0] - lo) / (hi - lo) * side, oy + (hi - p[1]) / (hi - lo) * side);
        let _ = writeln!(out, r##"<rect x="{ox}" y="{oy}" width="{side}" height="{side}" fill="none" stroke="#000"/>"##);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ox + side / 2.0, oy + side + 16.0, escape(name));
        for s in scatters {
            for &p in &s.points {
                let (x, y) = map(p);
                let _ = match s.marker {
                    Marker::Dot => writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, s.color),
                    Marker::Square => writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="{}"/>"#, x - 3.5, y - 3.5, s.color),
                    Marker::Cross => writeln!(
                        out,
                        r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{}" stroke-width="1.5"/>"#,
                        x - 4.0, y - 4.0, x + 4.0, y + 4.0, x - 4.0, y + 4.0, x + 4.0, y - 4.0, s.color
                    ),
                };
            }
        }
    }
    // legend from the first panel
    if let Some((_, scatters)) = panels.first() {
        let ly = height - 14.0;
        for (i, s) in scatters.iter().enumerate() {
            let lx = gap + i as f64 * 150.0;
            let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="4" fill="{}"/>"#, lx + 4.0, ly - 4.0, s.color);
            let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 14.0, escape(&s.label));
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_skips_nonpositive_points() {
        let s = Series { label: "a<b".into(), points: vec![(1.0, 1.0), (2.0, 0.0), (3.0, 1e-3)], color: color(0), dashed: true };
        let svg = log_chart("t", "k", "err", &[s]);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("a&lt;b"));
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.split("points=\"").nth(1).unwrap().split(' ').count(), 2);
        assert!(svg.contains(">1e-3<") && svg.contains(">1e0<"));
    }

    #[test]
    fn empty_chart_is_valid() {
        let svg = log_chart("t", "k", "err", &[]);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn panels_lay_out_in_rows_of_three() {
        let sc = Scatter { label: "p".into(), points: vec![[0.0, 0.0]], marker: Marker::Cross, color: color(1) };
        let panels: Vec<_> = (0..6).map(|i| (format!("k = {i}"), vec![sc.clone()])).collect();
        let svg = scatter_panels("snap", &panels, -1.0, 1.0);
        assert_eq!(svg.matches("<path").count(), 6);
        assert!(svg.contains("k = 5"));
    }
}
