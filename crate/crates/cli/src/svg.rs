//! Minimal SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 405.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const MAX_POINTS: usize = 2000;

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    /// Plot `log10(y)`; non-positive values are dropped.
    pub log_y: bool,
}

/// Keeps the per-bucket extremes so that spikes survive the thinning.
fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let bucket = points.len().div_ceil(MAX_POINTS / 2);
    let mut out = Vec::with_capacity(MAX_POINTS + 2);
    for chunk in points.chunks(bucket) {
        let lo = chunk.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
        let hi = chunk.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
        if lo.0 <= hi.0 {
            out.extend([*lo, *hi]);
        } else {
            out.extend([*hi, *lo]);
        }
    }
    out.dedup();
    out
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = hi.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders one polyline with axes, five ticks per axis and labels.
pub fn line_chart(chart: &Chart<'_>, points: &[(f64, f64)]) -> String {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite() && (!chart.log_y || p.1 > 0.0))
        .map(|&(x, y)| (x, if chart.log_y { y.log10() } else { y }))
        .collect();
    let pts = thin(&pts);
    let (x0, x1) = range(pts.iter().map(|p| p.0));
    let (mut y0, mut y1) = range(pts.iter().map(|p| p.1));
    if chart.log_y {
        y0 = y0.floor();
        y1 = y1.ceil().max(y0 + 1.0);
    }
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(chart.title)
    );
    let _ =
        writeln!(s, r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let (px, py) = (sx(fx), sy(fy));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{MARGIN_T}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            MARGIN_T + ph,
            MARGIN_T + ph + 16.0,
            tick_label(fx, false)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            py + 4.0,
            tick_label(fy, chart.log_y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 8.0,
        escape(chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(chart.y_label)
    );
    if !pts.is_empty() {
        let mut path = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, sx(x), sy(y));
        }
        let _ = writeln!(s, r##"<path d="{path}" fill="none" stroke="#1f5fa8" stroke-width="1.2"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let pts: Vec<(f64, f64)> = (0..5000).map(|i| (i as f64 * 0.01, (-(i as f64) * 0.001).exp())).collect();
        let svg = line_chart(&Chart { title: "e & t", x_label: "t", y_label: "|e|", log_y: true }, &pts);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("e &amp; t"));
        let path = svg.lines().find(|l| l.starts_with("<path")).unwrap();
        assert!(path.matches(" L").count() < MAX_POINTS + 2);
    }

    #[test]
    fn degenerate_input() {
        let svg = line_chart(&Chart { title: "", x_label: "", y_label: "", log_y: false }, &[(1.0, 2.0)]);
        assert!(svg.contains("<path"));
        let empty = line_chart(&Chart { title: "", x_label: "", y_label: "", log_y: true }, &[(1.0, 0.0)]);
        assert!(!empty.contains("<path"));
    }
}
