//! Minimal static SVG line charts for sweep and profile output. No styling
//! beyond what a reader needs; consumers are scripts and humans skimming
//! results.

use std::fmt::Write as _;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub color: &'a str,
    /// Draw markers at the data points.
    pub markers: bool,
}

/// Render series into a fixed-size line chart. Axis ranges come from the
/// data; the caller applies any log transforms beforehand and labels
/// accordingly.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;

    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() || x0 == x1 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !y0.is_finite() || y0 == y1 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (y - y0) / (y1 - y0) * (H - MT - MB);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>",
        0.5 * W,
        escape(title)
    );
    // axes
    let _ = writeln!(
        out,
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        H - MB,
        W - MR,
        H - MB
    );
    let _ = writeln!(out, "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>", H - MB);
    for (t, v) in [(0.0, x0), (0.5, 0.5 * (x0 + x1)), (1.0, x1)] {
        let x = ML + t * (W - ML - MR);
        let _ = writeln!(
            out,
            "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{v:.3}</text>",
            H - MB + 16.0
        );
    }
    for (t, v) in [(0.0, y0), (0.5, 0.5 * (y0 + y1)), (1.0, y1)] {
        let y = H - MB - t * (H - MT - MB);
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.3}</text>",
            ML - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        0.5 * W,
        H - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        0.5 * H,
        0.5 * H,
        escape(y_label)
    );
    // series
    for (k, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let path: Vec<String> = s.points.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            s.color,
            path.join(" ")
        );
        if s.markers {
            for (x, y) in &s.points {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\"/>",
                    sx(*x),
                    sy(*y),
                    s.color
                );
            }
        }
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\">{}</text>",
            W - MR - 150.0,
            MT + 16.0 * (k as f64 + 1.0),
            s.color,
            escape(s.label)
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_series_points() {
        let s = Series {
            label: "data",
            points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 1.5)],
            color: "steelblue",
            markers: true,
        };
        let svg = line_chart("t", "x", "y", &[s]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("circle"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
