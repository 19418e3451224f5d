//! Self-contained SVG line charts (no external CSS or fonts).

use anyhow::{bail, Result};
use std::fmt::Write as _;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// One plotted line.
#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".to_owned()
    } else if v.abs() >= 0.01 && v.abs() < 100000.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders a line chart with one polyline per series.
///
/// `log_y` plots `log10(y)` and labels the axis accordingly; points with
/// non-positive `y` are dropped in that mode. Errors on empty input.
pub fn render_line_chart(
    series: &[Series],
    title: &str,
    x_label: &str,
    y_label: &str,
    log_y: bool,
) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        bail!("nothing to plot: no series with points");
    }
    let mut transformed: Vec<Series> = Vec::with_capacity(series.len());
    for s in series {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(_, y)| !log_y || *y > 0.0)
            .map(|&(x, y)| (x, if log_y { y.log10() } else { y }))
            .collect();
        transformed.push(Series {
            label: s.label.clone(),
            points: pts,
        });
    }
    if transformed.iter().all(|s| s.points.is_empty()) {
        bail!("nothing to plot: log scale dropped every point");
    }

    let all = transformed.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
        y_min -= 1.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // Axes.
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333" stroke-width="1"/>"##
    );
    // Ticks: min/mid/max on both axes.
    for frac in [0.0, 0.5, 1.0] {
        let xv = x_min + frac * (x_max - x_min);
        let yv = y_min + frac * (y_max - y_min);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            px(xv),
            HEIGHT - MARGIN_B + 16.0,
            format_tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            py(yv) + 4.0,
            format_tick(yv)
        );
        if frac != 0.0 && frac != 1.0 {
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN_L}" y1="{}" x2="{}" y2="{}" stroke="#ddd" stroke-width="1"/>"##,
                py(yv),
                WIDTH - MARGIN_R,
                py(yv)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let y_axis_label = if log_y {
        format!("log10 {y_label}")
    } else {
        y_label.to_owned()
    };
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&y_axis_label)
    );
    // Series.
    for (i, s) in transformed.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (x, y) in &s.points {
            let _ = write!(path, "{:.2},{:.2} ", px(*x), py(*y));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.trim_end()
        );
        // Legend entry.
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="12" height="3" fill="{color}"/>"#,
            MARGIN_L + 10.0,
            ly - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_L + 28.0,
            ly,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal well-formedness check: tags balance and a single root.
    fn assert_well_formed(xml: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut roots = 0;
        let mut rest = xml;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().expect("close without open");
                assert_eq!(open, name, "mismatched close tag");
                if stack.is_empty() {
                    roots += 1;
                }
            } else if tag.ends_with('/') || tag.starts_with('?') || tag.starts_with('!') {
                if stack.is_empty() && !tag.starts_with('?') && !tag.starts_with('!') {
                    roots += 1;
                }
            } else {
                let name: String = tag.split_whitespace().next().unwrap().to_owned();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        assert_eq!(roots, 1, "expected exactly one root element");
    }

    #[test]
    fn constant_series_gives_horizontal_polyline() {
        let s = Series {
            label: "flat".into(),
            points: (0..10).map(|k| (k as f64, 2.5)).collect(),
        };
        let xml = render_line_chart(&[s], "t", "x", "y", false).unwrap();
        assert_well_formed(&xml);
        let poly = xml
            .lines()
            .find(|l| l.starts_with("<polyline"))
            .expect("has a polyline");
        let ys: Vec<&str> = poly
            .split('"')
            .nth(1)
            .unwrap()
            .split_whitespace()
            .map(|p| p.split(',').nth(1).unwrap())
            .collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]), "polyline not horizontal");
    }

    #[test]
    fn two_series_have_two_polylines_with_distinct_legends() {
        let a = Series {
            label: "relax".into(),
            points: vec![(0.0, 1.0), (1.0, 2.0)],
        };
        let b = Series {
            label: "kf-relax".into(),
            points: vec![(0.0, 2.0), (1.0, 1.0)],
        };
        let xml = render_line_chart(&[a, b], "t", "x", "y", false).unwrap();
        assert_well_formed(&xml);
        assert_eq!(xml.matches("<polyline").count(), 2);
        assert!(xml.contains(">relax<"));
        assert!(xml.contains(">kf-relax<"));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(render_line_chart(&[], "t", "x", "y", false).is_err());
        let empty = Series {
            label: "e".into(),
            points: vec![],
        };
        assert!(render_line_chart(&[empty], "t", "x", "y", false).is_err());
    }

    #[test]
    fn log_scale_drops_nonpositive_points() {
        let s = Series {
            label: "v".into(),
            points: vec![(0.0, 0.0), (1.0, 10.0), (2.0, 100.0)],
        };
        let xml = render_line_chart(&[s], "t", "x", "variance", true).unwrap();
        assert_well_formed(&xml);
        assert!(xml.contains("log10 variance"));
    }
}
