//! SVG return curves from aggregate CSVs.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::AGGREGATE_HEADER;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Mean return and its standard deviation per episode for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub episodes: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Reads an aggregate CSV. The label comes from the `algorithm=` field of
/// a comment line, falling back to `fallback`.
pub fn parse_aggregate(text: &str, fallback: &str) -> Result<Curve> {
    let mut label = fallback.to_string();
    let mut header_seen = false;
    let mut curve = Curve {
        label: String::new(),
        episodes: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
    };
    for (index, line) in text.lines().enumerate() {
        let lineno = index + 1;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(name) = comment.split_whitespace().find_map(|f| f.strip_prefix("algorithm=")) {
                label = name.to_string();
            }
            continue;
        }
        if !header_seen {
            if line.trim() != AGGREGATE_HEADER {
                return Err(Error::Parse(format!(
                    "line {lineno}: expected header `{AGGREGATE_HEADER}`, found `{}`",
                    line.trim()
                )));
            }
            header_seen = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected 7 fields, found {}",
                fields.len()
            )));
        }
        curve.episodes.push(fields[0]);
        curve.mean.push(fields[1]);
        curve.std.push(fields[2]);
    }
    if !header_seen {
        return Err(Error::Parse(format!("missing header `{AGGREGATE_HEADER}`")));
    }
    curve.label = label;
    Ok(curve)
}

pub fn read_aggregate(path: &Path) -> Result<Curve> {
    let fallback = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let fallback = fallback.strip_suffix("_aggregate").unwrap_or(fallback);
    parse_aggregate(&std::fs::read_to_string(path)?, fallback)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders mean lines with ±1 std bands, a legend and labelled axes.
/// Output depends only on the curves, so identical inputs give identical
/// bytes.
pub fn render_svg(curves: &[Curve]) -> Result<String> {
    if curves.is_empty() || curves.iter().any(|c| c.episodes.is_empty()) {
        return Err(Error::InvalidParameter("nothing to plot".into()));
    }
    let x_min = curves
        .iter()
        .flat_map(|c| c.episodes.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let x_max = curves
        .iter()
        .flat_map(|c| c.episodes.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = curves
        .iter()
        .flat_map(|c| c.mean.iter().zip(&c.std).map(|(m, s)| m - s))
        .fold(f64::INFINITY, f64::min);
    let hi = curves
        .iter()
        .flat_map(|c| c.mean.iter().zip(&c.std).map(|(m, s)| m + s))
        .fold(f64::NEG_INFINITY, f64::max);
    let (y_min, y_max) = if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    };
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_min) / x_span * plot_w;
    let py = |y: f64| TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in 0..=TICKS {
        let f = t as f64 / TICKS as f64;
        let x = x_min + f * x_span;
        let y = y_min + f * (y_max - y_min);
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4:.0}</text>"#,
            px(x),
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            x
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="black"/><text x="{3}" y="{4:.2}" text-anchor="end">{5:.3}</text>"#,
            LEFT - 5.0,
            py(y),
            LEFT,
            LEFT - 8.0,
            py(y) + 4.0,
            y
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">episode</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">return</text>"#,
        TOP + plot_h / 2.0
    );

    for (index, curve) in curves.iter().enumerate() {
        let colour = PALETTE[index % PALETTE.len()];
        let mut band = String::new();
        for (x, (m, s)) in curve.episodes.iter().zip(curve.mean.iter().zip(&curve.std)) {
            let _ = write!(band, "{:.2},{:.2} ", px(*x), py(m + s));
        }
        for (x, (m, s)) in curve.episodes.iter().zip(curve.mean.iter().zip(&curve.std)).rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(*x), py(m - s));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = curve
            .episodes
            .iter()
            .zip(&curve.mean)
            .map(|(x, m)| format!("{:.2},{:.2}", px(*x), py(*m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * index as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="3"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&curve.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aggregate(label: &str, rows: &[(f64, f64)]) -> String {
        let mut text = format!("# config_hash=abc algorithm={label} seeds=0\n{AGGREGATE_HEADER}\n");
        for (k, (m, s)) in rows.iter().enumerate() {
            text.push_str(&format!("{},{m},{s},0,0,0,0\n", k + 1));
        }
        text
    }

    #[test]
    fn reads_label_and_columns() {
        let curve = parse_aggregate(&aggregate("uc-hrl", &[(1.0, 0.5), (2.0, 0.25)]), "x").unwrap();
        assert_eq!(curve.label, "uc-hrl");
        assert_eq!(curve.mean, vec![1.0, 2.0]);
        assert_eq!(curve.std, vec![0.5, 0.25]);
    }

    #[test]
    fn header_mismatch_is_a_parse_error() {
        let err = parse_aggregate("episode,return\n1,2\n", "x").unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("line 1")));
    }

    #[test]
    fn one_legend_entry_per_curve() {
        let a = parse_aggregate(&aggregate("a", &[(1.0, 0.0), (1.0, 0.0)]), "").unwrap();
        let b = parse_aggregate(&aggregate("b<c", &[(0.0, 0.1), (0.5, 0.1)]), "").unwrap();
        let svg = render_svg(&[a, b]).unwrap();
        assert_eq!(svg.matches("class=\"legend\"").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.contains(">episode<") && svg.contains(">return<"));
    }
}
