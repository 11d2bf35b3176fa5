//! Deterministic SVG emitters for line plots and bar charts. No
//! timestamps, no randomness: the same input yields byte-identical files.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// A horizontal reference line.
#[derive(Debug, Clone, PartialEq)]
pub struct RefLine {
    pub label: String,
    pub value: f64,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 56.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Render a line plot with optional horizontal reference lines.
pub fn render_line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    ref_lines: &[RefLine],
) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::Config("plot needs at least one non-empty series".into()));
    }
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    let mut ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .collect();
    ys.extend(ref_lines.iter().map(|r| r.value));
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);

    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let sy =
        |y: f64| HEIGHT - MARGIN_B - (y - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = svg_header(title, x_label, y_label, x_min, x_max, y_min, y_max, &sx, &sy);

    for (i, line) in ref_lines.iter().enumerate() {
        let y = sy(line.value);
        let dash = if i == 0 { "6,3" } else { "2,3" };
        let color = if i == 0 { "#c62828" } else { "#2e7d32" };
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-dasharray="{dash}" stroke-width="1.5"/>"#,
            MARGIN_L,
            WIDTH - MARGIN_R,
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            MARGIN_L + 4.0,
            y - 4.0,
            escape(&line.label),
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for (x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="{color}"/>"#,
                sx(*x),
                sy(*y)
            );
        }
        // Legend entry.
        let ly = MARGIN_T + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#,
            WIDTH - MARGIN_R - 150.0,
            ly
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            WIDTH - MARGIN_R - 135.0,
            ly + 9.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render grouped vertical bars: one cluster per row label, one bar per
/// column label.
pub fn render_bar_chart(
    title: &str,
    y_label: &str,
    rows: &[String],
    columns: &[String],
    values: &[Vec<f64>],
) -> Result<String> {
    if rows.is_empty() || columns.is_empty() || values.len() != rows.len() {
        return Err(Error::Config("bar chart needs rows and columns".into()));
    }
    let y_max = values
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let sy = |v: f64| HEIGHT - MARGIN_B - v / y_max * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-size="14" font-weight="bold">{}</text>"#,
        MARGIN_L,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
        escape(y_label)
    );
    // Axes.
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{:.1}" stroke="black"/>"#,
        HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    );
    for tick in 0..=4 {
        let v = y_max * tick as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 3.0,
            fmt_num(v)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            MARGIN_L,
            WIDTH - MARGIN_R
        );
    }

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let cluster_w = plot_w / rows.len() as f64;
    let bar_w = cluster_w * 0.7 / columns.len() as f64;
    for (ri, row) in rows.iter().enumerate() {
        let x0 = MARGIN_L + cluster_w * ri as f64 + cluster_w * 0.15;
        for (ci, _col) in columns.iter().enumerate() {
            let v = values[ri][ci];
            let x = x0 + bar_w * ci as f64;
            let y = sy(v);
            let color = PALETTE[ci % PALETTE.len()];
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{bar_w:.1}" height="{:.1}" fill="{color}"/>"#,
                HEIGHT - MARGIN_B - y
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            x0 + bar_w * columns.len() as f64 / 2.0,
            HEIGHT - MARGIN_B + 16.0,
            escape(row)
        );
    }
    for (ci, col) in columns.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let lx = WIDTH - MARGIN_R - 120.0;
        let ly = MARGIN_T + 16.0 * ci as f64;
        let _ = writeln!(svg, r#"<rect x="{lx:.1}" y="{ly:.1}" width="10" height="10" fill="{color}"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            lx + 14.0,
            ly + 9.0,
            escape(col)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[allow(clippy::too_many_arguments)]
fn svg_header(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    sx: &dyn Fn(f64) -> f64,
    sy: &dyn Fn(f64) -> f64,
) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN_L}" y="24" font-size="14" font-weight="bold">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{:.1}" stroke="black"/>"#,
        HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_L}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    );
    // Four ticks per axis.
    for tick in 0..=4 {
        let xv = x_min + (x_max - x_min) * tick as f64 / 4.0;
        let yv = y_min + (y_max - y_min) * tick as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            sx(xv),
            HEIGHT - MARGIN_B + 14.0,
            fmt_num(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            sy(yv) + 3.0,
            fmt_num(yv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            MARGIN_L,
            sy(yv),
            WIDTH - MARGIN_R,
            sy(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (WIDTH + MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" transform="rotate(-90 14 {:.1})">{}</text>"#,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
        (HEIGHT - MARGIN_B + MARGIN_T) / 2.0,
        escape(y_label)
    );
    svg
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (max - min).abs() < 1e-12 {
        min -= 0.5;
        max += 0.5;
    }
    let pad = (max - min) * 0.05;
    (min - pad, max + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_series_has_three_markers() {
        let svg = render_line_plot(
            "t",
            "x",
            "y",
            &[Series {
                name: "s".into(),
                points: vec![(1.0, 0.1), (2.0, 0.4), (3.0, 0.2)],
            }],
            &[],
        )
        .unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn identical_input_identical_bytes() {
        let series = [Series {
            name: "s".into(),
            points: vec![(1.0, 0.5), (2.0, 0.25)],
        }];
        let lines = [RefLine {
            label: "base".into(),
            value: 0.4,
        }];
        let a = render_line_plot("t", "x", "y", &series, &lines).unwrap();
        let b = render_line_plot("t", "x", "y", &series, &lines).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reference_lines_render() {
        let svg = render_line_plot(
            "t",
            "m",
            "rate",
            &[Series {
                name: "genetic".into(),
                points: vec![(2.0, 0.6), (3.0, 0.7)],
            }],
            &[
                RefLine {
                    label: "mean base rate".into(),
                    value: 0.8,
                },
                RefLine {
                    label: "mean pairwise rate".into(),
                    value: 0.5,
                },
            ],
        )
        .unwrap();
        assert!(svg.contains("mean base rate"));
        assert!(svg.contains("mean pairwise rate"));
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(render_line_plot("t", "x", "y", &[], &[]).is_err());
        assert!(render_line_plot(
            "t",
            "x",
            "y",
            &[Series {
                name: "s".into(),
                points: vec![],
            }],
            &[]
        )
        .is_err());
    }

    #[test]
    fn bar_chart_renders_for_each_cell() {
        let svg = render_bar_chart(
            "factors",
            "score",
            &["architecture".into(), "input_form".into()],
            &["pwws".into(), "ga".into()],
            &[vec![0.2, 0.02], vec![0.3, 0.05]],
        )
        .unwrap();
        // 4 data bars + 2 legend swatches.
        assert_eq!(svg.matches("<rect").count(), 1 + 4 + 2);
    }
}
