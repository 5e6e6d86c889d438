//! Minimal static SVG line charts. No styling knobs: fixed canvas, fixed
//! palette, axis ticks chosen from the data range. Output is deterministic
//! for identical input.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Render line series on a shared axis pair. `log_x` plots log₁₀ of the x
/// values (used for viscosity ladders); tick labels stay in original units.
pub fn line_chart(title: &str, x_label: &str, series: &[Series], log_x: bool) -> String {
    let map_x = |x: f64| if log_x { x.log10() } else { x };
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            let x = map_x(x);
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() || x_max <= x_min {
        x_max = x_min + 1.0;
    }
    if !y_min.is_finite() {
        y_min = 0.0;
        y_max = 1.0;
    }
    if y_max <= y_min {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + (y_max - y) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    )
    .unwrap();
    writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>").unwrap();
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    )
    .unwrap();

    // Axes.
    writeln!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" \
         fill=\"none\" stroke=\"#333\"/>"
    )
    .unwrap();
    for tick in 0..=4 {
        let fx = x_min + (x_max - x_min) * tick as f64 / 4.0;
        let x = px(fx);
        let label = if log_x {
            format!("1e{fx:.1}")
        } else {
            format!("{fx:.3}")
        };
        writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"2,4\"/>",
            MARGIN_TOP,
            MARGIN_TOP + plot_h
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>",
            MARGIN_TOP + plot_h + 18.0
        )
        .unwrap();

        let fy = y_min + (y_max - y_min) * tick as f64 / 4.0;
        let y = py(fy);
        writeln!(
            svg,
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#999\" stroke-dasharray=\"2,4\"/>",
            MARGIN_LEFT + plot_w
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{fy:.3}</text>",
            MARGIN_LEFT - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    )
    .unwrap();

    // Series and legend.
    for (index, s) in series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let mut points = String::new();
        for &(x, y) in &s.points {
            write!(points, "{:.2},{:.2} ", px(map_x(x)), py(y)).unwrap();
        }
        writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            points.trim_end()
        )
        .unwrap();
        let ly = MARGIN_TOP + 16.0 * index as f64 + 8.0;
        writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            WIDTH - MARGIN_RIGHT + 10.0,
            WIDTH - MARGIN_RIGHT + 34.0
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            WIDTH - MARGIN_RIGHT + 40.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    series: &[Series],
    log_x: bool,
) -> Result<(), CliError> {
    let svg = line_chart(title, x_label, series, log_x);
    std::fs::write(path, svg)
        .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;")
}
