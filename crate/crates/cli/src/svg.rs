//! Self-contained SVG learning curves: one median polyline per method over a
//! translucent inter-quartile band.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::aggregate::SummaryRow;
use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    pub y_scale: Scale,
    /// Embedded as a comment so the figure can be traced to its config.
    pub digest: Option<String>,
}

struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, scale: Scale) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values {
            let v = transform(v, scale);
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, scale }
    }

    fn unit(&self, v: f64) -> f64 {
        let t = transform(v, self.scale);
        let t = if t.is_finite() { t } else { self.lo };
        (t - self.lo) / (self.hi - self.lo)
    }
}

fn transform(v: f64, scale: Scale) -> f64 {
    match scale {
        Scale::Linear => v,
        // Nonpositive values pin to the bottom of the axis.
        Scale::Log if v > 0.0 => v.log10(),
        Scale::Log => f64::NEG_INFINITY,
    }
}

fn fmt_tick(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Linear => format!("{v:.3}"),
        Scale::Log => format!("1e{v:.1}"),
    }
}

/// Renders summary rows (x = iteration) to SVG text. Output depends only on
/// the input rows, so identical inputs give identical bytes.
pub fn render_curves(rows: &[SummaryRow], options: &PlotOptions) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Validation("nothing to plot".into()));
    }
    let mut by_method: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_method.entry(r.method.as_str()).or_default().push(r);
    }
    for series in by_method.values_mut() {
        series.sort_by_key(|r| r.iteration);
    }
    let x = Axis::new(rows.iter().map(|r| r.iteration as f64), Scale::Linear);
    let y = Axis::new(rows.iter().flat_map(|r| [r.q1, r.median, r.q3]), options.y_scale);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |v: f64| MARGIN + x.unit(v) * plot_w;
    let py = |v: f64| HEIGHT - MARGIN - y.unit(v) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    if let Some(d) = &options.digest {
        let _ = writeln!(svg, "<!-- config_digest={d} -->");
    }
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(&options.title)
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#444\"/>"
    );
    for (frac, anchor) in [(0.0, "start"), (1.0, "end")] {
        let xv = x.lo + frac * (x.hi - x.lo);
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{:.0}</text>",
            MARGIN + frac * plot_w,
            HEIGHT - MARGIN + 16.0,
            xv
        );
        let yv = y.lo + frac * (y.hi - y.lo);
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            MARGIN - 4.0,
            HEIGHT - MARGIN - frac * plot_h + 4.0,
            fmt_tick(yv, y.scale)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">iteration</text>",
        WIDTH / 2.0,
        HEIGHT - 12.0
    );

    for (i, (method, series)) in by_method.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if series.len() == 1 {
            let r = series[0];
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                px(r.iteration as f64),
                py(r.median)
            );
        } else {
            let upper = series
                .iter()
                .map(|r| format!("{:.2},{:.2}", px(r.iteration as f64), py(r.q3)));
            let lower = series
                .iter()
                .rev()
                .map(|r| format!("{:.2},{:.2}", px(r.iteration as f64), py(r.q1)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                svg,
                "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>",
                band.join(" ")
            );
            let line: Vec<String> = series
                .iter()
                .map(|r| format!("{:.2},{:.2}", px(r.iteration as f64), py(r.median)))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                line.join(" ")
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            MARGIN + 8.0,
            MARGIN + 16.0 + 16.0 * i as f64,
            escape(method)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
