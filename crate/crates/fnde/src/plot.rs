//! Static SVG loss plots: seed-mean loss against epoch on a log-10 axis.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::write_bytes;
use crate::error::Result;
use crate::report::ExperimentReport;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 240.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// A named polyline; `dashed` marks validation curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    pub dashed: bool,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Training (solid) and validation (dashed) seed-means for every group.
pub fn report_series(report: &ExperimentReport) -> Vec<Series> {
    let many_grids = report.grid_sizes().len() > 1;
    let mut series = Vec::new();
    for s in report.summaries() {
        let mut label = format!("{} {} o{}", s.model, s.theory, s.order);
        if many_grids {
            let _ = write!(label, " n{}", s.n_p);
        }
        series.push(Series {
            label: format!("{label} train"),
            values: s.summary.mean.train.clone(),
            dashed: false,
        });
        series.push(Series {
            label: format!("{label} val"),
            values: s.summary.mean.val.clone(),
            dashed: true,
        });
    }
    series
}

/// Renders a log-y line plot. Non-positive and non-finite points are
/// skipped; an empty series list gives empty axes.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let positive = || {
        series
            .iter()
            .flat_map(|s| s.values.iter().copied())
            .filter(|v| v.is_finite() && *v > 0.0)
    };
    let (lo, hi) = positive().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (dec_lo, dec_hi) = if lo.is_finite() {
        let a = lo.log10().floor() as i32;
        let b = hi.log10().ceil() as i32;
        (a, if b > a { b } else { a + 1 })
    } else {
        (-1, 0)
    };
    let epochs = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |e: usize| LEFT + plot_w * e as f64 / (epochs - 1) as f64;
    let y_of = |v: f64| {
        let t = (v.log10() - dec_lo as f64) / (dec_hi - dec_lo) as f64;
        TOP + plot_h * (1.0 - t)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for d in dec_lo..=dec_hi {
        let y = y_of(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let ticks = 5;
    for i in 0..=ticks {
        let e = (epochs - 1) * i / ticks;
        let x = x_of(e);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">loss</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[(i / 2) % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let points: Vec<String> = s
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite() && **v > 0.0)
            .map(|(e, v)| format!("{:.2},{:.2}", x_of(e), y_of(*v)))
            .collect();
        if !points.is_empty() {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                points.join(" ")
            );
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 4.0,
            lx + 24.0,
            ly - 4.0,
            lx + 30.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(report: &ExperimentReport, path: &Path) -> Result<()> {
    let title = format!("{} losses", report.name);
    write_bytes(path, render_svg(&title, &report_series(report)).as_bytes())
}
