use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiment::AggregateTrace;
use super::HarnessError;

pub const SVG_WIDTH: f64 = 800.0;
pub const SVG_HEIGHT: f64 = 500.0;

const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

pub fn render_svg(trace: &AggregateTrace, path: &Path, log_y: bool) -> Result<(), HarnessError> {
    let doc = svg_document(trace, log_y)?;
    fs::write(path, doc).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

struct Series {
    name: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

/// Builds the plot of `mean_gap` and `bound` against `k`.
pub fn svg_document(trace: &AggregateTrace, log_y: bool) -> Result<String, HarnessError> {
    if trace.is_empty() {
        return Err(HarnessError::Render("trace is empty".into()));
    }
    let mut series = [
        Series {
            name: "mean gap",
            color: "#1f77b4",
            points: trace.rows.iter().map(|r| (r.k as f64, r.mean_gap)).collect(),
        },
        Series {
            name: "bound",
            color: "#d62728",
            points: trace.rows.iter().map(|r| (r.k as f64, r.bound)).collect(),
        },
    ];
    let mut warnings = Vec::new();
    for s in series.iter_mut() {
        let before = s.points.len();
        s.points.retain(|p| p.1.is_finite());
        if s.points.len() < before {
            warnings.push(format!("{} non-finite {} values omitted", before - s.points.len(), s.name));
        }
    }
    if log_y {
        let floor = series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        if !floor.is_finite() {
            return Err(HarnessError::Render("no positive values to plot on a log scale".into()));
        }
        for s in series.iter_mut() {
            let mut clamped = 0;
            for p in s.points.iter_mut() {
                if p.1 <= 0.0 {
                    p.1 = floor;
                    clamped += 1;
                }
            }
            if clamped > 0 {
                warnings.push(format!("{clamped} nonpositive {} values clamped to {floor:e}", s.name));
            }
            for p in s.points.iter_mut() {
                p.1 = p.1.log10();
            }
        }
    }

    let all = || series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y_lo, mut y_hi) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if x_hi == x_lo {
        x_hi = x_lo + 1.0;
    }
    if y_hi == y_lo {
        let pad = if y_lo == 0.0 { 1.0 } else { 0.5 * y_lo.abs() };
        y_lo -= pad;
        y_hi += pad;
    }
    let plot_w = SVG_WIDTH - LEFT - RIGHT;
    let plot_h = SVG_HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, SVG_WIDTH - RIGHT, TOP, SVG_HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
    );

    let _ = writeln!(out, r#"<g class="ticks" font-family="sans-serif" font-size="12">"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let px = sx(xv);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 5.0,
            y1 + 20.0,
            tick_label(xv)
        );
        let yv = y_lo + f * (y_hi - y_lo);
        let py = sy(yv);
        let label = if log_y { format!("1e{yv:.2}") } else { tick_label(yv) };
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(out, "</g>");
    let y_title = if log_y { "log10 value" } else { "value" };
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">k</text>"#,
        LEFT + plot_w / 2.0,
        SVG_HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">{y_title}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.name,
            s.color,
            pts.join(" ")
        );
        let ly = TOP + 15.0 + 18.0 * i as f64;
        let lx = SVG_WIDTH - RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 25.0,
            s.color,
            lx + 32.0,
            ly + 4.0,
            s.name
        );
    }
    for (i, w) in warnings.iter().enumerate() {
        let _ = writeln!(
            out,
            r##"<text class="warning" x="{LEFT}" y="{:.2}" font-family="sans-serif" font-size="11" fill="#b00">warning: {w}</text>"##,
            TOP - 22.0 + 12.0 * i as f64
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}
