//! Minimal SVG line plots for traces and sweeps.
//!
//! The emitter draws with nothing but `<rect>`, `<line>`, and `<text>`, so
//! the output opens anywhere and diffs cleanly. One call produces one file;
//! callers pass each trace column as its own series.

use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;

/// One named polyline. Non-finite points break the line rather than failing.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        PlotSeries {
            label: label.into(),
            points,
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{:.4}", v);
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{:e}", v)
    }
}

struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if lo == hi {
            // A flat series still needs a drawable band.
            return Range {
                lo: lo - 1.0,
                hi: hi + 1.0,
            };
        }
        Range { lo, hi }
    }

    fn to_screen(&self, v: f64, screen_lo: f64, screen_hi: f64) -> f64 {
        screen_lo + (v - self.lo) / (self.hi - self.lo) * (screen_hi - screen_lo)
    }
}

/// Renders `series` to `path` as a self-contained SVG.
pub fn emit_plot(
    series: &[PlotSeries],
    title: &str,
    x_label: &str,
    y_label: &str,
    path: &Path,
) -> Result<(), HarnessError> {
    let xs = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let ys = Range::of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));

    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM; // screen y grows downward
    let y1 = MARGIN_TOP;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        x = x0,
        y = y1,
        w = x1 - x0,
        h = y0 - y1
    );
    let _ = writeln!(
        svg,
        r##"<text x="{x}" y="24" font-family="sans-serif" font-size="15" fill="#111111">{t}</text>"##,
        x = x0,
        t = escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" fill="#333333">{t}</text>"##,
        x = (x0 + x1) / 2.0 - 20.0,
        y = HEIGHT - 12.0,
        t = escape(x_label)
    );
    let _ = writeln!(
        svg,
        r##"<text x="12" y="{y}" font-family="sans-serif" font-size="12" fill="#333333">{t}</text>"##,
        y = y1 - 8.0,
        t = escape(y_label)
    );

    // Axis ticks: five per axis, value labels at the frame edge.
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let vx = xs.lo + f * (xs.hi - xs.lo);
        let sx = xs.to_screen(vx, x0, x1);
        let _ = writeln!(
            svg,
            r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{y2}" stroke="#999999" stroke-width="1"/>"##,
            x = sx,
            y0 = y0,
            y2 = y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" fill="#333333" text-anchor="middle">{t}</text>"##,
            x = sx,
            y = y0 + 18.0,
            t = tick_label(vx)
        );
        let vy = ys.lo + f * (ys.hi - ys.lo);
        let sy = ys.to_screen(vy, y0, y1);
        let _ = writeln!(
            svg,
            r##"<line x1="{x2}" y1="{y}" x2="{x0}" y2="{y}" stroke="#999999" stroke-width="1"/>"##,
            x2 = x0 - 5.0,
            y = sy,
            x0 = x0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" fill="#333333" text-anchor="end">{t}</text>"##,
            x = x0 - 8.0,
            y = sy + 4.0,
            t = tick_label(vy)
        );
    }

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for pair in s.points.windows(2) {
            let (ax, ay) = pair[0];
            let (bx, by) = pair[1];
            if !(ax.is_finite() && ay.is_finite() && bx.is_finite() && by.is_finite()) {
                continue;
            }
            let _ = writeln!(
                svg,
                r##"<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{c}" stroke-width="1.5"/>"##,
                x1 = xs.to_screen(ax, x0, x1),
                y1 = ys.to_screen(ay, y0, y1),
                x2 = xs.to_screen(bx, x0, x1),
                y2 = ys.to_screen(by, y0, y1),
                c = color
            );
        }
        // Legend swatch and label, stacked under the title at the right edge.
        let ly = MARGIN_TOP + 14.0 + i as f64 * 16.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{x1}" y1="{y}" x2="{x2}" y2="{y}" stroke="{c}" stroke-width="2"/>"##,
            x1 = x1 - 150.0,
            x2 = x1 - 130.0,
            y = ly,
            c = color
        );
        let _ = writeln!(
            svg,
            r##"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" fill="#111111">{t}</text>"##,
            x = x1 - 124.0,
            y = ly + 4.0,
            t = escape(&s.label)
        );
    }

    let _ = writeln!(svg, "</svg>");
    std::fs::write(path, svg).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
