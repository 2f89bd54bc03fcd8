//! Standalone SVG 1.1 plots in ROC space.

use std::fmt::Write;

use dtaboot_core::data::Dataset;
use dtaboot_core::reml::{confidence_region, BivariateFit};
use dtaboot_core::sroc::{hsroc_params, sample_curve};
use dtaboot_core::{Error, Result};

/// Canvas width and height in pixels.
pub const CANVAS: f64 = 600.0;
/// Left and top offset of the unit square on the canvas.
pub const MARGIN: f64 = 70.0;
/// Side length of the unit square on the canvas.
pub const PLOT: f64 = 460.0;
/// Points on each SROC polyline.
pub const CURVE_POINTS: usize = 512;
/// Vertices of each confidence-region polyline.
pub const REGION_POINTS: usize = 128;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// One test's data and fit.
pub struct PlotLayer<'a> {
    pub name: &'a str,
    pub data: &'a Dataset,
    pub fit: &'a BivariateFit,
}

#[derive(Debug, Clone)]
pub struct PlotOptions {
    pub title: String,
    pub level: f64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions { title: "SROC".into(), level: 0.95 }
    }
}

fn px(fpr: f64, sens: f64) -> (f64, f64) {
    (MARGIN + fpr * PLOT, MARGIN + (1.0 - sens) * PLOT)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn polyline(points: &[[f64; 2]]) -> String {
    let mut s = String::new();
    for (i, &[x, y]) in points.iter().enumerate() {
        let (a, b) = px(x, y);
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{a:.2},{b:.2}");
    }
    s
}

/// Studies as circles sized by sample size, SROC curves, summary points
/// and confidence regions; a legend is added for more than one layer.
pub fn render_sroc_svg(layers: &[PlotLayer<'_>], opts: &PlotOptions) -> Result<String> {
    if layers.iter().any(|l| !l.fit.converged) {
        return Err(Error::NotConverged);
    }
    let max_total = layers.iter().flat_map(|l| l.data.studies()).map(|s| s.total()).max().unwrap_or(1).max(1) as f64;

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}" font-family="Helvetica, Arial, sans-serif" font-size="13">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(&opts.title));
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{CANVAS}" height="{CANVAS}" fill="#ffffff"/>"##);

    // Frame, grid and ticks.
    let _ = writeln!(out, r##"<g id="axes" stroke="#000000" fill="none">"##);
    let _ = writeln!(out, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{PLOT}" height="{PLOT}" stroke-width="1"/>"#);
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let (x, _) = px(t, 0.0);
        let (_, y) = px(0.0, t);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd" stroke-width="0.5"/>"##,
            MARGIN + PLOT
        );
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="0.5"/>"##,
            MARGIN + PLOT
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g id="labels" fill="#000000">"##);
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let (x, _) = px(t, 0.0);
        let (_, y) = px(0.0, t);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.1}</text>"#, MARGIN + PLOT + 18.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.1}</text>"#, MARGIN - 8.0, y + 4.0);
    }
    let mid = MARGIN + PLOT / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="{mid:.2}" y="{:.2}" text-anchor="middle">False positive rate</text>"#,
        MARGIN + PLOT + 45.0
    );
    let _ = writeln!(
        out,
        r#"<text x="22" y="{mid:.2}" text-anchor="middle" transform="rotate(-90 22 {mid:.2})">Sensitivity</text>"#
    );
    let _ = writeln!(out, r#"<text x="{mid:.2}" y="40" text-anchor="middle" font-size="16">{}</text>"#, escape(&opts.title));
    let _ = writeln!(out, "</g>");

    for (i, layer) in layers.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let curve = hsroc_params(layer.fit)?;
        let region = confidence_region(layer.fit, opts.level, REGION_POINTS)?;
        let p = layer.fit.params;
        let (sx, sy) = px(dtaboot_core::math::expit(p.mu_b), dtaboot_core::math::expit(p.mu_a));

        let _ = writeln!(out, r#"<g id="layer-{}" class="test">"#, i + 1);
        let _ = writeln!(out, "<desc>{}</desc>", escape(layer.name));
        for s in layer.data.studies() {
            let (cx, cy) = px(s.fp as f64 / s.n_b() as f64, s.tp as f64 / s.n_a() as f64);
            let r = 2.5 + 9.5 * (s.total() as f64 / max_total).sqrt();
            let _ = writeln!(
                out,
                r#"<circle class="study" cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="{color}" fill-opacity="0.25" stroke="{color}" stroke-width="1"><title>{}</title></circle>"#,
                escape(&s.label)
            );
        }
        let _ = writeln!(
            out,
            r#"<polyline class="sroc" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            polyline(&sample_curve(&curve, CURVE_POINTS))
        );
        let _ = writeln!(
            out,
            r#"<polyline class="region" points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="5,3"/>"#,
            polyline(&region)
        );
        let _ = writeln!(
            out,
            r##"<rect class="summary" x="{:.2}" y="{:.2}" width="9" height="9" fill="{color}" stroke="#000000" stroke-width="1"/>"##,
            sx - 4.5,
            sy - 4.5
        );
        let _ = writeln!(out, "</g>");
    }

    if layers.len() > 1 {
        let x0 = MARGIN + PLOT - 120.0;
        let y0 = MARGIN + PLOT - 20.0 * layers.len() as f64 - 10.0;
        let _ = writeln!(out, r#"<g id="legend">"#);
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="115" height="{:.2}" fill="#ffffff" stroke="#999999"/>"##,
            x0 - 5.0,
            y0 - 5.0,
            20.0 * layers.len() as f64 + 10.0
        );
        for (i, layer) in layers.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let y = y0 + 20.0 * i as f64 + 10.0;
            let _ = writeln!(
                out,
                r#"<line x1="{x0:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
                x0 + 25.0
            );
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x0 + 32.0, y + 4.0, escape(layer.name));
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(out, "</svg>");
    Ok(out)
}
