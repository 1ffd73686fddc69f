//! Deterministic SVG pictures of fitted densities.
//!
//! Two-dimensional fits are drawn in unit-cube coordinates as their leaf
//! rectangles (or mesh triangles), optionally shaded by log-density; one
//! dimensional fits as a density curve.

use std::fmt::Write as _;

use crate::error::{OptError, Result};
use crate::fee::FeeDensity;
use crate::pcdensity::HmapTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotOptions {
    /// Side of the square drawing area in pixels.
    pub size: f64,
    /// Shade cells by log-density, darker meaning denser.
    pub fill: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        PlotOptions {
            size: 400.0,
            fill: true,
        }
    }
}

pub const PLOT_FORMAT_VERSION: u32 = 1;

const MARGIN: f64 = 10.0;

fn header(opts: &PlotOptions) -> String {
    let full = opts.size + 2.0 * MARGIN;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{full:.0}\" height=\"{full:.0}\" viewBox=\"0 0 {full:.0} {full:.0}\">\n<metadata>format_version={PLOT_FORMAT_VERSION}</metadata>\n"
    )
}

fn px(opts: &PlotOptions, u: f64) -> f64 {
    MARGIN + u * opts.size
}

fn py(opts: &PlotOptions, v: f64) -> f64 {
    MARGIN + (1.0 - v) * opts.size
}

/// Gray level for a value on a log scale spanning `[lo, hi]`.
fn gray(log_value: Option<f64>, lo: f64, hi: f64) -> String {
    let level = match log_value {
        None => 255.0,
        Some(v) if hi > lo => 235.0 - 215.0 * (v - lo) / (hi - lo),
        Some(_) => 128.0,
    };
    let g = level.round().clamp(0.0, 255.0) as u8;
    format!("#{g:02x}{g:02x}{g:02x}")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn unsupported(what: &str, p: usize) -> OptError {
    OptError::UnsupportedDimension(format!("{what} plots need p = 1 or p = 2, got p = {p}"))
}

fn polyline(opts: &PlotOptions, points: &[(f64, f64)]) -> String {
    let top = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let scale = if top > 0.0 { 0.95 / top } else { 1.0 };
    let mut out = header(opts);
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{s:.3}\" height=\"{s:.3}\" fill=\"none\" stroke=\"#999999\"/>",
        s = opts.size
    );
    let coords: Vec<String> = points
        .iter()
        .map(|&(u, f)| format!("{:.3},{:.3}", px(opts, u), py(opts, f * scale)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline class=\"density\" fill=\"none\" stroke=\"#000000\" points=\"{}\"/>",
        coords.join(" ")
    );
    let _ = writeln!(out, "<!-- vertical scale: density {top:.6} at the top -->");
    out.push_str("</svg>\n");
    out
}

pub fn tree_svg(tree: &HmapTree, opts: &PlotOptions) -> Result<String> {
    let leaves: Vec<_> = tree.leaves().collect();
    match tree.dims() {
        1 => {
            let mut pts = Vec::with_capacity(2 * leaves.len());
            let mut sorted: Vec<_> = leaves.iter().map(|l| (l.region.interval(0), l.density())).collect();
            sorted.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0));
            for ((lo, hi), d) in sorted {
                pts.push((lo, d));
                pts.push((hi, d));
            }
            Ok(polyline(opts, &pts))
        }
        2 => {
            let logs = leaves.iter().filter_map(|l| positive_ln(l.density()));
            let (lo, hi) = range(logs);
            let mut out = header(opts);
            for leaf in &leaves {
                let (x0, x1) = leaf.region.interval(0);
                let (y0, y1) = leaf.region.interval(1);
                let fill = if opts.fill {
                    gray(positive_ln(leaf.density()), lo, hi)
                } else {
                    "none".into()
                };
                let _ = writeln!(
                    out,
                    "<rect class=\"leaf\" x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"{fill}\" stroke=\"#000000\" stroke-width=\"0.5\"/>",
                    px(opts, x0),
                    py(opts, y1),
                    (x1 - x0) * opts.size,
                    (y1 - y0) * opts.size,
                );
            }
            out.push_str("</svg>\n");
            Ok(out)
        }
        p => Err(unsupported("partition", p)),
    }
}

fn positive_ln(v: f64) -> Option<f64> {
    (v > 0.0).then(|| v.ln())
}

pub fn fee_svg(fee: &FeeDensity, opts: &PlotOptions) -> Result<String> {
    let mesh = fee.mesh();
    let c = fee.coeffs();
    match fee.dims() {
        1 => {
            let mut pts: Vec<(f64, f64)> = (0..mesh.vertex_count()).map(|i| (mesh.vertex(i)[0], c[i])).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Ok(polyline(opts, &pts))
        }
        2 => {
            let means: Vec<f64> = (0..mesh.simplex_count())
                .map(|s| mesh.simplex(s).iter().map(|&v| c[v as usize]).sum::<f64>() / 3.0)
                .collect();
            let (lo, hi) = range(means.iter().filter_map(|&m| positive_ln(m)));
            let mut out = header(opts);
            for (s, &mean) in means.iter().enumerate() {
                let points: Vec<String> = mesh
                    .simplex_vertices(s)
                    .iter()
                    .map(|v| format!("{:.3},{:.3}", px(opts, v[0]), py(opts, v[1])))
                    .collect();
                let fill = if opts.fill {
                    gray(positive_ln(mean), lo, hi)
                } else {
                    "none".into()
                };
                let _ = writeln!(
                    out,
                    "<polygon class=\"simplex\" points=\"{}\" fill=\"{fill}\" stroke=\"#000000\" stroke-width=\"0.25\"/>",
                    points.join(" ")
                );
            }
            out.push_str("</svg>\n");
            Ok(out)
        }
        p => Err(unsupported("mesh", p)),
    }
}
