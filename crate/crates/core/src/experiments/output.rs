//! CSV, JSON and SVG renderings of a [`RateFitResult`].

use std::fmt::Write as _;
use std::io::Write;

use super::run::RateFitResult;
use crate::{Error, Result};

pub const CSV_HEADER: &str =
    "n,r,sigma,value,lower,upper,mc_stderr,floor,floor_stderr,usable,kolmogorov,miscalibrated";

pub fn write_csv<W: Write>(result: &RateFitResult, mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for p in &result.points {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e}",
            p.n,
            p.r,
            p.sigma,
            p.value,
            p.lower,
            p.upper,
            p.mc_stderr,
            p.floor,
            p.floor_stderr,
            p.usable,
            p.kolmogorov,
            p.miscalibrated
        )?;
    }
    Ok(())
}

pub fn to_json(result: &RateFitResult) -> Result<String> {
    serde_json::to_string_pretty(result).map_err(|e| Error::invalid(format!("json encoding: {e}")))
}

pub fn from_json(s: &str) -> Result<RateFitResult> {
    serde_json::from_str(s).map_err(|e| Error::invalid(format!("json decoding: {e}")))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log-log plot of every curve with its floor and the predicted-rate guide
/// anchored at the first point.
pub fn render_svg(result: &RateFitResult) -> String {
    let pts: Vec<_> = result.points.iter().filter(|p| p.value > 0.0).collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if pts.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}">no positive values</text>"#, WIDTH / 2.0, HEIGHT / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let lx: Vec<f64> = pts.iter().map(|p| (p.n as f64).log10()).collect();
    let mut ly: Vec<f64> = pts.iter().map(|p| p.value.log10()).collect();
    ly.extend(pts.iter().filter(|p| p.floor > 0.0).map(|p| p.floor.log10()));
    let (x0, x1) = bounds(&lx);
    let (y0, y1) = bounds(&ly);
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for k in (x0.ceil() as i32)..=(x1.floor() as i32) {
        let x = px(k as f64);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{MARGIN}" stroke="#ddd"/>"##, HEIGHT - MARGIN);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"#, HEIGHT - MARGIN + 16.0);
    }
    for k in (y0.ceil() as i32)..=(y1.floor() as i32) {
        let y = py(k as f64);
        let _ = writeln!(s, r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, WIDTH - MARGIN);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#, MARGIN - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">n</text>"#, WIDTH / 2.0, HEIGHT - 18.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">distance</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (ci, curve) in result.curves.iter().enumerate() {
        let color = COLORS[ci % COLORS.len()];
        let cp: Vec<_> = pts.iter().filter(|p| p.r == curve.r).collect();
        if cp.is_empty() {
            continue;
        }
        let path = |f: &dyn Fn(&&&super::run::CurvePoint) -> f64| -> String {
            cp.iter()
                .map(|p| format!("{:.2},{:.2}", px((p.n as f64).log10()), py(f(p).log10())))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path(&|p| p.value));
        for p in &cp {
            let fill = if p.usable { color } else { "white" };
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{fill}" stroke="{color}"/>"#,
                px((p.n as f64).log10()),
                py(p.value.log10())
            );
        }
        if cp.iter().all(|p| p.floor > 0.0) {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="2,3"/>"#,
                path(&|p| p.floor)
            );
        }
        // guide C n^γ (log n)^[log] through the first point
        let first = cp[0];
        let g = |n: f64| n.powf(curve.theory.w_exp) * if curve.theory.log_factor { n.ln() } else { 1.0 };
        let c = first.value / g(first.n as f64);
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="6,4" opacity="0.6"/>"#,
            path(&|p| c * g(p.n as f64))
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">r = {} (guide n^{:.3}{})</text>"#,
            MARGIN + 8.0,
            MARGIN + 16.0 + 14.0 * ci as f64,
            curve.r,
            curve.theory.w_exp,
            if curve.theory.log_factor { " log n" } else { "" }
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.05).max(0.05);
    (lo - pad, hi + pad)
}
