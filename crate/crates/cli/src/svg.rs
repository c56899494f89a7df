//! Minimal SVG quiver plot of a planar velocity field.

use std::fmt::Write as _;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// Arrows at `points` with directions `vel`, lengths normalized so the
/// fastest arrow spans one grid cell; `demo` is drawn as a polyline.
pub fn quiver(points: &[[f64; 2]], vel: &[[f64; 2]], cell: f64, demo: &[[f64; 2]]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points.iter().chain(demo) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = |p: [f64; 2]| (MARGIN + (p[0] - lo[0]) * scale, SIZE - MARGIN - (p[1] - lo[1]) * scale);
    let vmax = vel.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max).max(1e-300);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<g stroke="steelblue" stroke-width="1" fill="none">"#);
    for (p, v) in points.iter().zip(vel) {
        let len = cell * v[0].hypot(v[1]) / vmax;
        let dir = if v[0] == 0.0 && v[1] == 0.0 { [0.0, 0.0] } else { [v[0] / v[0].hypot(v[1]), v[1] / v[0].hypot(v[1])] };
        let tip = [p[0] + dir[0] * len, p[1] + dir[1] * len];
        let (x0, y0) = map(*p);
        let (x1, y1) = map(tip);
        let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#);
        let head = 0.3 * len;
        for side in [-1.0, 1.0] {
            let c = (0.5f64).cos();
            let s = side * (0.5f64).sin();
            let back = [-(dir[0] * c - dir[1] * s) * head, -(dir[0] * s + dir[1] * c) * head];
            let (hx, hy) = map([tip[0] + back[0], tip[1] + back[1]]);
            let _ = writeln!(out, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{hx:.2}" y2="{hy:.2}"/>"#);
        }
    }
    let _ = writeln!(out, "</g>");
    if !demo.is_empty() {
        let pts: Vec<String> = demo.iter().map(|p| {
            let (x, y) = map(*p);
            format!("{x:.2},{y:.2}")
        }).collect();
        let _ = writeln!(out, r#"<polyline points="{}" stroke="black" stroke-width="2" fill="none"/>"#, pts.join(" "));
    }
    let _ = writeln!(out, "</svg>");
    out
}
