use std::fmt::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PrunedTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderStyle {
    /// Pixels per unit length.
    pub scale: f64,
    pub stroke_width: f64,
    /// Colors cycled by generation.
    pub palette: Vec<String>,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            scale: 200.0,
            stroke_width: 1.0,
            palette: [
                "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

/// SVG with one path for the interval and one per arc; the canvas is the bounding box of Ω_a.
pub fn render_tree(tree: &PrunedTree, style: &RenderStyle) -> String {
    let a = tree.a;
    let s = style.scale;
    let (w, h) = ((2.0 + 2.0 * a) * s, 2.0 * a * s);
    let px = |z: Complex64| ((z.re + 1.0 + a) * s, (a - z.im) * s);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.2}" height="{h:.2}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0) = px(Complex64::new(-1.0, 0.0));
    let (x1, _) = px(Complex64::new(1.0, 0.0));
    let _ = writeln!(
        out,
        r#"<path class="interval" d="M{x0:.4} {y0:.4} L{x1:.4} {y0:.4}" stroke="black" stroke-width="{:.2}" fill="none"/>"#,
        style.stroke_width * 1.5
    );
    for (n, ids) in tree.generations.iter().enumerate().skip(1) {
        let color = &style.palette[(n - 1) % style.palette.len().max(1)];
        for &id in ids {
            let mut d = String::new();
            for (k, &z) in tree.arcs[id].points.iter().enumerate() {
                let (x, y) = px(z);
                let _ = write!(d, "{}{x:.4} {y:.4}", if k == 0 { "M" } else { " L" });
            }
            let _ = writeln!(
                out,
                r#"<path class="arc" data-generation="{n}" d="{d}" stroke="{color}" stroke-width="{:.2}" fill="none"/>"#,
                style.stroke_width
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
