//! Dependency-free SVG heatmaps for correlation surfaces.
//!
//! Layers run down the vertical axis, task index along the horizontal
//! one. The fill is a fixed diverging map over [-1, 1]: coefficients
//! interpolate linearly from white at 0 toward blue `#2166AC` at -1 and
//! red `#B2182B` at +1, channelwise, rounded to nearest. Undefined cells
//! are drawn with a diagonal hatch instead of a color. Two cells with
//! equal coefficients always render with identical fills.

use std::fs;
use std::path::Path;

use ewclab_core::CorrelationSurface;

use crate::AppError;

const CELL: i64 = 44;
const GAP: i64 = 2;
const MARGIN_LEFT: i64 = 92;
const MARGIN_TOP: i64 = 56;
const MARGIN_BOTTOM: i64 = 46;
const MARGIN_RIGHT: i64 = 20;

const POSITIVE: (u8, u8, u8) = (0xB2, 0x18, 0x2B);
const NEGATIVE: (u8, u8, u8) = (0x21, 0x66, 0xAC);

/// The fixed color map: white at 0, `NEGATIVE` at -1, `POSITIVE` at +1.
pub fn color_for(r: f64) -> (u8, u8, u8) {
    let t = r.clamp(-1.0, 1.0);
    let target = if t >= 0.0 { POSITIVE } else { NEGATIVE };
    let mix = |channel: u8| -> u8 {
        let w = t.abs();
        let v = 255.0 + w * (channel as f64 - 255.0);
        v.round() as u8
    };
    (mix(target.0), mix(target.1), mix(target.2))
}

fn hex(color: (u8, u8, u8)) -> String {
    format!("#{:02x}{:02x}{:02x}", color.0, color.1, color.2)
}

pub fn heatmap_svg(surface: &CorrelationSurface) -> String {
    let layers = surface.layer_count() as i64;
    let tasks = surface.task_count() as i64;
    let grid_w = tasks * CELL + (tasks - 1).max(0) * GAP;
    let grid_h = layers * CELL + (layers - 1).max(0) * GAP;
    let width = MARGIN_LEFT + grid_w + MARGIN_RIGHT;
    let height = MARGIN_TOP + grid_h + MARGIN_BOTTOM;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(
        "<defs><pattern id=\"undef\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">\
<rect width=\"6\" height=\"6\" fill=\"#f2f2f2\"/><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#999999\" stroke-width=\"2\"/></pattern></defs>\n",
    );
    svg.push_str(&format!(
        "<rect width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    ));
    let title = format!(
        "Correlation: {} vs {} (by layer and task)",
        surface.method_a.label(),
        surface.method_b.label()
    );
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        width / 2
    ));

    for (l, row) in surface.cells.iter().enumerate() {
        let y = MARGIN_TOP + l as i64 * (CELL + GAP);
        let label = surface
            .layer_names
            .get(l)
            .cloned()
            .unwrap_or_else(|| format!("layer {}", l + 1));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{label}</text>\n",
            MARGIN_LEFT - 8,
            y + CELL / 2 + 4
        ));
        for (t, cell) in row.iter().enumerate() {
            let x = MARGIN_LEFT + t as i64 * (CELL + GAP);
            let fill = match cell {
                Some(r) => hex(color_for(*r)),
                None => "url(#undef)".to_string(),
            };
            svg.push_str(&format!(
                "<rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\" stroke=\"#444444\" stroke-width=\"1\"/>\n"
            ));
        }
    }
    for t in 0..tasks {
        let x = MARGIN_LEFT + t * (CELL + GAP) + CELL / 2;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">task {}</text>\n",
            MARGIN_TOP + grid_h + 24,
            t + 1
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn render_heatmap(surface: &CorrelationSurface, path: &Path) -> Result<(), AppError> {
    fs::write(path, heatmap_svg(surface))
        .map_err(|e| AppError::io(format!("writing {}", path.display()), e))
}
