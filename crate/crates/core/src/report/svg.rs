//! Static SVG heatmaps.
//!
//! Colours interpolate linearly in RGB between five anchors:
//!
//! | position | RGB             |
//! |----------|-----------------|
//! | 0.00     | (68, 1, 84)     |
//! | 0.25     | (59, 82, 139)   |
//! | 0.50     | (33, 145, 140)  |
//! | 0.75     | (94, 201, 98)   |
//! | 1.00     | (253, 231, 37)  |
//!
//! Absent cells are drawn in [`ABSENT_COLOR`] with a diagonal hatch.

use std::fmt::Write as _;

use crate::aligner::{PathPoint, Trellis};
use crate::tracer::AieGrid;

pub const RAMP: [(f64, [u8; 3]); 5] =
    [(0.0, [68, 1, 84]), (0.25, [59, 82, 139]), (0.5, [33, 145, 140]), (0.75, [94, 201, 98]), (1.0, [253, 231, 37])];

pub const ABSENT_COLOR: &str = "#d9d9d9";

const CELL: f64 = 40.0;
const LEFT: f64 = 190.0;
const TOP: f64 = 50.0;

/// Colour at `x` in `[0, 1]` (clamped), as `#rrggbb`.
pub fn ramp_color(x: f64) -> String {
    let x = if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) };
    let i = RAMP.windows(2).position(|w| x <= w[1].0).unwrap_or(RAMP.len() - 2);
    let ((x0, c0), (x1, c1)) = (RAMP[i], RAMP[i + 1]);
    let f = (x - x0) / (x1 - x0);
    let ch = |k: usize| (c0[k] as f64 + f * (c1[k] as f64 - c0[k] as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

/// Which grid view to colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapScale {
    /// `log10(max(AIE, 1e-8))`.
    Log,
    Linear,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn hatch_defs(out: &mut String) {
    out.push_str(
        "<defs><pattern id=\"absent\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" \
         patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#d9d9d9\"/>\
         <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#a0a0a0\" stroke-width=\"2\"/></pattern></defs>\n",
    );
}

fn legend(out: &mut String, x: f64, y: f64, height: f64, lo: f64, hi: f64, caption: &str) {
    let steps = 32;
    let h = height / steps as f64;
    for k in 0..steps {
        let t = 1.0 - (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            "<rect class=\"legend\" x=\"{x}\" y=\"{:.2}\" width=\"16\" height=\"{:.2}\" fill=\"{}\"/>",
            y + k as f64 * h,
            h + 0.5,
            ramp_color(t)
        );
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>", x + 22.0, y + 10.0, fmt_num(hi));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>", x + 22.0, y + height, fmt_num(lo));
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>", x, y + height + 20.0, escape(caption));
    let _ = writeln!(
        out,
        "<rect x=\"{x}\" y=\"{}\" width=\"16\" height=\"12\" fill=\"url(#absent)\" stroke=\"#808080\"/>\
         <text x=\"{}\" y=\"{}\" font-size=\"11\">absent</text>",
        y + height + 30.0,
        x + 22.0,
        y + height + 40.0
    );
}

/// Layers on the x axis, buckets on the y axis, one `class="cell"` rect per
/// `(bucket, layer)`.
pub fn grid_heatmap_svg(grid: &AieGrid, title: &str, scale: HeatmapScale) -> String {
    let view = match scale {
        HeatmapScale::Log => &grid.log_values,
        HeatmapScale::Linear => &grid.values,
    };
    let present: Vec<f64> = view.iter().flatten().flatten().copied().collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };

    let (rows, cols) = (grid.buckets.len(), grid.n_layers);
    let plot_w = cols as f64 * CELL;
    let plot_h = rows as f64 * CELL;
    let width = LEFT + plot_w + 120.0;
    let height = TOP + plot_h.max(140.0) + 70.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">"
    );
    hatch_defs(&mut out);
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{LEFT}\" y=\"24\" font-size=\"14\">{}</text>", escape(title));
    for (r, bucket) in grid.buckets.iter().enumerate() {
        let y = TOP + r as f64 * CELL;
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            LEFT - 8.0,
            y + CELL / 2.0 + 4.0,
            escape(bucket.label())
        );
        for l in 0..cols {
            let x = LEFT + l as f64 * CELL;
            let (fill, tip) = match view[r][l] {
                Some(v) => (ramp_color(norm(v)), fmt_num(v)),
                None => ("url(#absent)".to_string(), "absent".to_string()),
            };
            let _ = writeln!(
                out,
                "<rect class=\"cell\" data-bucket=\"{}\" data-layer=\"{l}\" x=\"{x}\" y=\"{y}\" \
                 width=\"{CELL}\" height=\"{CELL}\" fill=\"{fill}\"><title>{} layer {l}: {tip}</title></rect>",
                bucket.as_str(),
                bucket.as_str()
            );
        }
    }
    for l in 0..cols {
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{l}</text>",
            LEFT + (l as f64 + 0.5) * CELL,
            TOP + plot_h + 16.0
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">layer</text>",
        LEFT + plot_w / 2.0,
        TOP + plot_h + 34.0
    );
    let caption = match scale {
        HeatmapScale::Log => "log10 AIE",
        HeatmapScale::Linear => "AIE",
    };
    let (lo, hi) = if present.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    legend(&mut out, LEFT + plot_w + 24.0, TOP, 100.0, lo, hi, caption);
    out.push_str("</svg>\n");
    out
}

/// The trellis with frames on the x axis and transcript labels on the y axis
/// (first label at the top), the best path overlaid as a red polyline.
pub fn trellis_heatmap_svg(trellis: &Trellis, path: &[PathPoint], labels: &[char]) -> String {
    let (t_max, n) = (trellis.frames(), trellis.labels());
    let cell = (900.0 / (t_max + 1) as f64).clamp(3.0, 24.0);
    let cell_h = 16.0f64;
    let left = 40.0;
    let top = 30.0;
    let plot_w = (t_max + 1) as f64 * cell;
    let plot_h = (n + 1) as f64 * cell_h;
    let width = left + plot_w + 110.0;
    let height = top + plot_h.max(140.0) + 60.0;

    let finite: Vec<f64> = (0..=t_max).flat_map(|t| trellis.row(t).to_vec()).filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.2} {height:.2}\" font-family=\"sans-serif\">"
    );
    hatch_defs(&mut out);
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{left}\" y=\"18\" font-size=\"13\">trellis (T={t_max}, N={n})</text>");
    for j in 0..=n {
        let y = top + j as f64 * cell_h;
        if j > 0 {
            let c = labels.get(j - 1).copied().unwrap_or('?');
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
                left - 6.0,
                y + cell_h - 4.0,
                escape(&c.to_string())
            );
        }
        for t in 0..=t_max {
            let v = trellis.at(t, j);
            let fill = if v.is_finite() { ramp_color(norm(v)) } else { "url(#absent)".into() };
            let _ = writeln!(
                out,
                "<rect class=\"cell\" x=\"{:.2}\" y=\"{y}\" width=\"{:.2}\" height=\"{cell_h}\" fill=\"{fill}\"/>",
                left + t as f64 * cell,
                cell + 0.05
            );
        }
    }
    let points: Vec<String> = path
        .iter()
        .map(|p| {
            format!(
                "{:.2},{:.2}",
                left + (p.time_index as f64 + 0.5) * cell,
                top + (p.label_index as f64 + 0.5) * cell_h
            )
        })
        .collect();
    let _ = writeln!(
        out,
        "<polyline class=\"path\" points=\"{}\" fill=\"none\" stroke=\"#e31a1c\" stroke-width=\"2\"/>",
        points.join(" ")
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">frame</text>",
        left + plot_w / 2.0,
        top + plot_h + 18.0
    );
    let (lo, hi) = if finite.is_empty() { (0.0, 0.0) } else { (lo, hi) };
    legend(&mut out, left + plot_w + 20.0, top, 100.0, lo, hi, "log-prob");
    out.push_str("</svg>\n");
    out
}
