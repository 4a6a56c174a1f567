//! Static SVG charts for per-bin curves and simulator sweeps. Output depends
//! only on the input values, so identical input gives identical bytes.

use std::fmt::Write as _;

use crate::numfmt::format_g6;
use crate::profile::{BinSummary, BIN_COUNT};
use crate::utility::SweepBin;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 35.0;

#[derive(Clone, Copy, PartialEq)]
enum Style {
    Bars,
    Line,
}

struct Panel<'a> {
    title: &'a str,
    values: Vec<Option<f64>>,
    style: Style,
    /// Fixed vertical range; otherwise `[0, max]`.
    y_max: Option<f64>,
    /// Draw `y = bin / 10` as a dashed reference.
    diagonal: bool,
}

/// Four panels: query count, mean entropy, with-tool accuracy against the
/// `y = x` availability line, and mean tool calls. Bins with no data are
/// left empty and break the line.
pub fn bins_svg(bins: &[BinSummary]) -> String {
    let panels = [
        Panel {
            title: "queries per bin",
            values: bins
                .iter()
                .map(|b| (b.query_count > 0).then_some(b.query_count as f64))
                .collect(),
            style: Style::Bars,
            y_max: None,
            diagonal: false,
        },
        Panel {
            title: "mean answer entropy (bits)",
            values: bins.iter().map(|b| b.mean_entropy_bits).collect(),
            style: Style::Line,
            y_max: None,
            diagonal: false,
        },
        Panel {
            title: "with-tool accuracy vs availability",
            values: bins.iter().map(|b| b.mean_avg_at_k_with_tool).collect(),
            style: Style::Line,
            y_max: Some(1.0),
            diagonal: true,
        },
        Panel {
            title: "mean tool calls",
            values: bins.iter().map(|b| b.mean_tool_calls).collect(),
            style: Style::Bars,
            y_max: None,
            diagonal: false,
        },
    ];
    render(&panels, 2)
}

/// One panel with the tool-selection rate per bin.
pub fn sweep_svg(bins: &[SweepBin]) -> String {
    let panels = [Panel {
        title: "tool selection rate",
        values: bins.iter().map(|b| Some(b.tool_rate)).collect(),
        style: Style::Line,
        y_max: Some(1.0),
        diagonal: false,
    }];
    render(&panels, 1)
}

fn render(panels: &[Panel], columns: usize) -> String {
    let rows = panels.len().div_ceil(columns);
    let width = PANEL_W * columns as f64;
    let height = PANEL_H * rows as f64;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#).unwrap();
    for (i, panel) in panels.iter().enumerate() {
        let x0 = PANEL_W * (i % columns) as f64;
        let y0 = PANEL_H * (i / columns) as f64;
        draw_panel(&mut s, panel, x0, y0);
    }
    s.push_str("</svg>\n");
    s
}

fn draw_panel(s: &mut String, panel: &Panel, x0: f64, y0: f64) {
    let left = x0 + MARGIN_L;
    let right = x0 + PANEL_W - MARGIN_R;
    let top = y0 + MARGIN_T;
    let bottom = y0 + PANEL_H - MARGIN_B;
    let slot = (right - left) / BIN_COUNT as f64;
    let observed = panel.values.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
    let y_max = panel.y_max.unwrap_or(if observed > 0.0 { observed } else { 1.0 });
    let x_at = |i: usize| left + (i as f64 + 0.5) * slot;
    let y_at = |v: f64| bottom - (v.clamp(0.0, y_max) / y_max) * (bottom - top);

    writeln!(s, "<g>").unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        y0 + 18.0,
        panel.title
    )
    .unwrap();
    writeln!(
        s,
        r#"<path d="M{left:.2} {top:.2} L{left:.2} {bottom:.2} L{right:.2} {bottom:.2}" stroke="black" fill="none"/>"#
    )
    .unwrap();
    for (v, label) in [(0.0, "0".to_string()), (y_max, format_g6(y_max))] {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            left - 4.0,
            y_at(v) + 4.0
        )
        .unwrap();
    }
    for i in 0..BIN_COUNT {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{i}</text>"#,
            x_at(i),
            bottom + 14.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">availability bin</text>"#,
        (left + right) / 2.0,
        bottom + 28.0
    )
    .unwrap();

    if panel.diagonal {
        writeln!(
            s,
            r#"<path d="M{:.2} {:.2} L{:.2} {:.2}" stroke="gray" stroke-dasharray="4 3" fill="none"/>"#,
            x_at(0),
            y_at(0.0),
            x_at(BIN_COUNT - 1),
            y_at(y_max.min(1.0))
        )
        .unwrap();
    }

    match panel.style {
        Style::Bars => {
            for (i, v) in panel.values.iter().enumerate() {
                if let Some(v) = v {
                    let y = y_at(*v);
                    writeln!(
                        s,
                        r#"<rect x="{:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="steelblue"/>"#,
                        x_at(i) - slot * 0.35,
                        slot * 0.7,
                        bottom - y
                    )
                    .unwrap();
                }
            }
        }
        Style::Line => {
            // one path segment per run of consecutive defined bins
            let mut d = String::new();
            let mut pen_down = false;
            for (i, v) in panel.values.iter().enumerate() {
                match v {
                    Some(v) => {
                        let cmd = if pen_down { 'L' } else { 'M' };
                        write!(d, "{cmd}{:.2} {:.2} ", x_at(i), y_at(*v)).unwrap();
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            if !d.is_empty() {
                writeln!(
                    s,
                    r#"<path d="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#,
                    d.trim_end()
                )
                .unwrap();
            }
            for (i, v) in panel.values.iter().enumerate() {
                if let Some(v) = v {
                    writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
                        x_at(i),
                        y_at(*v)
                    )
                    .unwrap();
                }
            }
        }
    }
    writeln!(s, "</g>").unwrap();
}
