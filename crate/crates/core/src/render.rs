//! Chart output: a self-contained SVG figure and an aligned text table.
//!
//! All numbers are formatted with fixed precision, so a given (records,
//! limits) pair renders to byte-identical output.

use std::path::Path;

use crate::chart::ChartRecord;
use crate::chart_design::ChartLimits;
use crate::error::Result;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 52.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Render the chart as an SVG document.
pub fn render_svg(records: &[ChartRecord], limits: &ChartLimits) -> String {
    let ucl = limits.ucl as f64;
    let lcl = limits.lcl.map(|l| l as f64);
    let center = limits.mn() as f64 / 2.0;

    let mut y_min = lcl.unwrap_or(center);
    let mut y_max = ucl;
    for r in records {
        y_min = y_min.min(r.statistic.value());
        y_max = y_max.max(r.statistic.value());
    }
    let pad = 0.08 * (y_max - y_min).max(1.0);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let count = records.len().max(1) as f64;
    let x_of = |i: usize| MARGIN_LEFT + plot_w * (i as f64 + 0.5) / count;
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - y_min) / (y_max - y_min));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">MW chart (m={}, n={})</text>\n",
        WIDTH / 2.0,
        limits.m,
        limits.n
    ));

    // frame
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
        fmt(plot_w),
        fmt(plot_h)
    ));

    // y ticks
    for t in 0..=4 {
        let v = y_min + (y_max - y_min) * t as f64 / 4.0;
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(MARGIN_LEFT - 5.0),
            fmt(y),
            fmt(y)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 8.0),
            fmt(y + 4.0),
            fmt(v)
        ));
    }

    // reference lines
    let mut line = |v: f64, label: &str, dash: &str| {
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#555555\" stroke-width=\"1.2\"{}/>\n",
            fmt(y),
            fmt(WIDTH - MARGIN_RIGHT),
            fmt(y),
            dash
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt(WIDTH - MARGIN_RIGHT - 70.0),
            fmt(y - 4.0),
            label
        ));
    };
    line(ucl, &format!("UCL={}", limits.ucl), "");
    if let Some(l) = lcl {
        line(l, &format!("LCL={}", limits.lcl.unwrap()), "");
    }
    line(
        center,
        &format!("CL={}", fmt(center)),
        " stroke-dasharray=\"6 4\"",
    );

    // polyline through the points
    if records.len() > 1 {
        let pts: Vec<String> = records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{},{}", fmt(x_of(i)), fmt(y_of(r.statistic.value()))))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.4\"/>\n",
            pts.join(" ")
        ));
    }

    // points, signals marked
    for (i, r) in records.iter().enumerate() {
        let x = x_of(i);
        let y = y_of(r.statistic.value());
        if r.signal {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"#d62728\" stroke=\"black\" stroke-width=\"1\"/>\n",
                fmt(x),
                fmt(y)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\" text-anchor=\"middle\">{}</text>\n",
                fmt(x),
                fmt(y - 9.0),
                r.sample_index
            ));
        } else {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"white\" stroke=\"#1f77b4\" stroke-width=\"1.4\"/>\n",
                fmt(x),
                fmt(y)
            ));
        }
        // x labels (thin out when crowded)
        let stride = (records.len() / 30) + 1;
        if i % stride == 0 {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                fmt(x),
                fmt(HEIGHT - MARGIN_BOTTOM + 16.0),
                r.sample_index
            ));
        }
    }

    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">test sample</text>\n",
        WIDTH / 2.0,
        HEIGHT - 14.0
    ));
    svg.push_str("</svg>\n");
    svg
}

pub fn write_svg(records: &[ChartRecord], limits: &ChartLimits, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(records, limits))?;
    Ok(())
}

/// Aligned plain-text version of the chart.
pub fn text_table(records: &[ChartRecord], limits: &ChartLimits) -> String {
    let mut out = String::new();
    let lcl = limits
        .lcl
        .map(|l| l.to_string())
        .unwrap_or_else(|| "-".to_string());
    out.push_str(&format!(
        "MW chart: m={} n={} LCL={} UCL={}\n",
        limits.m, limits.n, lcl, limits.ucl
    ));
    out.push_str(&format!(
        "{:>7}  {:>10}  {:>6}\n",
        "sample", "statistic", "signal"
    ));
    for r in records {
        out.push_str(&format!(
            "{:>7}  {:>10}  {:>6}\n",
            r.sample_index,
            r.statistic.to_string(),
            if r.signal { "OUT" } else { "-" }
        ));
    }
    out
}
