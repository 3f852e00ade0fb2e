//! Minimal deterministic SVG figures.

use std::fmt::Write as _;

use super::ConfusionMatrix;

const FONT: &str = "font-family=\"sans-serif\"";
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(width: u32, height: u32, title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"24\" {FONT} font-size=\"16\" text-anchor=\"middle\">{}</text>",
        width / 2,
        escape(title)
    );
    s
}

/// 2×2 heatmap, rows actual (normal, abnormal), columns predicted.
pub fn confusion_heatmap(cm: &ConfusionMatrix, title: &str) -> String {
    let cells = [[cm.tn, cm.fp], [cm.fn_, cm.tp]];
    let max = cells.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    let (x0, y0, size) = (120.0, 60.0, 120.0);
    let mut s = open(400, 360, title);
    let names = ["normal", "abnormal"];
    for (r, row) in cells.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            let shade = count as f64 / max;
            let level = (255.0 - 200.0 * shade).round() as u8;
            let (x, y) = (x0 + c as f64 * size, y0 + r as f64 * size);
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{size}\" height=\"{size}\" fill=\"rgb({level},{level},255)\" stroke=\"black\"/>"
            );
            let ink = if shade > 0.6 { "white" } else { "black" };
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"20\" text-anchor=\"middle\" fill=\"{ink}\">{count}</text>",
                x + size / 2.0,
                y + size / 2.0 + 7.0
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"13\" text-anchor=\"end\">{}</text>",
            x0 - 8.0,
            y0 + r as f64 * size + size / 2.0 + 4.0,
            names[r]
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"13\" text-anchor=\"middle\">{}</text>",
            x0 + r as f64 * size + size / 2.0,
            y0 + 2.0 * size + 20.0,
            names[r]
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"13\" text-anchor=\"middle\">predicted</text>",
        x0 + size,
        y0 + 2.0 * size + 40.0
    );
    let _ = writeln!(
        s,
        "<text x=\"30\" y=\"{}\" {FONT} font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 30 {})\">actual</text>",
        y0 + size,
        y0 + size
    );
    s.push_str("</svg>\n");
    s
}

/// Vertical bars with value labels.
pub fn bar_chart(title: &str, bars: &[(String, f64)], y_label: &str) -> String {
    let (width, height) = (80 + 70 * bars.len().max(1) as u32, 340u32);
    let (left, top, plot_h) = (60.0, 50.0, 220.0);
    let max = bars.iter().map(|b| b.1).fold(0.0f64, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    let mut s = open(width, height, title);
    let _ = writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + plot_h,
        width as f64 - 20.0,
        top + plot_h
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{}\" {FONT} font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        escape(y_label)
    );
    for (i, (name, value)) in bars.iter().enumerate() {
        let h = plot_h * value.max(0.0) / max;
        let x = left + 10.0 + 70.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{:.2}\" width=\"50\" height=\"{h:.2}\" fill=\"{}\"/>",
            top + plot_h - h,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.2}\" {FONT} font-size=\"11\" text-anchor=\"middle\">{}</text>",
            x + 25.0,
            top + plot_h - h - 4.0,
            value
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"middle\">{}</text>",
            x + 25.0,
            top + plot_h + 16.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Polyline chart; non-finite points are skipped.
pub fn line_chart(title: &str, series: &[Series], x_label: &str) -> String {
    let (width, height) = (560u32, 340u32);
    let (left, top, plot_w, plot_h) = (60.0, 50.0, 440.0, 220.0);
    let finite = || {
        series
            .iter()
            .flat_map(|s| &s.points)
            .filter(|p| p.0.is_finite() && p.1.is_finite())
    };
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in finite() {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmin > xmax {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, 0.0, 1.0);
    }
    if xmax == xmin {
        xmax = xmin + 1.0;
    }
    if ymax == ymin {
        ymax = ymin + 1.0;
    }
    let px = |x: f64| left + plot_w * (x - xmin) / (xmax - xmin);
    let py = |y: f64| top + plot_h * (1.0 - (y - ymin) / (ymax - ymin));

    let mut s = open(width, height, title);
    let _ = writeln!(
        s,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>"
    );
    for (v, y) in [(ymin, top + plot_h), (ymax, top)] {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"end\">{v:.3}</text>",
            left - 4.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"12\" text-anchor=\"middle\">{}</text>",
        left + plot_w / 2.0,
        top + plot_h + 30.0,
        escape(x_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" fill=\"{colour}\">{}</text>",
            left + plot_w + 6.0,
            top + 14.0 * (i as f64 + 1.0),
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}
