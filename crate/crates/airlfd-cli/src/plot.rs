//! Score series as a standalone SVG.

use std::fmt::Write;

use airlfd::detector::ScoreSeries;

pub struct PlotSpec<'a> {
    pub model: &'a str,
    pub digest: &'a str,
    pub series: &'a ScoreSeries<f64>,
    pub threshold: f64,
    pub onset_pred: Option<usize>,
    pub onset_true: Option<usize>,
}

const W: f64 = 800.0;
const H: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 44.0;

pub fn render_svg(p: &PlotSpec<'_>) -> String {
    let ids: Vec<f64> = p.series.entries.iter().map(|e| e.trajectory_id as f64).collect();
    let scores = p.series.scores();
    let (x0, x1) = ids.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (mut y0, mut y1) = scores
        .iter()
        .chain(std::iter::once(&p.threshold))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let pad = if y1 > y0 { 0.05 * (y1 - y0) } else { 0.5 };
    y0 -= pad;
    y1 += pad;
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| LEFT + (x - x0) / xspan * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<!-- config_digest={} -->", p.digest);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="20">trajectory scores ({}), threshold {:.4}</text>"#,
        p.model, p.threshold
    );
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<path d="M{bx:.2} {TOP:.2} L{bx:.2} {by:.2} L{:.2} {by:.2}" stroke="black" fill="none"/>"#,
        W - RIGHT
    );
    for (v, label) in [(y0 + pad, y0 + pad), (y1 - pad, y1 - pad)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label:.3}</text>"#,
            LEFT - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">trajectory</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT:.2}" y="{:.2}" text-anchor="middle">{x0}</text><text x="{:.2}" y="{:.2}" text-anchor="middle">{x1}</text>"#,
        H - BOTTOM + 16.0,
        W - RIGHT,
        H - BOTTOM + 16.0
    );

    let ty = py(p.threshold);
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#d08000" stroke-dasharray="6 4"/>"##,
        W - RIGHT
    );
    if let Some(o) = p.onset_true {
        let x = px(o as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{by:.2}" stroke="#808080" stroke-dasharray="3 3"/><text x="{:.2}" y="{:.2}">true onset {o}</text>"##,
            x + 4.0,
            TOP + 12.0
        );
    }
    if let Some(o) = p.onset_pred {
        let x = px(o as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{by:.2}" stroke="#c00000"/><text x="{:.2}" y="{:.2}" fill="#c00000">detected {o}</text>"##,
            x + 4.0,
            TOP + 26.0
        );
    }

    let pts: Vec<String> = ids
        .iter()
        .zip(&scores)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>"##,
        pts.join(" ")
    );
    for (&x, &y) in ids.iter().zip(&scores) {
        let fill = if y >= p.threshold { "#c00000" } else { "#1f4e9c" };
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}"/>"#, px(x), py(y));
    }
    s.push_str("</svg>\n");
    s
}
