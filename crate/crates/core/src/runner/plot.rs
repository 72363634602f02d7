//! Learning-curve SVG: one mean polyline per series over a translucent ±1 std band.

use std::fmt::Write as _;
use std::path::Path;

use super::RunError;

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub episodes: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Trailing moving average over `window` points; `window <= 1` is the identity.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return xs.to_vec();
    }
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Reads `series,episode,success_rate_mean,success_rate_std` curves from aggregated CSVs.
/// Rows are grouped by series label in order of first appearance.
pub fn read_curves(files: &[impl AsRef<Path>]) -> Result<Vec<Curve>, RunError> {
    let mut curves: Vec<Curve> = Vec::new();
    for f in files {
        let f = f.as_ref();
        let bad = |m: String| RunError::Plot(format!("{}: {m}", f.display()));
        let mut rdr = csv::Reader::from_path(f).map_err(|e| bad(e.to_string()))?;
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("missing column {name}")));
        let (cs, ce, cm, cd) = (col("series")?, col("episode")?, col("success_rate_mean")?, col("success_rate_std")?);
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |c: usize| rec[c].parse::<f64>().map_err(|_| bad(format!("bad number {:?}", &rec[c])));
            let label = rec[cs].to_string();
            let idx = match curves.iter().position(|c| c.label == label) {
                Some(i) => i,
                None => {
                    curves.push(Curve { label, episodes: vec![], mean: vec![], std: vec![] });
                    curves.len() - 1
                }
            };
            curves[idx].episodes.push(num(ce)?);
            curves[idx].mean.push(num(cm)?);
            curves[idx].std.push(num(cd)?);
        }
    }
    Ok(curves)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders curves into an SVG document. Success rates are drawn on a fixed `[0, 1]` axis.
pub fn render_svg(curves: &[Curve], smoothing: usize) -> Result<String, RunError> {
    if curves.is_empty() || curves.iter().any(|c| c.episodes.is_empty()) {
        return Err(RunError::Plot("nothing to plot".into()));
    }
    let xmin = curves.iter().flat_map(|c| c.episodes.iter().copied()).fold(f64::INFINITY, f64::min);
    let mut xmax = curves.iter().flat_map(|c| c.episodes.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
    let py = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(w, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(w, r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/>"#, TOP + ph, LEFT + pw, TOP + ph);
    let _ = writeln!(w, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + ph);
    let _ = writeln!(w, "</g>");
    for i in 0..=5 {
        let y = i as f64 / 5.0;
        let _ = writeln!(w, r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{y:.1}</text>"#, LEFT - 6.0, py(y) + 4.0);
    }
    for i in 0..=4 {
        let x = xmin + (xmax - xmin) * i as f64 / 4.0;
        let _ = writeln!(w, r#"<text x="{:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#, px(x), TOP + ph + 16.0, x.round());
    }
    let _ = writeln!(w, r#"<text class="xlabel" x="{}" y="{}" font-size="13" text-anchor="middle">episodes</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        w,
        r#"<text class="ylabel" x="15" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {})">success rate</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let mean = moving_average(&c.mean, smoothing);
        let std = moving_average(&c.std, smoothing);
        let upper: Vec<String> = c.episodes.iter().zip(&mean).zip(&std).map(|((&x, &m), &d)| format!("{:.2},{:.2}", px(x), py(m + d))).collect();
        let lower: Vec<String> = c.episodes.iter().zip(&mean).zip(&std).rev().map(|((&x, &m), &d)| format!("{:.2},{:.2}", px(x), py(m - d))).collect();
        let _ = writeln!(w, r#"<polygon class="band" fill="{color}" fill-opacity="0.2" stroke="none" points="{} {}"/>"#, upper.join(" "), lower.join(" "));
        let line: Vec<String> = c.episodes.iter().zip(&mean).map(|(&x, &m)| format!("{:.2},{:.2}", px(x), py(m))).collect();
        let _ = writeln!(w, r#"<polyline class="mean" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, line.join(" "));
        let ly = TOP + 10.0 + 20.0 * ci as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(w, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(w, r#"<text class="legend" x="{}" y="{}" font-size="12">{}</text>"#, lx + 26.0, ly + 4.0, escape(&c.label));
    }
    let _ = writeln!(w, "</svg>");
    Ok(s)
}
