use std::collections::BTreeMap;
use std::fmt::Write;

use super::bench::{BenchRecord, BenchStatus};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

type Series = BTreeMap<(String, usize), Vec<(f64, f64)>>;

/// Two line charts side by side: normalized bound vs depth and wall time vs
/// depth, one line per (algorithm, width), averaged over seeds.
pub fn render_svg(records: &[BenchRecord]) -> String {
    let mut bound: BTreeMap<(String, usize), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut time: BTreeMap<(String, usize), BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == BenchStatus::Ok) {
        let key = (r.algo.tag().to_string(), r.width);
        bound.entry(key.clone()).or_default().entry(r.depth).or_default().push(r.normalized);
        time.entry(key).or_default().entry(r.depth).or_default().push(r.wall_time_s);
    }
    let mean = |m: BTreeMap<(String, usize), BTreeMap<usize, Vec<f64>>>| -> Series {
        m.into_iter()
            .map(|(k, pts)| {
                let line = pts
                    .into_iter()
                    .map(|(d, v)| (d as f64, v.iter().sum::<f64>() / v.len() as f64))
                    .collect();
                (k, line)
            })
            .collect()
    };
    let (bound, time) = (mean(bound), mean(time));

    let width = 2.0 * PANEL_W + 160.0;
    let height = PANEL_H + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    panel(&mut s, 0.0, "normalized bound vs depth", &bound);
    panel(&mut s, PANEL_W, "wall time (s) vs depth", &time);
    for (i, (algo, w)) in bound.keys().enumerate() {
        let y = 30.0 + 16.0 * i as f64;
        let x = 2.0 * PANEL_W + 10.0;
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            x + 18.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{algo} w={w}</text>"#, x + 24.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, x0: f64, title: &str, series: &Series) {
    let pts = series.values().flatten();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymax) = (0.0, 1.0, 1.0);
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    if ymax <= ymin {
        ymax = ymin + 1.0;
    }
    ymax *= 1.05;
    let (left, top) = (x0 + MARGIN, 30.0);
    let (w, h) = (PANEL_W - MARGIN - 10.0, PANEL_H - 50.0);
    let px = |x: f64| left + (x - xmin) / (xmax - xmin) * w;
    let py = |y: f64| top + h - (y - ymin) / (ymax - ymin) * h;

    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{title}</text>"#, left + w / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let fy = ymin + (ymax - ymin) * k as f64 / 4.0;
        let fx = xmin + (xmax - xmin) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 4.0,
            py(fy) + 4.0,
            tick(fy)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(fx),
            top + h + 14.0,
            tick(fx)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">depth</text>"#, left + w / 2.0, top + h + 30.0);
    for (i, line) in series.values().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = line.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in line {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.1e}")
    }
}
