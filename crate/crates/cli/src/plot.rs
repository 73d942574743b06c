//! Polyline charts of the diagnostics columns against `t`.

use std::fmt::Write as _;

use crate::output::DIAGNOSTIC_COLUMNS;

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 40.0;
const COLS: usize = 2;

fn label(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn diagnostics_svg(rows: &[[f64; 7]]) -> String {
    let panels = DIAGNOSTIC_COLUMNS.len() - 1;
    let rows_n = panels.div_ceil(COLS);
    let width = PANEL_W * COLS as f64;
    let height = PANEL_H * rows_n as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let t: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (t0, t1) = range(&t);
    for c in 1..DIAGNOSTIC_COLUMNS.len() {
        let k = c - 1;
        let ox = PANEL_W * (k % COLS) as f64;
        let oy = PANEL_H * (k / COLS) as f64;
        let (x0, y0) = (ox + MARGIN, oy + MARGIN * 0.6);
        let (w, h) = (PANEL_W - 1.5 * MARGIN, PANEL_H - 1.6 * MARGIN);
        let v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let (v0, v1) = range(&v);
        let _ = writeln!(
            s,
            r#"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="grey"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + w / 2.0,
            y0 - 6.0,
            DIAGNOSTIC_COLUMNS[c]
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x0 + 2.0, y0 + 12.0, label(v1));
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x0 + 2.0, y0 + h - 4.0, label(v0));
        let _ = writeln!(s, r#"<text x="{x0}" y="{}">t = {}</text>"#, y0 + h + 14.0, label(t0));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            x0 + w,
            y0 + h + 14.0,
            label(t1)
        );
        let pts: Vec<String> = t
            .iter()
            .zip(&v)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| {
                let px = x0 + w * frac(a, t0, t1);
                let py = y0 + h * (1.0 - frac(b, v0, v1));
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn frac(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (x - lo) / (hi - lo)
    } else {
        0.5
    }
}
