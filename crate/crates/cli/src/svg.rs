//! Minimal SVG line charts for quick visual inspection of runs and scans.

use std::fmt::Write as _;

use cbfkit::analysis::GridScanRecord;
use cbfkit::sim::Trajectory;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 180.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series<'a> {
    label: String,
    points: Vec<(f64, f64)>,
    color: &'a str,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
        }
    }
    if !b.0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if b.1 <= b.0 {
        b.1 = b.0 + 1.0;
    }
    if b.3 <= b.2 {
        b = (b.0, b.1, b.2 - 0.5, b.3 + 0.5);
    }
    b
}

fn panel(out: &mut String, top: f64, title: &str, series: &[Series]) {
    let (x0, x1, y0, y1) = bounds(series);
    let w = WIDTH - 2.0 * MARGIN;
    let h = PANEL_HEIGHT - MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| top + MARGIN / 2.0 + (y1 - y) / (y1 - y0) * h;
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#888"/>"##,
        top + MARGIN / 2.0
    );
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="{:.1}" font-size="12">{title}</text>"#, top + MARGIN / 2.0 - 6.0);
    let _ = writeln!(
        out,
        r#"<text x="4" y="{:.1}" font-size="10">{y1:.3}</text><text x="4" y="{:.1}" font-size="10">{y0:.3}</text>"#,
        top + MARGIN / 2.0 + 10.0,
        top + MARGIN / 2.0 + h
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#ccc" stroke-dasharray="4 3"/>"##,
            MARGIN + w,
            py(0.0),
            py(0.0)
        );
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            s.color,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 90.0,
            top + MARGIN / 2.0 + 14.0 * (i as f64 + 1.0),
            s.color,
            s.label
        );
    }
}

fn document(panels: usize, body: &str) -> String {
    let height = PANEL_HEIGHT * panels as f64;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// States, inputs, and `h`/`ψ` against time, one panel each.
pub fn trajectory_svg(traj: &Trajectory) -> String {
    let Some(first) = traj.rows.first() else {
        return document(0, "");
    };
    let column = |label: String, color, f: &dyn Fn(&cbfkit::sim::TrajectoryRow) -> f64| Series {
        label,
        points: traj.rows.iter().map(|r| (r.t, f(r))).collect(),
        color,
    };
    let states: Vec<Series> = (0..first.x.len())
        .map(|i| column(format!("x{}", i + 1), COLORS[i % COLORS.len()], &move |r| r.x[i]))
        .collect();
    let inputs: Vec<Series> = (0..first.u.len())
        .map(|i| column(format!("u{}", i + 1), COLORS[i % COLORS.len()], &move |r| r.u[i]))
        .collect();
    let barrier = vec![column("h".into(), COLORS[0], &|r| r.h), column("psi".into(), COLORS[1], &|r| r.psi)];
    let mut body = String::new();
    panel(&mut body, 0.0, "state", &states);
    panel(&mut body, PANEL_HEIGHT, "input", &inputs);
    panel(&mut body, 2.0 * PANEL_HEIGHT, "h and psi", &barrier);
    document(3, &body)
}

/// Phase-plane scatter of the first two scanned coordinates, one series
/// per set: constraint set, safe set, singular nodes, violations.
pub fn scan_svg(records: &[GridScanRecord], axes: (usize, usize)) -> String {
    let pick = |f: &dyn Fn(&GridScanRecord) -> bool| -> Vec<(f64, f64)> {
        records.iter().filter(|r| !r.excluded && f(r)).map(|r| (r.x[axes.0], r.x[axes.1])).collect()
    };
    let layers = [
        ("in_C", "#f4b6b6", pick(&|r| r.in_c)),
        ("in_S", "#9fd89f", pick(&|r| r.in_s)),
        ("singular", "#222", pick(&|r| r.singular)),
        ("violation", "#d62728", pick(&|r| r.validity_violation)),
    ];
    let all: Vec<Series> = layers
        .iter()
        .map(|(label, color, pts)| Series { label: label.to_string(), points: pts.clone(), color })
        .collect();
    let (x0, x1, y0, y1) = bounds(&all);
    let side = WIDTH - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * side;
    let py = |y: f64| MARGIN + (y1 - y) / (y1 - y0) * side;
    let mut body = String::new();
    for (i, s) in all.iter().enumerate() {
        let _ = writeln!(body, r#"<g fill="{}">"#, s.color);
        for &(x, y) in &s.points {
            let _ = writeln!(body, r#"<rect x="{:.2}" y="{:.2}" width="1.6" height="1.6"/>"#, px(x) - 0.8, py(y) - 0.8);
        }
        let _ = writeln!(body, "</g>");
        let _ = writeln!(
            body,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{}">{}</text>"#,
            MARGIN + 90.0 * i as f64,
            MARGIN - 10.0,
            s.color,
            s.label
        );
    }
    let _ = writeln!(
        body,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{side}" height="{side}" fill="none" stroke="#888"/>"##
    );
    let height = side + 2.0 * MARGIN;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}
