//! CSV writers for trajectories, grid scans and comparison metrics.
//!
//! Fields are comma separated, lines end with `\n`, floats use nine
//! significant digits and booleans are written as `0`/`1`. Absent values
//! are empty fields so every row has the header's width.

use std::io::{self, Write};

use cbfkit::analysis::GridScanRecord;
use cbfkit::cbf::CbfTag;
use cbfkit::sim::{ExitReason, SafetyMetrics, Trajectory};

use crate::format::fmt_g9;

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn maybe(v: Option<f64>) -> String {
    v.map(fmt_g9).unwrap_or_default()
}

/// `t,x1,...,xn,u1,...,um,h,psi,s`.
pub fn trajectory_header(n: usize, m: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend(numbered("x", n));
    cols.extend(numbered("u", m));
    cols.extend(["h", "psi", "s"].map(String::from));
    cols.join(",")
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory, n: usize, m: usize) -> io::Result<()> {
    writeln!(w, "{}", trajectory_header(n, m))?;
    for row in &traj.rows {
        let mut fields = Vec::with_capacity(n + m + 4);
        fields.push(fmt_g9(row.t));
        fields.extend(row.x.iter().map(|&v| fmt_g9(v)));
        fields.extend(row.u.iter().map(|&v| fmt_g9(v)));
        fields.push(fmt_g9(row.h));
        fields.push(fmt_g9(row.psi));
        fields.push(maybe(row.s));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// `x1,...,xn,h,psi,lgh_norm,margin,s,in_S,in_C,singular,violation`.
pub fn scan_header(n: usize) -> String {
    let mut cols: Vec<String> = numbered("x", n).collect();
    cols.extend(
        ["h", "psi", "lgh_norm", "margin", "s", "in_S", "in_C", "singular", "violation"].map(String::from),
    );
    cols.join(",")
}

/// Nodes outside the domain keep their coordinates and leave every other
/// field empty.
pub fn write_scan<W: Write>(mut w: W, records: &[GridScanRecord], n: usize) -> io::Result<()> {
    writeln!(w, "{}", scan_header(n))?;
    for r in records {
        let mut fields: Vec<String> = r.x.iter().map(|&v| fmt_g9(v)).collect();
        if r.excluded {
            fields.extend(std::iter::repeat(String::new()).take(9));
        } else {
            fields.push(fmt_g9(r.h));
            fields.push(fmt_g9(r.psi));
            fields.push(fmt_g9(r.lgh_norm));
            fields.push(fmt_g9(r.margin));
            fields.push(maybe(r.s));
            for b in [r.in_s, r.in_c, r.singular, r.validity_violation] {
                fields.push(bit(b).to_string());
            }
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// `cbf,exit,blew_up,final_time,min_h,min_psi,max_abs_u1..,max_step_delta_u1..,final_x1..`.
pub fn metrics_header(n: usize, m: usize) -> String {
    let mut cols: Vec<String> = ["cbf", "exit", "blew_up", "final_time", "min_h", "min_psi"].map(String::from).to_vec();
    cols.extend(numbered("max_abs_u", m));
    cols.extend(numbered("max_step_delta_u", m));
    cols.extend(numbered("final_x", n));
    cols.join(",")
}

pub fn exit_label(exit: &ExitReason) -> &'static str {
    match exit {
        ExitReason::Completed => "completed",
        ExitReason::BlewUp { .. } => "blew_up",
        ExitReason::LeftDomain { .. } => "left_domain",
    }
}

pub fn write_metrics<W: Write>(mut w: W, rows: &[(CbfTag, SafetyMetrics)], n: usize, m: usize) -> io::Result<()> {
    writeln!(w, "{}", metrics_header(n, m))?;
    for (tag, metrics) in rows {
        let mut fields = vec![
            tag.as_str().to_string(),
            exit_label(&metrics.exit).to_string(),
            bit(metrics.blew_up).to_string(),
            fmt_g9(metrics.final_time),
            fmt_g9(metrics.min_h),
            fmt_g9(metrics.min_psi),
        ];
        fields.extend(metrics.max_abs_u.iter().map(|&v| fmt_g9(v)));
        fields.extend(metrics.max_step_delta_u.iter().map(|&v| fmt_g9(v)));
        fields.extend(metrics.final_state.iter().map(|&v| fmt_g9(v)));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cbfkit::sim::TrajectoryRow;

    #[test]
    fn headers() {
        assert_eq!(trajectory_header(2, 1), "t,x1,x2,u1,h,psi,s");
        assert_eq!(scan_header(2), "x1,x2,h,psi,lgh_norm,margin,s,in_S,in_C,singular,violation");
        assert_eq!(
            metrics_header(2, 1),
            "cbf,exit,blew_up,final_time,min_h,min_psi,max_abs_u1,max_step_delta_u1,final_x1,final_x2"
        );
    }

    #[test]
    fn absent_switching_value_is_an_empty_field() {
        let traj = Trajectory {
            dt: 0.5,
            rows: vec![TrajectoryRow { t: 0.5, x: vec![1.0, -2.0], u: vec![0.25], h: 3.0, psi: 1e-7, s: None }],
            exit: ExitReason::Completed,
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj, 2, 1).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x1,x2,u1,h,psi,s\n0.5,1,-2,0.25,3,1e-07,\n");
    }

    #[test]
    fn excluded_scan_node_keeps_width() {
        let r = GridScanRecord {
            x: vec![20.0, -0.1],
            h: f64::NAN,
            psi: f64::NAN,
            lgh_norm: f64::NAN,
            margin: f64::NAN,
            s: None,
            in_s: false,
            in_c: false,
            singular: false,
            validity_violation: false,
            excluded: true,
        };
        let mut buf = Vec::new();
        write_scan(&mut buf, &[r], 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row, "20,-0.1,,,,,,,,,");
        assert_eq!(row.split(',').count(), scan_header(2).split(',').count());
    }
}
