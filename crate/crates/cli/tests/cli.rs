use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use cbfkit::sim::compute_metrics;
use cbfkit_cli::commands::{compare_metrics, run_trajectory};
use cbfkit_cli::config::ScenarioConfig;

fn cbfkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbfkit")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn header(text: &str) -> String {
    format!("{}\n", text.lines().next().unwrap())
}

/// Column `name` of a CSV as floats, skipping empty fields.
fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines
        .filter_map(|l| {
            let f = l.split(',').nth(idx).unwrap();
            (!f.is_empty()).then(|| f.parse().unwrap())
        })
        .collect()
}

#[test]
fn headers_match_golden_files() {
    let short = ["--set", "sim.t_final=0.01"];
    let sim = cbfkit(&[&["simulate", "--cbf", "abc"][..], &short].concat());
    assert_eq!(header(&stdout(&sim)), golden("trajectory_pendulum.header"));
    let sim = cbfkit(&[&["simulate", "--scenario", "bicycle"][..], &short].concat());
    assert_eq!(header(&stdout(&sim)), golden("trajectory_bicycle.header"));
    let scan = cbfkit(&["scan", "--set", "scan.resolution=3"]);
    assert_eq!(header(&stdout(&scan)), golden("scan_pendulum.header"));
    let scan = cbfkit(&["scan", "--scenario", "bicycle", "--set", "scan.resolution=3"]);
    assert_eq!(header(&stdout(&scan)), golden("scan_bicycle.header"));
    let cmp = cbfkit(&[&["compare"][..], &short].concat());
    assert_eq!(header(&stdout(&cmp)), golden("compare_pendulum.header"));
}

#[test]
fn trajectory_rows_use_lf_and_leave_s_empty_without_activation() {
    let out = cbfkit(&["simulate", "--cbf", "backstepping", "--set", "sim.t_final=0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 501);
    assert!(text.lines().skip(1).all(|l| l.ends_with(',')));
    let width = text.lines().next().unwrap().split(',').count();
    assert!(text.lines().all(|l| l.split(',').count() == width));
    let out = cbfkit(&["simulate", "--cbf", "abc", "--set", "sim.t_final=0.5"]);
    assert!(stdout(&out).lines().skip(1).all(|l| !l.ends_with(',')));
}

#[test]
fn pendulum_abc_run_stays_in_the_constraint_set() {
    let out = cbfkit(&["simulate", "--scenario", "pendulum", "--cbf", "abc"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(column(&stdout(&out), "psi").iter().all(|&p| p >= 0.0));
}

#[test]
fn bicycle_abc_run_avoids_the_obstacle() {
    let out = cbfkit(&["simulate", "--scenario", "bicycle", "--cbf", "abc"]);
    let text = stdout(&out);
    let (xi, eta) = (column(&text, "x1"), column(&text, "x2"));
    let min = xi.iter().zip(&eta).map(|(x, e)| (x - 20.0).powi(2) + (e + 0.1).powi(2)).fold(f64::INFINITY, f64::min);
    assert!(min >= 16.0, "{min}");
}

#[test]
fn runs_are_byte_identical() {
    for args in [
        &["simulate", "--cbf", "recbf", "--set", "sim.t_final=2"][..],
        &["scan", "--cbf", "abc", "--set", "scan.resolution=41"][..],
        &["compare", "--set", "sim.t_final=1"][..],
    ] {
        assert_eq!(cbfkit(args).stdout, cbfkit(args).stdout, "{args:?}");
    }
}

#[test]
fn exit_codes() {
    let out = cbfkit(&["simulate", "--set", "cbf.nu=1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cbf.nu"));
    assert_eq!(cbfkit(&["simulate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(cbfkit(&["simulate", "--cbf", "abc,hocbf"]).status.code(), Some(1));
    assert_eq!(cbfkit(&["--help"]).status.code(), Some(0));
    // crossing upright fast with the high-order CBF
    let out = cbfkit(&["simulate", "--cbf", "hocbf", "--set", "init.x0=-0.1,2.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(cbfkit(&["validate", "--cbf", "recbf", "--set", "cbf.epsilon=4"]).status.code(), Some(3));
    assert_eq!(cbfkit(&["validate", "--cbf", "recbf"]).status.code(), Some(0));
    assert_eq!(cbfkit(&["validate", "--cbf", "abc"]).status.code(), Some(0));
}

#[test]
fn validate_reports_the_rectified_witness() {
    let out = cbfkit(&["validate", "--cbf", "recbf", "--set", "cbf.epsilon=4"]);
    let text = stdout(&out);
    assert!(text.contains("witness x = (0, "), "{text}");
    assert!(text.contains("result: FAIL"));
}

#[test]
fn scan_examples() {
    let out = cbfkit(&["scan", "--set", "scan.resolution=2"]);
    assert_eq!(stdout(&out).lines().count(), 1 + 4);
    let abc = stdout(&cbfkit(&["scan", "--cbf", "abc", "--set", "scan.resolution=101"]));
    assert!(column(&abc, "violation").iter().all(|&v| v == 0.0));
    let hocbf = stdout(&cbfkit(&["scan", "--cbf", "hocbf", "--set", "scan.resolution=101"]));
    assert!(column(&hocbf, "violation").iter().any(|&v| v == 1.0));
}

#[test]
fn config_file_flags_and_overrides_compose() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(&file, "# short run\ncbf = hocbf\nsim.t_final = 0.1\nsim.dt = 0.01\n").unwrap();
    let f = file.to_str().unwrap();
    let out = stdout(&cbfkit(&["simulate", "--config", f]));
    assert_eq!(out.lines().count(), 1 + 11);
    let out = stdout(&cbfkit(&["simulate", "--config", f, "--set", "sim.dt=0.02"]));
    assert_eq!(out.lines().count(), 1 + 6);
    // the flag beats the file, and activation fills the s column
    let out = stdout(&cbfkit(&["simulate", "--config", f, "--cbf", "abc"]));
    assert!(!out.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn serialized_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--scenario", "bicycle", "--cbf", "abc", "--set", "sim.t_final=1", "--set", "virtual.sigma=0.01"];
    let direct = cbfkit(&[&["simulate"][..], &args].concat()).stdout;
    let cli = cbfkit_cli::Cli::try_parse_from([&["cbfkit", "simulate"][..], &args].concat()).unwrap();
    let cbfkit_cli::Command::Simulate(common) = cli.command else { unreachable!() };
    let cfg = common.resolve().unwrap();
    let file = dir.path().join("effective.cfg");
    std::fs::write(&file, cfg.to_config_string()).unwrap();
    let replay = cbfkit(&["simulate", "--config", file.to_str().unwrap()]).stdout;
    assert_eq!(direct, replay);
}

#[test]
fn output_file_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("nested/run.csv");
    let out = cbfkit(&["simulate", "--set", "sim.t_final=0.2", "--out", csv.to_str().unwrap(), "--svg"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("t,x1"));
    assert!(std::fs::read_to_string(csv.with_extension("svg")).unwrap().starts_with("<svg"));
    let scan = dir.path().join("scan.csv");
    let out = cbfkit(&["scan", "--set", "scan.resolution=21", "--out", scan.to_str().unwrap(), "--svg"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(scan.with_extension("svg").exists());
    assert_eq!(cbfkit(&["simulate", "--svg"]).status.code(), Some(1));
}

#[test]
fn compare_examples() {
    let cfg = ScenarioConfig::parse("").unwrap();
    let rows = compare_metrics(&cfg).unwrap();
    let get = |name: &str| &rows.iter().find(|(t, _)| t.as_str() == name).unwrap().1;
    assert!(get("hocbf").blew_up);
    assert!(get("abc").max_abs_u[0] >= get("backstepping").max_abs_u[0]);
    let single = ScenarioConfig::parse("cbf = abc").unwrap();
    let rows = compare_metrics(&single).unwrap();
    assert_eq!(rows.len(), 1);
    let direct = compute_metrics(&run_trajectory(&single, cbfkit::cbf::CbfTag::Abc).unwrap());
    assert_eq!(rows[0].1, direct);
}
