//! The four subcommands, independent of argument parsing.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use cbfkit::analysis::{
    abc_equivalence_check, assumption_report, grid_scan, validity_report, GridScanRecord, InclusionCheck,
};
use cbfkit::cbf::CbfTag;
use cbfkit::sim::{compute_metrics, simulate, SafetyMetrics, Trajectory};
use cbfkit::systems::Scenario;

use crate::config::{ConfigError, ScenarioConfig};
use crate::csv::{write_metrics, write_scan, write_trajectory};
use crate::format::fmt_g9;
use crate::svg::{scan_svg, trajectory_svg};

/// Speeds below this are skipped by the bicycle's relative-degree test.
pub const MIN_RANK_SPEED: f64 = 0.1;

/// Successful command outcomes, mapped onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// The run stopped early (blow-up or leaving the domain).
    Truncated,
    ValidationFailed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Truncated => 2,
            Status::ValidationFailed => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("simulation failed: {0}")]
    Simulation(cbfkit::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Simulation(_) => 2,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Writes through `f` to the configured output file, or to `stdout`.
fn emit<F>(cfg: &ScenarioConfig, stdout: &mut dyn Write, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match &cfg.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io_error(dir))?;
            }
            let file = File::create(path).map_err(io_error(path))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(io_error(path))
        }
        None => f(stdout).map_err(io_error(Path::new("<stdout>"))),
    }
}

/// Path of the chart written next to the CSV.
fn svg_path(cfg: &ScenarioConfig) -> Result<Option<PathBuf>, ConfigError> {
    if !cfg.svg {
        return Ok(None);
    }
    match &cfg.output {
        Some(path) => Ok(Some(path.with_extension("svg"))),
        None => Err(ConfigError::at("output.svg", "charts need an output path (--out)")),
    }
}

fn write_svg(path: &Path, svg: &str) -> Result<(), CliError> {
    std::fs::write(path, svg).map_err(io_error(path))
}

fn dims(scenario: &Scenario) -> (usize, usize) {
    let plant = scenario.plant();
    (plant.state_dim(), plant.input_dim())
}

/// Closed-loop run with the configured construction.
pub fn run_trajectory(cfg: &ScenarioConfig, tag: CbfTag) -> Result<Trajectory, CliError> {
    let plant = cfg.scenario.plant();
    let cbf = cfg.scenario.cbf(tag).map_err(|e| ConfigError::general(e.to_string()))?;
    let spec = cfg.filter_spec()?;
    let x0 = cfg.x0();
    simulate(plant.as_ref(), &cbf, &spec, &x0, &cfg.sim).map_err(|e| match e {
        cbfkit::Error::OutsideDomain(_) | cbfkit::Error::SingularVirtualController(_) => {
            ConfigError::at("init.x0", format!("initial state is outside the domain ({e})")).into()
        }
        cbfkit::Error::InvalidParameter(msg) => ConfigError::general(msg).into(),
        other => CliError::Simulation(other),
    })
}

pub fn run_simulate(cfg: &ScenarioConfig, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let tag = cfg.single_cbf()?;
    let svg = svg_path(cfg)?;
    let traj = run_trajectory(cfg, tag)?;
    let (n, m) = dims(&cfg.scenario);
    emit(cfg, stdout, |w| write_trajectory(w, &traj, n, m))?;
    if let Some(path) = svg {
        write_svg(&path, &trajectory_svg(&traj))?;
    }
    Ok(if traj.exit.truncated() { Status::Truncated } else { Status::Success })
}

/// Grid records for the configured construction.
pub fn scan_records(cfg: &ScenarioConfig, tag: CbfTag) -> Result<Vec<GridScanRecord>, CliError> {
    let plant = cfg.scenario.plant();
    let cbf = cfg.scenario.cbf(tag).map_err(|e| ConfigError::general(e.to_string()))?;
    let alpha = cfg.filter_spec()?.alpha();
    grid_scan(plant.as_ref(), &cbf, alpha, &cfg.grid()).map_err(|e| ConfigError::general(e.to_string()).into())
}

pub fn run_scan(cfg: &ScenarioConfig, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let tag = cfg.single_cbf()?;
    let svg = svg_path(cfg)?;
    let records = scan_records(cfg, tag)?;
    let (n, _) = dims(&cfg.scenario);
    emit(cfg, stdout, |w| write_scan(w, &records, n))?;
    if let Some(path) = svg {
        let axes = &cfg.scan.axes;
        let pair = (axes[0], *axes.get(1).unwrap_or(&axes[0]));
        write_svg(&path, &scan_svg(&records, pair))?;
    }
    Ok(Status::Success)
}

fn point(x: &[f64]) -> String {
    format!("({})", x.iter().map(|&v| fmt_g9(v)).collect::<Vec<_>>().join(", "))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Sampled assumption checks, the rectified-CBF condition, and a validity
/// scan, summarized as text.
pub fn run_validate(cfg: &ScenarioConfig, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let tag = cfg.single_cbf()?;
    if cfg.svg {
        return Err(ConfigError::at("output.svg", "validate produces no chart").into());
    }
    let plant = cfg.scenario.plant();
    let cbf = cfg.scenario.cbf(tag).map_err(|e| ConfigError::general(e.to_string()))?;
    let grid = cfg.grid();
    let config_err = |e: cbfkit::Error| CliError::from(ConfigError::general(e.to_string()));

    let mut report = String::new();
    let mut all_pass = true;
    let mut line = |s: String| {
        report.push_str(&s);
        report.push('\n');
    };
    line(format!("scenario {}, cbf {}, {} grid nodes", cfg.scenario_name(), tag, grid.len()));

    let assumptions = assumption_report(plant.as_ref(), &grid, |x: &[f64]| match cfg.scenario {
        Scenario::Bicycle(_) => x[3].abs() >= MIN_RANK_SPEED,
        Scenario::Pendulum(_) => true,
    })
    .map_err(config_err)?;
    all_pass &= assumptions.passes();
    line(format!(
        "assumptions: {} states, {} skipped for rank, {} relative-degree failures, {} critical-point failures: {}",
        assumptions.checked,
        assumptions.skipped,
        assumptions.relative_degree_failures.len(),
        assumptions.critical_point_failures.len(),
        verdict(assumptions.passes())
    ));
    if let Some(x) = assumptions.relative_degree_failures.first().or(assumptions.critical_point_failures.first()) {
        line(format!("  first failure at x = {}", point(x)));
    }

    if tag == CbfTag::Recbf {
        let witnesses = cbf.recbf_validity_condition(plant.as_ref(), &grid).map_err(config_err)?;
        all_pass &= witnesses.is_empty();
        line(format!(
            "rectified condition (psi_dot + alpha(psi) >= epsilon where L_g L_f psi = 0): {} witnesses: {}",
            witnesses.len(),
            verdict(witnesses.is_empty())
        ));
        if let Some(w) = witnesses.first() {
            line(format!(
                "  witness x = {}, |L_g L_f psi| = {}, psi_dot + alpha(psi) = {}",
                point(&w.x),
                fmt_g9(w.lglf_psi_norm),
                fmt_g9(w.r)
            ));
        }
    }

    let alpha = cfg.filter_spec()?.alpha();
    let records = grid_scan(plant.as_ref(), &cbf, alpha, &grid).map_err(config_err)?;
    let validity = validity_report(&records, cbf.guarantees_inclusion());
    all_pass &= validity.passes();
    let inclusion = match &validity.inclusion {
        InclusionCheck::NotClaimed => "inclusion S in C not claimed".to_string(),
        InclusionCheck::Checked { .. } => format!("{} inclusion violations", validity.inclusion_violations()),
    };
    line(format!(
        "validity scan: {} nodes ({} excluded), {} in S, {} in C, {} singular, {} validity violations, {}: {}",
        validity.nodes,
        validity.excluded,
        validity.in_s,
        validity.in_c,
        validity.singular,
        validity.validity_violations.len(),
        inclusion,
        verdict(validity.passes())
    ));
    if let Some(x) = validity.validity_violations.first() {
        let in_c = records.iter().filter(|r| r.validity_violation && r.in_c).count();
        line(format!("  first violation at x = {}; {in_c} violations lie in C", point(x)));
    }
    if tag == CbfTag::Abc {
        let equivalent = abc_equivalence_check(&records);
        all_pass &= equivalent;
        line(format!("singular set equals switching region: {}", verdict(equivalent)));
    }
    line(format!("result: {}", if all_pass { "PASS" } else { "FAIL" }));

    emit(cfg, stdout, |w| w.write_all(report.as_bytes()))?;
    Ok(if all_pass { Status::Success } else { Status::ValidationFailed })
}

/// Metrics for each requested construction from the shared initial state.
pub fn compare_metrics(cfg: &ScenarioConfig) -> Result<Vec<(CbfTag, SafetyMetrics)>, CliError> {
    cfg.cbf_list()
        .into_iter()
        .map(|tag| Ok((tag, compute_metrics(&run_trajectory(cfg, tag)?))))
        .collect()
}

pub fn run_compare(cfg: &ScenarioConfig, stdout: &mut dyn Write) -> Result<Status, CliError> {
    if cfg.svg {
        return Err(ConfigError::at("output.svg", "compare produces no chart").into());
    }
    let rows = compare_metrics(cfg)?;
    let (n, m) = dims(&cfg.scenario);
    emit(cfg, stdout, |w| write_metrics(w, &rows, n, m))?;
    Ok(Status::Success)
}
