//! Flat `key = value` scenario configuration.
//!
//! Files hold one assignment per line; `#` starts a comment. Keys are dotted
//! (`sim.dt`, `cbf.mu`, `init.x0`) and vectors are comma separated. Entries
//! are applied in order, so later assignments win: defaults, then the config
//! file, then `--scenario`/`--cbf`, then each `--set`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use cbfkit::analysis::{GridAxis, GridSpec};
use cbfkit::cbf::CbfTag;
use cbfkit::filter::LambdaKind;
use cbfkit::sim::SimConfig;
use cbfkit::systems::{BicycleParams, PendulumParams, Scenario};

/// A configuration problem, tied to the key that caused it when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}", match .key { Some(k) => format!("invalid value for `{k}`: {}", .message), None => .message.clone() })]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn at(key: &str, message: impl Into<String>) -> Self {
        ConfigError { key: Some(key.to_string()), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError { key: None, message: message.into() }
    }
}

/// Which multiplier the plant-level safety filter uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Exact,
    HalfSontag,
}

/// Phase-space scan window over selected state coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub axes: Vec<usize>,
    pub resolution: Vec<usize>,
    pub window: Vec<(f64, f64)>,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// `None` means the command's default selection.
    pub cbf: Option<Vec<CbfTag>>,
    pub sim: SimConfig,
    pub lambda: LambdaChoice,
    pub sigma: f64,
    pub scan: ScanSettings,
    pub output: Option<PathBuf>,
    pub svg: bool,
}

const SCAN_RESOLUTION: usize = 401;
const HALF_SONTAG_SIGMA: f64 = 1e-3;

impl ScenarioConfig {
    /// Default configuration for a scenario name.
    pub fn defaults(name: &str) -> Result<Self, ConfigError> {
        let (scenario, scan) = match name {
            "pendulum" => (
                Scenario::Pendulum(PendulumParams::default()),
                ScanSettings {
                    axes: vec![0, 1],
                    resolution: vec![SCAN_RESOLUTION; 2],
                    window: vec![(-PI / 2.0, PI / 2.0), (-4.0, 4.0)],
                },
            ),
            "bicycle" => (
                Scenario::Bicycle(BicycleParams::default()),
                ScanSettings {
                    axes: vec![0, 1],
                    resolution: vec![SCAN_RESOLUTION; 2],
                    window: vec![(0.0, 40.0), (-10.0, 10.0)],
                },
            ),
            other => {
                return Err(ConfigError::at("scenario", format!("expected `pendulum` or `bicycle`, got `{other}`")))
            }
        };
        let sim = match scenario {
            Scenario::Pendulum(_) => SimConfig::new(10.0, 1e-3),
            Scenario::Bicycle(_) => SimConfig::new(20.0, 1e-3),
        };
        Ok(ScenarioConfig {
            scenario,
            cbf: None,
            sim,
            lambda: LambdaChoice::Exact,
            sigma: HALF_SONTAG_SIGMA,
            scan,
            output: None,
            svg: false,
        })
    }

    /// Builds a configuration from ordered `(key, value)` assignments.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self, ConfigError> {
        let name = entries
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .map(|(_, v)| v.as_str())
            .unwrap_or("pendulum");
        let mut cfg = ScenarioConfig::defaults(name)?;
        for (key, value) in entries {
            if key != "scenario" {
                cfg.set(key, value)?;
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Parses configuration text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        ScenarioConfig::from_entries(&parse_entries(text)?)
    }

    /// Applies one assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "cbf" => {
                let tags = value
                    .split(',')
                    .map(|t| t.trim().parse::<CbfTag>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| ConfigError::at(key, e.to_string()))?;
                self.cbf = Some(tags);
            }
            "sim.t_final" => self.sim.t_final = positive(key, value)?,
            "sim.dt" => self.sim.dt = positive(key, value)?,
            "sim.blowup_threshold" => self.sim.blowup_threshold = positive(key, value)?,
            "filter.lambda" => {
                self.lambda = match value {
                    "exact" => LambdaChoice::Exact,
                    "half_sontag" => LambdaChoice::HalfSontag,
                    _ => return Err(ConfigError::at(key, format!("expected `exact` or `half_sontag`, got `{value}`"))),
                }
            }
            "filter.sigma" => self.sigma = positive(key, value)?,
            "init.x0" => {
                let x0 = floats(key, value)?;
                let n = self.state_dim();
                if x0.len() != n {
                    return Err(ConfigError::at(key, format!("expected {n} components, got {}", x0.len())));
                }
                match &mut self.scenario {
                    Scenario::Pendulum(p) => p.x0.copy_from_slice(&x0),
                    Scenario::Bicycle(p) => p.x0.copy_from_slice(&x0),
                }
            }
            "scan.axes" => {
                let axes = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| ConfigError::at(key, format!("expected state indices, got `{value}`")))?;
                self.scan.axes = axes;
            }
            "scan.resolution" => {
                let counts = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| ConfigError::at(key, format!("expected node counts, got `{value}`")))?;
                self.scan.resolution = counts;
            }
            "scan.window" => {
                let v = floats(key, value)?;
                if v.len() % 2 != 0 {
                    return Err(ConfigError::at(key, "expected lo,hi pairs"));
                }
                self.scan.window = v.chunks(2).map(|c| (c[0], c[1])).collect();
            }
            "output.path" => self.output = Some(PathBuf::from(value)),
            "output.svg" => self.svg = boolean(key, value)?,
            _ => match &mut self.scenario {
                Scenario::Pendulum(p) => set_pendulum(p, key, value)?,
                Scenario::Bicycle(p) => set_bicycle(p, key, value)?,
            },
        }
        Ok(())
    }

    fn state_dim(&self) -> usize {
        match self.scenario {
            Scenario::Pendulum(_) => 2,
            Scenario::Bicycle(_) => 4,
        }
    }

    /// Cross-key consistency checks.
    fn check(&self) -> Result<(), ConfigError> {
        let n = self.state_dim();
        let scan = &self.scan;
        if scan.axes.is_empty() || scan.axes.iter().any(|&i| i >= n) {
            return Err(ConfigError::at("scan.axes", format!("indices must lie in 0..{n}")));
        }
        let d = scan.axes.len();
        if !(scan.resolution.len() == 1 || scan.resolution.len() == d) || scan.resolution.iter().any(|&c| c < 2) {
            return Err(ConfigError::at("scan.resolution", format!("need 1 or {d} counts, each at least 2")));
        }
        if scan.window.len() != d || scan.window.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(ConfigError::at("scan.window", format!("need {d} increasing lo,hi pairs")));
        }
        if let Some(tags) = &self.cbf {
            if tags.is_empty() {
                return Err(ConfigError::at("cbf", "empty selection"));
            }
        }
        // surfaces parameter errors that only show when instances are built
        for tag in CbfTag::ALL {
            self.scenario.cbf(tag).map_err(|e| ConfigError::general(e.to_string()))?;
        }
        self.filter_spec()?;
        Ok(())
    }

    pub fn scenario_name(&self) -> &'static str {
        self.scenario.name()
    }

    /// The single construction for `simulate`, `scan` and `validate`.
    pub fn single_cbf(&self) -> Result<CbfTag, ConfigError> {
        match self.cbf.as_deref() {
            None => Ok(CbfTag::Abc),
            Some([tag]) => Ok(*tag),
            Some(_) => Err(ConfigError::at("cbf", "this command takes exactly one construction")),
        }
    }

    /// The constructions for `compare`, all four by default.
    pub fn cbf_list(&self) -> Vec<CbfTag> {
        self.cbf.clone().unwrap_or_else(|| CbfTag::ALL.to_vec())
    }

    pub fn x0(&self) -> Vec<f64> {
        self.scenario.x0()
    }

    pub fn filter_spec(&self) -> Result<cbfkit::SafetyFilterSpec, ConfigError> {
        let spec = self.scenario.filter_spec().map_err(|e| ConfigError::general(e.to_string()))?;
        Ok(match self.lambda {
            LambdaChoice::Exact => spec,
            LambdaChoice::HalfSontag => spec.with_lambda(LambdaKind::HalfSontag { sigma: self.sigma }),
        })
    }

    /// Scan grid; coordinates not on an axis are taken from `init.x0`.
    pub fn grid(&self) -> GridSpec {
        let scan = &self.scan;
        let axes = scan
            .axes
            .iter()
            .zip(&scan.window)
            .enumerate()
            .map(|(i, (&index, &(lo, hi)))| GridAxis {
                index,
                lo,
                hi,
                count: if scan.resolution.len() == 1 { scan.resolution[0] } else { scan.resolution[i] },
            })
            .collect();
        GridSpec { base: self.x0(), axes }
    }

    /// Every effective parameter as `(key, value)`, in a canonical order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| out.push((k.to_string(), v));
        push("scenario", self.scenario_name().to_string());
        if let Some(tags) = &self.cbf {
            push("cbf", tags.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(","));
        }
        push("sim.t_final", num(self.sim.t_final));
        push("sim.dt", num(self.sim.dt));
        push("sim.blowup_threshold", num(self.sim.blowup_threshold));
        push(
            "filter.lambda",
            match self.lambda {
                LambdaChoice::Exact => "exact",
                LambdaChoice::HalfSontag => "half_sontag",
            }
            .to_string(),
        );
        push("filter.sigma", num(self.sigma));
        push("init.x0", nums(&self.x0()));
        match &self.scenario {
            Scenario::Pendulum(p) => {
                push("cbf.alpha", num(p.alpha));
                push("cbf.alpha_inner", opt(p.alpha_inner));
                push("cbf.gamma", num(p.gamma));
                push("cbf.epsilon", num(p.epsilon));
                push("cbf.k", num(p.k));
                push("cbf.mu_backstepping", num(p.mu_backstepping));
                push("cbf.mu_abc", num(p.mu_abc));
                push("cbf.mu_recbf", num(p.mu_recbf));
            }
            Scenario::Bicycle(p) => {
                push("vehicle.wheelbase", num(p.wheelbase));
                push("vehicle.v_desired", num(p.v_desired));
                push("lane.k_eta", num(p.k_eta));
                push("lane.k_theta", num(p.k_theta));
                push("lane.k_v", num(p.k_v));
                push("obstacle.xi", num(p.obstacle_xi));
                push("obstacle.eta", num(p.obstacle_eta));
                push("obstacle.radius", num(p.obstacle_radius));
                push("virtual.v_desired", num(p.v_virtual));
                push("virtual.alpha", num(p.alpha_virtual));
                push("virtual.sigma", num(p.sigma));
                push("cbf.alpha", num(p.alpha));
                push("cbf.alpha_inner", opt(p.alpha_inner));
                push("cbf.gamma", nums(&p.gamma));
                push("cbf.mu", num(p.mu));
                push("cbf.epsilon", num(p.epsilon));
            }
        }
        push("scan.axes", self.scan.axes.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
        push(
            "scan.resolution",
            self.scan.resolution.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","),
        );
        let window: Vec<f64> = self.scan.window.iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
        push("scan.window", nums(&window));
        if let Some(path) = &self.output {
            push("output.path", path.display().to_string());
        }
        push("output.svg", self.svg.to_string());
        out
    }

    /// Serializes to configuration text that parses back to `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Splits configuration text into ordered assignments.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::general(format!("line {}: expected `key = value`", lineno + 1)))?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Splits a `--set key=value` argument.
pub fn parse_assignment(arg: &str) -> Result<(String, String), ConfigError> {
    let (key, value) = arg
        .split_once('=')
        .ok_or_else(|| ConfigError::general(format!("expected key=value, got `{arg}`")))?;
    Ok((key.trim().to_string(), value.trim().to_string()))
}

fn set_pendulum(p: &mut PendulumParams, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "cbf.alpha" => p.alpha = positive(key, value)?,
        "cbf.alpha_inner" => p.alpha_inner = optional_positive(key, value)?,
        "cbf.gamma" => p.gamma = positive(key, value)?,
        "cbf.epsilon" => p.epsilon = non_negative(key, value)?,
        "cbf.k" => p.k = positive(key, value)?,
        "cbf.mu" => {
            let mu = positive(key, value)?;
            p.mu_backstepping = mu;
            p.mu_abc = mu;
            p.mu_recbf = mu;
        }
        "cbf.mu_backstepping" => p.mu_backstepping = positive(key, value)?,
        "cbf.mu_abc" => p.mu_abc = positive(key, value)?,
        "cbf.mu_recbf" => p.mu_recbf = positive(key, value)?,
        _ => return Err(unknown(key, "pendulum")),
    }
    Ok(())
}

fn set_bicycle(p: &mut BicycleParams, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "vehicle.wheelbase" => p.wheelbase = positive(key, value)?,
        "vehicle.v_desired" => p.v_desired = finite(key, value)?,
        "lane.k_eta" => p.k_eta = non_negative(key, value)?,
        "lane.k_theta" => p.k_theta = non_negative(key, value)?,
        "lane.k_v" => p.k_v = non_negative(key, value)?,
        "obstacle.xi" => p.obstacle_xi = finite(key, value)?,
        "obstacle.eta" => p.obstacle_eta = finite(key, value)?,
        "obstacle.radius" => p.obstacle_radius = positive(key, value)?,
        "virtual.v_desired" => p.v_virtual = finite(key, value)?,
        "virtual.alpha" => p.alpha_virtual = positive(key, value)?,
        "virtual.sigma" => p.sigma = positive(key, value)?,
        "cbf.alpha" => p.alpha = positive(key, value)?,
        "cbf.alpha_inner" => p.alpha_inner = optional_positive(key, value)?,
        "cbf.gamma" => {
            let g = floats(key, value)?;
            if g.len() != 2 || g.iter().any(|&v| !(v > 0.0)) {
                return Err(ConfigError::at(key, "expected two positive weights"));
            }
            p.gamma = [g[0], g[1]];
        }
        "cbf.mu" => p.mu = positive(key, value)?,
        "cbf.epsilon" => p.epsilon = non_negative(key, value)?,
        _ => return Err(unknown(key, "bicycle")),
    }
    Ok(())
}

fn unknown(key: &str, scenario: &str) -> ConfigError {
    ConfigError { key: Some(key.to_string()), message: format!("unknown key `{key}` for the {scenario} scenario") }
}

fn finite(key: &str, value: &str) -> Result<f64, ConfigError> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConfigError::at(key, format!("expected a finite number, got `{value}`"))),
    }
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = finite(key, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be positive, got {value}")))
    }
}

fn non_negative(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = finite(key, value)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be non-negative, got {value}")))
    }
}

fn optional_positive(key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value == "none" {
        Ok(None)
    } else {
        positive(key, value).map(Some)
    }
}

fn floats(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value.split(',').map(|v| finite(key, v.trim())).collect()
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(ConfigError::at(key, format!("expected true or false, got `{value}`"))),
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn nums(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "none".to_string())
}
