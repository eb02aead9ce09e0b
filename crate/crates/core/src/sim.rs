//! Fixed-step closed-loop simulation with per-step logging.
//!
//! The controller is evaluated once per step and held over the whole RK4
//! step (zero-order hold), so logged inputs are piecewise constant and the
//! step-to-step input change is well defined.

use rayon::prelude::*;

use crate::cbf::CbfInstance;
use crate::filter::SafetyFilterSpec;
use crate::model::ControlAffineSystem;
use crate::Error;

/// A stage of an RK4 step produced a non-finite derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteStage {
    pub stage: usize,
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(derivative: F, x: &[f64], dt: f64) -> Result<Vec<f64>, NonFiniteStage>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let check = |k: Vec<f64>, stage| {
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(NonFiniteStage { stage })
        }
    };
    let offset = |k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + h * k).collect() };
    let k1 = check(derivative(x), 1)?;
    let k2 = check(derivative(&offset(&k1, 0.5 * dt)), 2)?;
    let k3 = check(derivative(&offset(&k2, 0.5 * dt)), 3)?;
    let k4 = check(derivative(&offset(&k3, dt)), 4)?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Any `|u_i|` above this truncates the run as a blow-up.
    pub blowup_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_final: 10.0,
            dt: 1e-3,
            blowup_threshold: 1e3,
        }
    }
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64) -> Self {
        SimConfig { t_final, dt, ..Default::default() }
    }

    /// Number of integration steps, `floor(T / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt * (1.0 + 1e-12)).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub h: f64,
    pub psi: f64,
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitReason {
    Completed,
    BlewUp { t: f64 },
    LeftDomain { t: f64 },
}

impl ExitReason {
    pub fn truncated(&self) -> bool {
        !matches!(self, ExitReason::Completed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub rows: Vec<TrajectoryRow>,
    pub exit: ExitReason,
}

/// Runs the filtered closed loop from `x0`.
pub fn simulate(
    sys: &dyn ControlAffineSystem,
    cbf: &CbfInstance,
    filter: &SafetyFilterSpec,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Trajectory, Error> {
    if !(cfg.dt > 0.0 && cfg.t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and T > 0, got dt = {} and T = {}",
            cfg.dt, cfg.t_final
        )));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::InvalidParameter(format!(
            "initial state has {} components, system has {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    let steps = cfg.steps();
    let mut rows = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut exit = ExitReason::Completed;
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let step = match filter.apply(cbf, sys, &x) {
            Ok(step) => step,
            Err(e @ (Error::OutsideDomain(_) | Error::SingularVirtualController(_) | Error::Ad(_))) => {
                if k == 0 {
                    return Err(e);
                }
                exit = ExitReason::LeftDomain { t };
                break;
            }
            Err(e) => return Err(e),
        };
        let s = cbf.switching(&x)?;
        let blew_up = step.u.iter().any(|u| !(u.abs() <= cfg.blowup_threshold));
        rows.push(TrajectoryRow {
            t,
            psi: cbf.psi(&x),
            h: step.lie.value,
            s,
            u: step.u.clone(),
            x: x.clone(),
        });
        if blew_up {
            exit = ExitReason::BlewUp { t };
            break;
        }
        if k == steps {
            break;
        }
        let u = step.u;
        x = rk4_step(|x| sys.dynamics(x, &u), &x, cfg.dt).map_err(|_| Error::NonFinite { t })?;
    }
    Ok(Trajectory { dt: cfg.dt, rows, exit })
}

/// Independent runs from many initial states, in input order.
pub fn simulate_batch(
    sys: &dyn ControlAffineSystem,
    cbf: &CbfInstance,
    filter: &SafetyFilterSpec,
    initial_states: &[Vec<f64>],
    cfg: &SimConfig,
) -> Vec<Result<Trajectory, Error>> {
    initial_states
        .par_iter()
        .map(|x0| simulate(sys, cbf, filter, x0, cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyMetrics {
    pub min_h: f64,
    pub min_psi: f64,
    pub max_abs_u: Vec<f64>,
    pub max_step_delta_u: Vec<f64>,
    pub blew_up: bool,
    pub exit: ExitReason,
    pub final_state: Vec<f64>,
    pub final_time: f64,
}

/// Summary statistics of a trajectory. Panics on an empty trajectory.
pub fn compute_metrics(traj: &Trajectory) -> SafetyMetrics {
    assert!(!traj.rows.is_empty(), "metrics of an empty trajectory");
    let m = traj.rows[0].u.len();
    let mut min_h = f64::INFINITY;
    let mut min_psi = f64::INFINITY;
    let mut max_abs_u = vec![0.0f64; m];
    let mut max_step_delta_u = vec![0.0f64; m];
    for (i, row) in traj.rows.iter().enumerate() {
        min_h = min_h.min(row.h);
        min_psi = min_psi.min(row.psi);
        for j in 0..m {
            max_abs_u[j] = max_abs_u[j].max(row.u[j].abs());
            if i > 0 {
                let d = (row.u[j] - traj.rows[i - 1].u[j]).abs();
                max_step_delta_u[j] = max_step_delta_u[j].max(d);
            }
        }
    }
    let last = traj.rows.last().unwrap();
    SafetyMetrics {
        min_h,
        min_psi,
        max_abs_u,
        max_step_delta_u,
        blew_up: matches!(traj.exit, ExitReason::BlewUp { .. }),
        exit: traj.exit,
        final_state: last.x.clone(),
        final_time: last.t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbf::CbfTag;
    use crate::systems::{Pendulum, PendulumParams, Scenario};

    fn row(t: f64, u: f64) -> TrajectoryRow {
        TrajectoryRow { t, x: vec![0.0], u: vec![u], h: 1.0, psi: 1.0, s: None }
    }

    #[test]
    fn rk4_exponential_decay() {
        let x = rk4_step(|x| vec![-x[0]], &[1.0], 0.1).unwrap();
        assert!((x[0] - 0.9048375).abs() < 1e-7);
    }

    #[test]
    fn rk4_zero_field() {
        let x = rk4_step(|x| vec![0.0; x.len()], &[1.5, -2.0], 0.3).unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn rk4_reports_non_finite_stage() {
        let err = rk4_step(|x| vec![1.0 / (x[0] - 1.0)], &[1.0], 0.1).unwrap_err();
        assert_eq!(err.stage, 1);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let exact = (-1.0f64).exp();
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut x = vec![1.0];
            for _ in 0..n {
                x = rk4_step(|x| vec![-x[0]], &x, dt).unwrap();
            }
            (x[0] - exact).abs()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn metrics_constant_and_jump() {
        let t = Trajectory { dt: 1.0, rows: vec![row(0.0, 2.0), row(1.0, 2.0), row(2.0, 2.0)], exit: ExitReason::Completed };
        assert_eq!(compute_metrics(&t).max_step_delta_u, vec![0.0]);
        let t = Trajectory { dt: 1.0, rows: vec![row(0.0, 0.0), row(1.0, 5.0)], exit: ExitReason::Completed };
        let m = compute_metrics(&t);
        assert_eq!(m.max_step_delta_u, vec![5.0]);
        assert_eq!(m.max_abs_u, vec![5.0]);
        assert!(!m.blew_up);
    }

    #[test]
    fn row_count_and_uniform_time() {
        let sc = Scenario::Pendulum(PendulumParams::default());
        let cbf = sc.cbf(CbfTag::Abc).unwrap();
        let spec = sc.filter_spec().unwrap();
        let cfg = SimConfig::new(0.5, 1e-3);
        let tr = simulate(&Pendulum, &cbf, &spec, &[0.2, -0.1], &cfg).unwrap();
        assert_eq!(tr.rows.len(), 501);
        for (k, r) in tr.rows.iter().enumerate() {
            assert_eq!(r.t, k as f64 * 1e-3);
        }
        assert_eq!(tr.exit, ExitReason::Completed);
    }

    #[test]
    fn inactive_filter_leaves_zero_input() {
        let sc = Scenario::Pendulum(PendulumParams::default());
        let cbf = sc.cbf(CbfTag::Abc).unwrap();
        let spec = sc.filter_spec().unwrap();
        // moving toward upright from the left, deep inside S
        let tr = simulate(&Pendulum, &cbf, &spec, &[-0.5, 0.6], &SimConfig::new(0.2, 1e-3)).unwrap();
        assert!(tr.rows.iter().all(|r| r.u == vec![0.0]));
    }

    #[test]
    fn rejects_bad_config() {
        let sc = Scenario::Pendulum(PendulumParams::default());
        let cbf = sc.cbf(CbfTag::Abc).unwrap();
        let spec = sc.filter_spec().unwrap();
        assert!(simulate(&Pendulum, &cbf, &spec, &[0.0, 0.0], &SimConfig::new(1.0, 0.0)).is_err());
        assert!(simulate(&Pendulum, &cbf, &spec, &[0.0], &SimConfig::new(1.0, 0.1)).is_err());
    }
}
