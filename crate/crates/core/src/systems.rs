//! Inverted pendulum and kinematic bicycle plants with their default
//! parameter sets.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::analysis::{GridAxis, GridSpec};
use crate::autodiff::Dual;
use crate::cbf::{CbfInstance, CbfKind, CbfTag};
use crate::filter::{DesiredController, LambdaKind, SafetyFilterSpec, VirtualController};
use crate::model::{ActivationTheta, ClassKappaE, ConstraintFn, ControlAffineSystem, Plant, RelDeg2Output};
use crate::Error;

/// Pendulum `(φ̇, ω̇) = (ω, sin φ + u)`, angle measured from upright.
pub fn pendulum_dynamics(x: &[f64], u: f64) -> [f64; 2] {
    [x[1], x[0].sin() + u]
}

/// Kinematic bicycle `(v cos θ, v sin θ, v u₁ / L, u₂)`.
pub fn bicycle_dynamics(x: &[f64], u: &[f64], wheelbase: f64) -> [f64; 4] {
    let (s, c) = x[2].sin_cos();
    [x[3] * c, x[3] * s, x[3] * u[0] / wheelbase, u[1]]
}

/// `ψ(φ) = π²/4 − φ²`.
pub fn pendulum_constraint(phi: f64) -> f64 {
    PI * PI / 4.0 - phi * phi
}

/// `ψ(ξ, η) = (ξ − ξ_O)² + (η − η_O)² − R_O²`.
pub fn bicycle_constraint(y: &[f64], p: &BicycleParams) -> f64 {
    (y[0] - p.obstacle_xi).powi(2) + (y[1] - p.obstacle_eta).powi(2) - p.obstacle_radius.powi(2)
}

/// Lane-keeping controller `(−K_η η − K_θ sin θ, K_v (v_d − v))`.
pub fn lane_keeping_desired(x: &[f64], p: &BicycleParams) -> [f64; 2] {
    [-p.k_eta * x[1] - p.k_theta * x[2].sin(), p.k_v * (p.v_desired - x[3])]
}

/// Keeps the pendulum above the horizontal.
#[derive(Debug, Clone, Copy, Default)]
pub struct PendulumConstraint;

impl ConstraintFn for PendulumConstraint {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, y: &[Dual]) -> Dual {
        PI * PI / 4.0 - y[0].square()
    }
    fn gradient(&self, y: &[Dual]) -> Vec<Dual> {
        vec![y[0] * -2.0]
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Pendulum;

impl ControlAffineSystem for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[Dual]) -> Vec<Dual> {
        vec![x[1], x[0].sin()]
    }
    fn input_matrix(&self, _x: &[Dual]) -> Vec<Vec<Dual>> {
        vec![vec![Dual::constant(0.0)], vec![Dual::constant(1.0)]]
    }
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        pendulum_dynamics(x, u[0]).to_vec()
    }
}

impl RelDeg2Output for Pendulum {
    fn output_dim(&self) -> usize {
        1
    }
    fn output(&self, x: &[Dual]) -> Vec<Dual> {
        vec![x[0]]
    }
    fn output_rate(&self, x: &[Dual]) -> Vec<Dual> {
        vec![x[1]]
    }
    fn constraint(&self) -> &dyn ConstraintFn {
        &PendulumConstraint
    }
    fn in_extended_set(&self, _x: &[f64]) -> bool {
        true
    }
}

/// Pendulum parameters; defaults reproduce the comparison study.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    /// Linear class-K gain α_c used by the filter [1/s].
    pub alpha: f64,
    /// Inner class-K gain of the high-order and rectified CBFs; `None` reuses `alpha`.
    pub alpha_inner: Option<f64>,
    /// Input weight Γ.
    pub gamma: f64,
    /// Rectified CBF offset ε [1/s].
    pub epsilon: f64,
    /// Virtual controller gain K in κ(φ) = −Kφ [1/s].
    pub k: f64,
    pub mu_backstepping: f64,
    pub mu_abc: f64,
    /// Not given for the rectified CBF in the original study; matches the ABC value.
    pub mu_recbf: f64,
    pub x0: [f64; 2],
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            alpha: 1.0,
            alpha_inner: None,
            gamma: 1.0,
            epsilon: 2.0,
            k: 0.75,
            mu_backstepping: 1.5,
            mu_abc: 5.0,
            mu_recbf: 5.0,
            x0: [-1.2, 2.4],
        }
    }
}

/// Circular obstacle constraint in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleObstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl From<&BicycleParams> for CircleObstacle {
    fn from(p: &BicycleParams) -> Self {
        CircleObstacle {
            center: [p.obstacle_xi, p.obstacle_eta],
            radius: p.obstacle_radius,
        }
    }
}

impl ConstraintFn for CircleObstacle {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, y: &[Dual]) -> Dual {
        (y[0] - self.center[0]).square() + (y[1] - self.center[1]).square() - self.radius * self.radius
    }
    fn gradient(&self, y: &[Dual]) -> Vec<Dual> {
        vec![(y[0] - self.center[0]) * 2.0, (y[1] - self.center[1]) * 2.0]
    }
}

/// Vehicle parameters; defaults are the obstacle-avoidance study values.
#[derive(Debug, Clone, PartialEq)]
pub struct BicycleParams {
    /// Wheelbase L [m].
    pub wheelbase: f64,
    /// Lane-keeping target speed v_d [m/s].
    pub v_desired: f64,
    /// Virtual controller cruise speed v̂_d [m/s].
    pub v_virtual: f64,
    pub obstacle_xi: f64,
    pub obstacle_eta: f64,
    pub obstacle_radius: f64,
    /// [1/(m s)]
    pub k_eta: f64,
    /// [1/s]
    pub k_theta: f64,
    /// [1/s]
    pub k_v: f64,
    pub gamma: [f64; 2],
    /// Class-K gain α̂_c of the virtual controller [1/s].
    pub alpha_virtual: f64,
    /// Half-Sontag smoothing σ of the virtual controller [1/s²].
    pub sigma: f64,
    /// [m²/s²]
    pub mu: f64,
    /// Filter class-K gain α_c [1/s].
    pub alpha: f64,
    /// Inner class-K gain for the high-order and rectified CBFs; `None` reuses `alpha`.
    pub alpha_inner: Option<f64>,
    /// Rectified CBF offset ε; not part of the original vehicle study.
    pub epsilon: f64,
    pub x0: [f64; 4],
}

impl Default for BicycleParams {
    fn default() -> Self {
        BicycleParams {
            wheelbase: 2.5,
            v_desired: 10.0,
            v_virtual: 4.0,
            obstacle_xi: 20.0,
            obstacle_eta: -0.1,
            obstacle_radius: 4.0,
            k_eta: 0.4,
            k_theta: 1.75,
            k_v: 0.3,
            gamma: [1.0, 0.15],
            alpha_virtual: 1.0,
            sigma: 0.001,
            mu: 1.0,
            alpha: 5.0,
            alpha_inner: None,
            epsilon: 1.0,
            x0: [0.0, 0.0, 0.0, 5.0],
        }
    }
}

impl BicycleParams {
    pub fn virtual_controller(&self) -> Result<VirtualController, Error> {
        VirtualController::smooth_filter(
            vec![self.v_virtual, 0.0],
            ClassKappaE::linear(self.alpha_virtual)?,
            self.sigma,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bicycle {
    params: BicycleParams,
    obstacle: CircleObstacle,
}

impl Bicycle {
    pub fn new(params: BicycleParams) -> Self {
        let obstacle = CircleObstacle::from(&params);
        Bicycle { params, obstacle }
    }

    pub fn params(&self) -> &BicycleParams {
        &self.params
    }
}

impl ControlAffineSystem for Bicycle {
    fn state_dim(&self) -> usize {
        4
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[Dual]) -> Vec<Dual> {
        vec![x[3] * x[2].cos(), x[3] * x[2].sin(), Dual::constant(0.0), Dual::constant(0.0)]
    }
    fn input_matrix(&self, x: &[Dual]) -> Vec<Vec<Dual>> {
        let zero = Dual::constant(0.0);
        vec![
            vec![zero, zero],
            vec![zero, zero],
            vec![x[3] / self.params.wheelbase, zero],
            vec![zero, Dual::constant(1.0)],
        ]
    }
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        bicycle_dynamics(x, u, self.params.wheelbase).to_vec()
    }
}

impl RelDeg2Output for Bicycle {
    fn output_dim(&self) -> usize {
        2
    }
    fn output(&self, x: &[Dual]) -> Vec<Dual> {
        vec![x[0], x[1]]
    }
    fn output_rate(&self, x: &[Dual]) -> Vec<Dual> {
        vec![x[3] * x[2].cos(), x[3] * x[2].sin()]
    }
    fn constraint(&self) -> &dyn ConstraintFn {
        &self.obstacle
    }
    fn in_extended_set(&self, x: &[f64]) -> bool {
        !(x[0] == self.obstacle.center[0] && x[1] == self.obstacle.center[1])
    }
}

/// One of the two bundled case studies.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Pendulum(PendulumParams),
    Bicycle(BicycleParams),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Pendulum(_) => "pendulum",
            Scenario::Bicycle(_) => "bicycle",
        }
    }

    pub fn plant(&self) -> Arc<dyn Plant> {
        match self {
            Scenario::Pendulum(_) => Arc::new(Pendulum),
            Scenario::Bicycle(p) => Arc::new(Bicycle::new(p.clone())),
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        match self {
            Scenario::Pendulum(p) => p.x0.to_vec(),
            Scenario::Bicycle(p) => p.x0.to_vec(),
        }
    }

    /// Builds the requested construction with this scenario's parameters.
    pub fn cbf(&self, tag: CbfTag) -> Result<CbfInstance, Error> {
        match self {
            Scenario::Pendulum(p) => {
                let inner = ClassKappaE::linear(p.alpha_inner.unwrap_or(p.alpha))?;
                let kappa = VirtualController::linear(p.k, 1);
                let kind = match tag {
                    CbfTag::Hocbf => CbfKind::HighOrder { alpha: inner },
                    CbfTag::Recbf => CbfKind::Rectified {
                        alpha: inner,
                        theta: ActivationTheta::new(p.mu_recbf)?,
                        epsilon: p.epsilon,
                    },
                    CbfTag::Backstepping => CbfKind::Backstepping { mu: p.mu_backstepping, kappa },
                    CbfTag::Abc => CbfKind::Activated {
                        theta: ActivationTheta::new(p.mu_abc)?,
                        kappa,
                    },
                };
                CbfInstance::new(Arc::new(Pendulum), kind)
            }
            Scenario::Bicycle(p) => {
                let inner = ClassKappaE::linear(p.alpha_inner.unwrap_or(p.alpha))?;
                let kind = match tag {
                    CbfTag::Hocbf => CbfKind::HighOrder { alpha: inner },
                    CbfTag::Recbf => CbfKind::Rectified {
                        alpha: inner,
                        theta: ActivationTheta::new(p.mu)?,
                        epsilon: p.epsilon,
                    },
                    CbfTag::Backstepping => CbfKind::Backstepping {
                        mu: p.mu,
                        kappa: p.virtual_controller()?,
                    },
                    CbfTag::Abc => CbfKind::Activated {
                        theta: ActivationTheta::new(p.mu)?,
                        kappa: p.virtual_controller()?,
                    },
                };
                CbfInstance::new(Arc::new(Bicycle::new(p.clone())), kind)
            }
        }
    }

    /// Exact-multiplier filter around the scenario's desired controller.
    pub fn filter_spec(&self) -> Result<SafetyFilterSpec, Error> {
        match self {
            Scenario::Pendulum(p) => SafetyFilterSpec::new(
                Arc::new(|_: &[f64]| vec![0.0]),
                vec![p.gamma],
                LambdaKind::Exact,
                ClassKappaE::linear(p.alpha)?,
            ),
            Scenario::Bicycle(p) => {
                let params = p.clone();
                let desired: DesiredController = Arc::new(move |x: &[f64]| lane_keeping_desired(x, &params).to_vec());
                SafetyFilterSpec::new(desired, p.gamma.to_vec(), LambdaKind::Exact, ClassKappaE::linear(p.alpha)?)
            }
        }
    }

    /// Default phase-space window for scans.
    pub fn default_grid(&self, resolution: usize) -> GridSpec {
        match self {
            Scenario::Pendulum(_) => GridSpec::pendulum_window(resolution),
            Scenario::Bicycle(p) => GridSpec {
                base: p.x0.to_vec(),
                axes: vec![
                    GridAxis { index: 0, lo: 0.0, hi: 40.0, count: resolution },
                    GridAxis { index: 1, lo: -10.0, hi: 10.0, count: resolution },
                ],
            },
        }
    }
}
