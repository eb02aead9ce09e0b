//! Control-affine systems, relative-degree-two outputs, class-K functions,
//! activations and Lie-derivative helpers.

use nalgebra::DMatrix;

use crate::autodiff::{constants, dot, try_value_and_grad, AdError, Dual};
use crate::Error;

/// `ẋ = f(x) + g(x) u`, with `f` and `g` traceable by [`Dual`].
pub trait ControlAffineSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// Drift `f(x)`, length `n`.
    fn drift(&self, x: &[Dual]) -> Vec<Dual>;

    /// Input matrix `g(x)` as `n` rows of length `m`.
    fn input_matrix(&self, x: &[Dual]) -> Vec<Vec<Dual>>;

    /// `f(x) + g(x) u` on plain floats.
    fn dynamics(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let xd = constants(x);
        let f = self.drift(&xd);
        let g = self.input_matrix(&xd);
        f.iter()
            .zip(&g)
            .map(|(fi, row)| fi.value() + row.iter().zip(u).map(|(g, u)| g.value() * u).sum::<f64>())
            .collect()
    }
}

/// Constraint function `ψ: R^p -> R` together with its gradient.
///
/// The gradient is supplied in closed form so that quantities built from it
/// (`ψ̇`, the switching function, the smooth virtual controller) stay
/// first-order traceable.
pub trait ConstraintFn: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[Dual]) -> Dual;
    fn gradient(&self, y: &[Dual]) -> Vec<Dual>;
}

/// Output map `y(x)` of relative degree two with its constraint function.
pub trait RelDeg2Output: Send + Sync {
    fn output_dim(&self) -> usize;

    /// `y(x)`.
    fn output(&self, x: &[Dual]) -> Vec<Dual>;

    /// `ẏ(x) = L_f y(x)`, supplied in closed form.
    fn output_rate(&self, x: &[Dual]) -> Vec<Dual>;

    fn constraint(&self) -> &dyn ConstraintFn;

    /// Membership in the extended set `E` on which the constructions are defined.
    fn in_extended_set(&self, x: &[f64]) -> bool;

    /// `ψ(y(x))`.
    fn psi(&self, x: &[Dual]) -> Dual {
        self.constraint().value(&self.output(x))
    }

    /// `ψ̇(y(x), v) = ∂ψ/∂y(y(x)) · v`.
    fn psi_rate_along(&self, x: &[Dual], v: &[Dual]) -> Dual {
        dot(&self.constraint().gradient(&self.output(x)), v)
    }

    /// `ψ̇(y(x), ẏ(x))`.
    fn psi_rate(&self, x: &[Dual]) -> Dual {
        self.psi_rate_along(x, &self.output_rate(x))
    }
}

/// A system together with its safety output.
pub trait Plant: ControlAffineSystem + RelDeg2Output {}

impl<T: ControlAffineSystem + RelDeg2Output> Plant for T {}

/// Linear extended class-K function `α(r) = c·r` with `c > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassKappaE {
    gain: f64,
}

impl ClassKappaE {
    pub fn linear(gain: f64) -> Result<Self, Error> {
        if gain > 0.0 && gain.is_finite() {
            Ok(ClassKappaE { gain })
        } else {
            Err(Error::InvalidParameter(format!(
                "class-K gain must be positive, got {gain}"
            )))
        }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    #[inline]
    pub fn apply(&self, r: f64) -> f64 {
        self.gain * r
    }

    #[inline]
    pub fn apply_dual(&self, r: Dual) -> Dual {
        r * self.gain
    }
}

/// Rectified activation `Θ(s) = ReQU(s) / (2μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationTheta {
    mu: f64,
}

impl ActivationTheta {
    pub fn new(mu: f64) -> Result<Self, Error> {
        if mu > 0.0 && mu.is_finite() {
            Ok(ActivationTheta { mu })
        } else {
            Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")))
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn apply(&self, s: f64) -> f64 {
        crate::autodiff::requ(s) / (2.0 * self.mu)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        crate::autodiff::requ_prime(s) / (2.0 * self.mu)
    }

    pub fn apply_dual(&self, s: Dual) -> Dual {
        s.requ() * (0.5 / self.mu)
    }
}

/// Value, `L_f h` and `L_g h` of a scalar field from one gradient evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LieDerivatives {
    pub value: f64,
    pub lf: f64,
    pub lg: Vec<f64>,
}

impl LieDerivatives {
    pub fn lg_norm(&self) -> f64 {
        self.lg.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `L_f h` and `L_g h` from a known gradient.
pub fn lie_from_gradient(
    sys: &dyn ControlAffineSystem,
    x: &[f64],
    value: f64,
    gradient: &[f64],
) -> LieDerivatives {
    let xd = constants(x);
    let f = sys.drift(&xd);
    let g = sys.input_matrix(&xd);
    let lf = gradient.iter().zip(&f).map(|(d, f)| d * f.value()).sum();
    let lg = (0..sys.input_dim())
        .map(|j| gradient.iter().zip(&g).map(|(d, row)| d * row[j].value()).sum())
        .collect();
    LieDerivatives { value, lf, lg }
}

/// Lie derivatives of a fallible field.
pub fn try_lie<F, E>(field: F, sys: &dyn ControlAffineSystem, x: &[f64]) -> Result<LieDerivatives, E>
where
    F: FnOnce(&[Dual]) -> Result<Dual, E>,
    E: From<AdError>,
{
    let (value, gradient) = try_value_and_grad(field, x)?;
    Ok(lie_from_gradient(sys, x, value, &gradient))
}

/// `L_f h(x) = ∂h/∂x(x) · f(x)`.
pub fn lie_f<F>(field: F, sys: &dyn ControlAffineSystem, x: &[f64]) -> Result<f64, AdError>
where
    F: FnOnce(&[Dual]) -> Dual,
{
    try_lie(|d| Ok::<_, AdError>(field(d)), sys, x).map(|l| l.lf)
}

/// `L_g h(x) = ∂h/∂x(x) · g(x)`, a row of length `m`.
pub fn lie_g<F>(field: F, sys: &dyn ControlAffineSystem, x: &[f64]) -> Result<Vec<f64>, AdError>
where
    F: FnOnce(&[Dual]) -> Dual,
{
    try_lie(|d| Ok::<_, AdError>(field(d)), sys, x).map(|l| l.lg)
}

/// Sampled relative-degree check at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeDegreeCheck {
    /// ∞-norm of `L_g y`.
    pub lgy_inf_norm: f64,
    /// Smallest singular value of `L_g L_f y` (`p × m`).
    pub lglfy_min_singular: f64,
}

impl RelativeDegreeCheck {
    pub const LGY_TOL: f64 = 1e-10;
    pub const RANK_TOL: f64 = 1e-8;

    pub fn holds(&self) -> bool {
        self.lgy_inf_norm < Self::LGY_TOL && self.lglfy_min_singular > Self::RANK_TOL
    }
}

/// Evaluates the relative-degree-two conditions at `x`.
pub fn relative_degree_check(plant: &dyn Plant, x: &[f64]) -> Result<RelativeDegreeCheck, AdError> {
    let p = plant.output_dim();
    let m = plant.input_dim();
    let mut lgy_inf: f64 = 0.0;
    let mut lglf = DMatrix::<f64>::zeros(p, m);
    for i in 0..p {
        let lgy = lie_g(|d| plant.output(d)[i], plant, x)?;
        lgy_inf = lgy.iter().fold(lgy_inf, |acc, v| acc.max(v.abs()));
        let lglfy = lie_g(|d| plant.output_rate(d)[i], plant, x)?;
        for (j, v) in lglfy.into_iter().enumerate() {
            lglf[(i, j)] = v;
        }
    }
    let min_sv = lglf
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(RelativeDegreeCheck {
        lgy_inf_norm: lgy_inf,
        lglfy_min_singular: if p == 0 { 0.0 } else { min_sv },
    })
}

/// Checks `‖∂ψ/∂y‖ < 1e-10 ⟹ ψ > 0` at `x`. Returns `true` when it holds.
pub fn constraint_critical_point_check(plant: &dyn RelDeg2Output, x: &[f64]) -> bool {
    let xd = constants(x);
    let y = plant.output(&xd);
    let grad_norm = plant
        .constraint()
        .gradient(&y)
        .iter()
        .map(|d| d.value() * d.value())
        .sum::<f64>()
        .sqrt();
    grad_norm >= 1e-10 || plant.constraint().value(&y).value() > 0.0
}
