//! Closed-form safety filter and smooth virtual controllers.
//!
//! For a single barrier constraint the filter
//!
//! ```text
//! k(x) = argmin ‖u − k_d(x)‖²_Γ  s.t.  L_f h + L_g h u ≥ −α(h)
//! ```
//!
//! has the explicit solution `k = k_d + λ(a, ‖b‖²_Γ) b` with
//! `a = L_f h + L_g h k_d + α(h)` and `b = Γ⁻¹ L_g hᵀ`. [`lambda_exact`]
//! gives the QP multiplier, [`lambda_half_sontag`] a smooth
//! over-approximation of it.

use std::fmt;
use std::sync::Arc;

use crate::autodiff::{dot, Dual};
use crate::cbf::CbfInstance;
use crate::model::{ClassKappaE, ConstraintFn, ControlAffineSystem, LieDerivatives};
use crate::Error;

/// Multiplier of the exact QP solution.
pub fn lambda_exact(a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        0.0
    } else {
        (-a / b).max(0.0)
    }
}

/// Half-Sontag multiplier `(−a + √(a² + σb²)) / (2b)`, 0 for `b = 0`.
///
/// For `a > 0` the algebraically equal form `σb / (2(a + √(a² + σb²)))` is
/// used to avoid cancellation.
pub fn lambda_half_sontag(a: f64, b: f64, sigma: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let root = (a * a + sigma * b * b).sqrt();
    if a > 0.0 {
        sigma * b / (2.0 * (a + root))
    } else {
        (root - a) / (2.0 * b)
    }
}

/// Traceable version of [`lambda_half_sontag`].
pub fn lambda_half_sontag_dual(a: Dual, b: Dual, sigma: f64) -> Dual {
    if b.value() == 0.0 {
        return Dual::constant(0.0);
    }
    let root = (a * a + b * b * sigma).sqrt();
    if a.value() > 0.0 {
        b * sigma / ((a + root) * 2.0)
    } else {
        (root - a) / (b * 2.0)
    }
}

/// Which multiplier the filter uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaKind {
    Exact,
    HalfSontag { sigma: f64 },
}

impl LambdaKind {
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match *self {
            LambdaKind::Exact => lambda_exact(a, b),
            LambdaKind::HalfSontag { sigma } => lambda_half_sontag(a, b, sigma),
        }
    }
}

/// Smooth safe controller for the single integrator `ẏ = κ(y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum VirtualController {
    /// `κ(y) = −K y`, componentwise.
    LinearGain { gain: f64, dim: usize },
    /// Half-Sontag filtered constant velocity `κ_d`, unit weights.
    SmoothFilter {
        desired: Vec<f64>,
        alpha: ClassKappaE,
        sigma: f64,
    },
}

/// `‖∂ψ/∂y‖` below which `y` counts as a critical point of `ψ`.
pub const CRITICAL_GRADIENT_TOL: f64 = 1e-10;

impl VirtualController {
    pub fn linear(gain: f64, dim: usize) -> Self {
        VirtualController::LinearGain { gain, dim }
    }

    pub fn smooth_filter(desired: Vec<f64>, alpha: ClassKappaE, sigma: f64) -> Result<Self, Error> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(VirtualController::SmoothFilter { desired, alpha, sigma })
    }

    pub fn output_dim(&self) -> usize {
        match self {
            VirtualController::LinearGain { dim, .. } => *dim,
            VirtualController::SmoothFilter { desired, .. } => desired.len(),
        }
    }

    /// Traceable `κ(y)`.
    pub fn eval(&self, psi: &dyn ConstraintFn, y: &[Dual]) -> Result<Vec<Dual>, Error> {
        match self {
            VirtualController::LinearGain { gain, .. } => Ok(y.iter().map(|&v| v * -*gain).collect()),
            VirtualController::SmoothFilter { desired, alpha, sigma } => {
                let b = psi.gradient(y);
                let kd: Vec<Dual> = desired.iter().copied().map(Dual::constant).collect();
                let a = dot(&b, &kd) + alpha.apply_dual(psi.value(y));
                let bb = dot(&b, &b);
                if bb.value().sqrt() < CRITICAL_GRADIENT_TOL {
                    if a.value() < 0.0 {
                        return Err(Error::SingularVirtualController(y.iter().map(Dual::value).collect()));
                    }
                    return Ok(kd);
                }
                let lambda = lambda_half_sontag_dual(a, bb, *sigma);
                Ok(kd.iter().zip(&b).map(|(k, b)| *k + lambda * *b).collect())
            }
        }
    }

    /// `κ(y)` on plain floats.
    pub fn value(&self, psi: &dyn ConstraintFn, y: &[f64]) -> Result<Vec<f64>, Error> {
        let yd = crate::autodiff::constants(y);
        Ok(self.eval(psi, &yd)?.iter().map(Dual::value).collect())
    }
}

/// Desired controller `k_d: R^n -> R^m`.
pub type DesiredController = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Everything the safety filter needs besides the barrier and the plant.
#[derive(Clone)]
pub struct SafetyFilterSpec {
    desired: DesiredController,
    gamma: Vec<f64>,
    lambda: LambdaKind,
    alpha: ClassKappaE,
}

impl fmt::Debug for SafetyFilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SafetyFilterSpec")
            .field("gamma", &self.gamma)
            .field("lambda", &self.lambda)
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

/// One filter evaluation with its intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    pub u: Vec<f64>,
    pub desired: Vec<f64>,
    pub a: f64,
    pub b: Vec<f64>,
    pub b_norm_sq: f64,
    pub lambda: f64,
    pub lie: LieDerivatives,
}

impl SafetyFilterSpec {
    pub fn new(
        desired: DesiredController,
        gamma: Vec<f64>,
        lambda: LambdaKind,
        alpha: ClassKappaE,
    ) -> Result<Self, Error> {
        if gamma.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidParameter(format!("input weights must be positive, got {gamma:?}")));
        }
        if let LambdaKind::HalfSontag { sigma } = lambda {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
            }
        }
        Ok(SafetyFilterSpec { desired, gamma, lambda, alpha })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn lambda_kind(&self) -> LambdaKind {
        self.lambda
    }

    pub fn alpha(&self) -> ClassKappaE {
        self.alpha
    }

    pub fn desired(&self, x: &[f64]) -> Vec<f64> {
        (self.desired)(x)
    }

    pub fn with_desired(&self, desired: DesiredController) -> Self {
        SafetyFilterSpec { desired, ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: LambdaKind) -> Self {
        SafetyFilterSpec { lambda, ..self.clone() }
    }

    /// Weighted squared norm `‖v‖²_Γ`.
    pub fn weighted_norm_sq(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.gamma).map(|(v, g)| g * v * v).sum()
    }

    /// Filters `k_d(x)` given precomputed Lie derivatives of `h`.
    pub fn apply_with(&self, x: &[f64], lie: LieDerivatives) -> FilterStep {
        let desired = self.desired(x);
        let hdot_desired = lie.lf + lie.lg.iter().zip(&desired).map(|(l, k)| l * k).sum::<f64>();
        let a = hdot_desired + self.alpha.apply(lie.value);
        let b: Vec<f64> = lie.lg.iter().zip(&self.gamma).map(|(l, g)| l / g).collect();
        let b_norm_sq = self.weighted_norm_sq(&b);
        let lambda = self.lambda.eval(a, b_norm_sq);
        let u = if lambda == 0.0 {
            desired.clone()
        } else {
            desired.iter().zip(&b).map(|(k, b)| k + lambda * b).collect()
        };
        FilterStep { u, desired, a, b, b_norm_sq, lambda, lie }
    }

    pub fn apply(&self, cbf: &CbfInstance, sys: &dyn ControlAffineSystem, x: &[f64]) -> Result<FilterStep, Error> {
        let lie = cbf.lie(sys, x)?;
        Ok(self.apply_with(x, lie))
    }
}

/// Safe input `k(x) = k_d(x) + λ(a, ‖b‖²_Γ) b`.
pub fn safety_filter(
    spec: &SafetyFilterSpec,
    cbf: &CbfInstance,
    sys: &dyn ControlAffineSystem,
    x: &[f64],
) -> Result<Vec<f64>, Error> {
    spec.apply(cbf, sys, x).map(|s| s.u)
}

/// `κ(y)` for the given constraint.
pub fn virtual_kappa(vc: &VirtualController, psi: &dyn ConstraintFn, y: &[f64]) -> Result<Vec<f64>, Error> {
    vc.value(psi, y)
}
