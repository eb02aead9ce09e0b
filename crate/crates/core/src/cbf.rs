//! Candidate barrier functions built from a relative-degree-two constraint.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::analysis::GridSpec;
use crate::autodiff::{constants, dot, try_value_and_grad, Dual};
use crate::filter::VirtualController;
use crate::model::{lie_from_gradient, ActivationTheta, ClassKappaE, ControlAffineSystem, LieDerivatives, RelDeg2Output};
use crate::Error;

/// The four constructions, with the parameters each one needs.
#[derive(Debug, Clone, PartialEq)]
pub enum CbfKind {
    /// `h = ψ̇ + α(ψ)`.
    HighOrder { alpha: ClassKappaE },
    /// `h = ψ − Θ(ε − r)` with `r = ψ̇ + α(ψ)`.
    Rectified {
        alpha: ClassKappaE,
        theta: ActivationTheta,
        epsilon: f64,
    },
    /// `h = ψ − ‖ẏ − κ(y)‖² / (2μ)`.
    Backstepping { mu: f64, kappa: VirtualController },
    /// `h = ψ − Θ(−s)` with `s = ∂ψ/∂y · (ẏ − κ(y))`.
    Activated {
        theta: ActivationTheta,
        kappa: VirtualController,
    },
}

/// Parameter-free name of a construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CbfTag {
    Hocbf,
    Recbf,
    Backstepping,
    Abc,
}

impl CbfTag {
    pub const ALL: [CbfTag; 4] = [CbfTag::Hocbf, CbfTag::Recbf, CbfTag::Backstepping, CbfTag::Abc];

    pub fn as_str(&self) -> &'static str {
        match self {
            CbfTag::Hocbf => "hocbf",
            CbfTag::Recbf => "recbf",
            CbfTag::Backstepping => "backstepping",
            CbfTag::Abc => "abc",
        }
    }
}

impl fmt::Display for CbfTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CbfTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hocbf" => Ok(CbfTag::Hocbf),
            "recbf" => Ok(CbfTag::Recbf),
            "backstepping" => Ok(CbfTag::Backstepping),
            "abc" => Ok(CbfTag::Abc),
            other => Err(format!("unknown cbf kind '{other}' (expected hocbf, recbf, backstepping or abc)")),
        }
    }
}

/// A barrier function bound to a concrete output.
#[derive(Clone)]
pub struct CbfInstance {
    output: Arc<dyn RelDeg2Output>,
    kind: CbfKind,
}

impl fmt::Debug for CbfInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CbfInstance").field("kind", &self.kind).finish_non_exhaustive()
    }
}

/// `∂ψ/∂y(y(x)) · (ẏ(x) − κ(y(x)))`.
pub fn switching_function(
    output: &dyn RelDeg2Output,
    kappa: &VirtualController,
    x: &[Dual],
) -> Result<Dual, Error> {
    let y = output.output(x);
    let ydot = output.output_rate(x);
    let k = kappa.eval(output.constraint(), &y)?;
    let diff: Vec<Dual> = ydot.iter().zip(&k).map(|(a, b)| *a - *b).collect();
    Ok(dot(&output.constraint().gradient(&y), &diff))
}

impl CbfInstance {
    pub fn new(output: Arc<dyn RelDeg2Output>, kind: CbfKind) -> Result<Self, Error> {
        match &kind {
            CbfKind::Rectified { epsilon, .. } if !(*epsilon >= 0.0 && epsilon.is_finite()) => {
                return Err(Error::InvalidParameter(format!("epsilon must be non-negative, got {epsilon}")));
            }
            CbfKind::Backstepping { mu, .. } if !(*mu > 0.0 && mu.is_finite()) => {
                return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
            }
            _ => {}
        }
        if let CbfKind::Backstepping { kappa, .. } | CbfKind::Activated { kappa, .. } = &kind {
            if kappa.output_dim() != output.output_dim() {
                return Err(Error::InvalidParameter(format!(
                    "virtual controller has dimension {}, output has {}",
                    kappa.output_dim(),
                    output.output_dim()
                )));
            }
        }
        Ok(CbfInstance { output, kind })
    }

    pub fn kind(&self) -> &CbfKind {
        &self.kind
    }

    pub fn tag(&self) -> CbfTag {
        match self.kind {
            CbfKind::HighOrder { .. } => CbfTag::Hocbf,
            CbfKind::Rectified { .. } => CbfTag::Recbf,
            CbfKind::Backstepping { .. } => CbfTag::Backstepping,
            CbfKind::Activated { .. } => CbfTag::Abc,
        }
    }

    pub fn output(&self) -> &dyn RelDeg2Output {
        self.output.as_ref()
    }

    /// Whether the construction guarantees `S ⊂ C`. The high-order CBF only
    /// protects `S ∩ C`.
    pub fn guarantees_inclusion(&self) -> bool {
        !matches!(self.kind, CbfKind::HighOrder { .. })
    }

    fn check_domain(&self, x: &[f64]) -> Result<(), Error> {
        if x.iter().all(|v| v.is_finite()) && self.output.in_extended_set(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(x.to_vec()))
        }
    }

    /// Traceable evaluation of `h`; no domain check.
    pub fn eval(&self, x: &[Dual]) -> Result<Dual, Error> {
        let out = self.output.as_ref();
        let psi = out.psi(x);
        let h = match &self.kind {
            CbfKind::HighOrder { alpha } => out.psi_rate(x) + alpha.apply_dual(psi),
            CbfKind::Rectified { alpha, theta, epsilon } => {
                let r = out.psi_rate(x) + alpha.apply_dual(psi);
                psi - theta.apply_dual(*epsilon - r)
            }
            CbfKind::Backstepping { mu, kappa } => {
                let y = out.output(x);
                let k = kappa.eval(out.constraint(), &y)?;
                let penalty: Dual = out
                    .output_rate(x)
                    .iter()
                    .zip(&k)
                    .map(|(a, b)| (*a - *b).square())
                    .sum();
                psi - penalty * (0.5 / mu)
            }
            CbfKind::Activated { theta, kappa } => {
                let s = switching_function(out, kappa, x)?;
                psi - theta.apply_dual(-s)
            }
        };
        Ok(h)
    }

    /// `h(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64, Error> {
        self.check_domain(x)?;
        Ok(self.eval(&constants(x))?.checked_value()?)
    }

    /// `ψ(y(x))`.
    pub fn psi(&self, x: &[f64]) -> f64 {
        self.output.psi(&constants(x)).value()
    }

    /// Switching function `s(x)`; present only for the activated construction.
    pub fn switching(&self, x: &[f64]) -> Result<Option<f64>, Error> {
        match &self.kind {
            CbfKind::Activated { kappa, .. } => {
                self.check_domain(x)?;
                let s = switching_function(self.output.as_ref(), kappa, &constants(x))?;
                Ok(Some(s.checked_value()?))
            }
            _ => Ok(None),
        }
    }

    /// `r(x) = ψ̇ + α(ψ)` for the high-order and rectified constructions.
    pub fn hocbf_residual(&self, x: &[Dual]) -> Option<Dual> {
        match &self.kind {
            CbfKind::HighOrder { alpha } | CbfKind::Rectified { alpha, .. } => {
                Some(self.output.psi_rate(x) + alpha.apply_dual(self.output.psi(x)))
            }
            _ => None,
        }
    }

    /// `(h(x), ∇h(x))` by forward-mode AD.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), Error> {
        self.check_domain(x)?;
        try_value_and_grad(|d| self.eval(d), x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    /// `h`, `L_f h` and `L_g h` at `x` from a single gradient evaluation.
    pub fn lie(&self, sys: &dyn ControlAffineSystem, x: &[f64]) -> Result<LieDerivatives, Error> {
        let (value, gradient) = self.value_and_gradient(x)?;
        Ok(lie_from_gradient(sys, x, value, &gradient))
    }

    /// Grid states violating `L_g L_f ψ = 0 ⟹ ψ̇ + α(ψ) ≥ ε`.
    ///
    /// Returns an empty list for constructions other than the rectified CBF.
    pub fn recbf_validity_condition(
        &self,
        sys: &dyn ControlAffineSystem,
        grid: &GridSpec,
    ) -> Result<Vec<RecbfWitness>, Error> {
        let CbfKind::Rectified { alpha, epsilon, .. } = &self.kind else {
            return Ok(Vec::new());
        };
        let mut witnesses = Vec::new();
        for x in grid.nodes() {
            if !self.output.in_extended_set(&x) {
                continue;
            }
            let lie = crate::model::try_lie(|d| Ok::<_, Error>(self.output.psi_rate(d)), sys, &x)?;
            let lglf_norm = lie.lg_norm();
            let r = lie.value + alpha.apply(self.psi(&x));
            if lglf_norm < RECBF_SINGULAR_TOL && r < *epsilon {
                witnesses.push(RecbfWitness { x, lglf_psi_norm: lglf_norm, r });
            }
        }
        Ok(witnesses)
    }
}

/// Threshold on `‖L_g L_f ψ‖` below which the rectified condition applies.
pub const RECBF_SINGULAR_TOL: f64 = 1e-8;

/// A state where the rectified construction's validity condition fails.
#[derive(Debug, Clone, PartialEq)]
pub struct RecbfWitness {
    pub x: Vec<f64>,
    pub lglf_psi_norm: f64,
    pub r: f64,
}
