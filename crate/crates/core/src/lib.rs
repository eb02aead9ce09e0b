//! Control barrier functions for safety constraints of relative degree two.
//!
//! Four ways of turning a constraint `ψ(y(x)) ≥ 0` on a relative-degree-two
//! output into a candidate barrier `h(x)` are provided side by side:
//! high-order ([`CbfKind::HighOrder`]), rectified ([`CbfKind::Rectified`]),
//! backstepping ([`CbfKind::Backstepping`]) and activated backstepping
//! ([`CbfKind::Activated`]). Gradients come from forward-mode automatic
//! differentiation ([`autodiff`]), the closed-form safety filter lives in
//! [`filter`], and [`sim`] / [`analysis`] run closed loops and phase-space
//! scans on the two bundled plants in [`systems`].

pub mod analysis;
pub mod autodiff;
pub mod cbf;
pub mod filter;
pub mod model;
pub mod sim;
pub mod systems;

use thiserror::Error;

pub use autodiff::{AdError, Dual};
pub use cbf::{CbfInstance, CbfKind, CbfTag};
pub use filter::{LambdaKind, SafetyFilterSpec, VirtualController};
pub use model::{ActivationTheta, ClassKappaE, ControlAffineSystem, Plant, RelDeg2Output};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("state {0:?} lies outside the extended set")]
    OutsideDomain(Vec<f64>),
    #[error("virtual controller undefined at y = {0:?} (constrained critical point, e.g. the obstacle center)")]
    SingularVirtualController(Vec<f64>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite state derivative at t = {t}")]
    NonFinite { t: f64 },
}
