//! Forward-mode automatic differentiation over scalars.
//!
//! A [`Dual`] carries a value and a fixed-capacity vector of partial
//! derivatives with respect to up to [`MAX_VARS`] seeded inputs. State
//! dimensions in this crate never exceed four, so the partials live inline
//! and `Dual` is `Copy`.
//!
//! Operations that leave their mathematical domain (division by zero,
//! square root of a negative number) do not panic; they poison the result
//! with the offending [`Primitive`], which then propagates through every
//! later operation and is reported by [`grad`] as an [`AdError`].
//!
//! Differentiating across a ReLU kink is outside the smoothness contract:
//! [`Dual::relu`] assigns the subderivative 0 at 0 and is only meant for
//! values, never for gradients evaluated along trajectories.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use thiserror::Error;

/// Maximum number of independent variables a [`Dual`] can be seeded with.
pub const MAX_VARS: usize = 4;

/// A primitive whose domain was violated during evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Div,
    Sqrt,
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::Div => write!(f, "division by zero"),
            Primitive::Sqrt => write!(f, "square root of a negative number"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("evaluation error: {0}")]
    Domain(Primitive),
    #[error("field is not finite at the evaluation point")]
    NonFinite,
    #[error("{0} variables requested, at most {MAX_VARS} supported")]
    TooManyVariables(usize),
}

/// Dual number with up to [`MAX_VARS`] partial derivatives.
#[derive(Clone, Copy, PartialEq)]
pub struct Dual {
    value: f64,
    partials: [f64; MAX_VARS],
    fault: Option<Primitive>,
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Dual");
        d.field("value", &self.value).field("partials", &self.partials);
        if let Some(p) = self.fault {
            d.field("fault", &p);
        }
        d.finish()
    }
}

impl Default for Dual {
    fn default() -> Self {
        Dual::constant(0.0)
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl Dual {
    pub const fn constant(value: f64) -> Self {
        Dual {
            value,
            partials: [0.0; MAX_VARS],
            fault: None,
        }
    }

    /// A variable seeded with the `index`-th unit vector.
    ///
    /// Panics if `index >= MAX_VARS`.
    pub fn variable(value: f64, index: usize) -> Self {
        let mut partials = [0.0; MAX_VARS];
        partials[index] = 1.0;
        Dual {
            value,
            partials,
            fault: None,
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn partials(&self) -> &[f64; MAX_VARS] {
        &self.partials
    }

    #[inline]
    pub fn partial(&self, i: usize) -> f64 {
        self.partials[i]
    }

    #[inline]
    pub fn fault(&self) -> Option<Primitive> {
        self.fault
    }

    /// Applies a scalar function with known value and derivative at `self`.
    #[inline]
    fn chain(self, value: f64, derivative: f64) -> Self {
        let mut partials = [0.0; MAX_VARS];
        for (p, q) in partials.iter_mut().zip(self.partials.iter()) {
            *p = derivative * q;
        }
        Dual {
            value,
            partials,
            fault: self.fault,
        }
    }

    /// Same as `chain` but with derivative exactly zero, so that infinite or
    /// NaN seed partials do not leak through flat regions.
    #[inline]
    fn flat(self, value: f64) -> Self {
        Dual {
            value,
            partials: [0.0; MAX_VARS],
            fault: self.fault,
        }
    }

    fn poisoned(mut self, primitive: Primitive) -> Self {
        self.fault.get_or_insert(primitive);
        self
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn sqrt(self) -> Self {
        if self.value < 0.0 {
            return self.chain(f64::NAN, f64::NAN).poisoned(Primitive::Sqrt);
        }
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s)
    }

    /// Rectified linear unit, `max(x, 0)`; subderivative 0 at the kink.
    pub fn relu(self) -> Self {
        if self.value > 0.0 {
            self
        } else {
            self.flat(0.0)
        }
    }

    /// Rectified quadratic unit, `x²` for `x > 0` and 0 otherwise.
    pub fn requ(self) -> Self {
        if self.value > 0.0 {
            self.chain(requ(self.value), requ_prime(self.value))
        } else {
            self.flat(0.0)
        }
    }

    /// Pointwise maximum; differentiable away from ties.
    pub fn max(self, other: Dual) -> Self {
        if self.value >= other.value {
            self.merge_fault(other)
        } else {
            other.merge_fault(self)
        }
    }

    /// Pointwise minimum; differentiable away from ties.
    pub fn min(self, other: Dual) -> Self {
        if self.value <= other.value {
            self.merge_fault(other)
        } else {
            other.merge_fault(self)
        }
    }

    fn merge_fault(mut self, other: Dual) -> Self {
        self.fault = self.fault.or(other.fault);
        self
    }

    /// Returns the value, or the first domain violation met while computing it.
    pub fn checked_value(&self) -> Result<f64, AdError> {
        match self.fault {
            Some(p) => Err(AdError::Domain(p)),
            None => Ok(self.value),
        }
    }
}

/// Rectified quadratic unit.
#[inline]
pub fn requ(s: f64) -> f64 {
    if s > 0.0 {
        s * s
    } else {
        0.0
    }
}

/// Derivative of [`requ`]; continuous, and exactly 0 for `s <= 0`.
#[inline]
pub fn requ_prime(s: f64) -> f64 {
    if s > 0.0 {
        2.0 * s
    } else {
        0.0
    }
}

/// Rectified linear unit.
#[inline]
pub fn relu(s: f64) -> f64 {
    if s > 0.0 {
        s
    } else {
        0.0
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        let mut partials = self.partials;
        for (p, q) in partials.iter_mut().zip(rhs.partials.iter()) {
            *p += q;
        }
        Dual {
            value: self.value + rhs.value,
            partials,
            fault: self.fault.or(rhs.fault),
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        let mut partials = self.partials;
        for (p, q) in partials.iter_mut().zip(rhs.partials.iter()) {
            *p -= q;
        }
        Dual {
            value: self.value - rhs.value,
            partials,
            fault: self.fault.or(rhs.fault),
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        let mut partials = [0.0; MAX_VARS];
        for i in 0..MAX_VARS {
            partials[i] = self.partials[i] * rhs.value + self.value * rhs.partials[i];
        }
        Dual {
            value: self.value * rhs.value,
            partials,
            fault: self.fault.or(rhs.fault),
        }
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        if rhs.value == 0.0 {
            let out = Dual {
                value: f64::NAN,
                partials: [f64::NAN; MAX_VARS],
                fault: self.fault.or(rhs.fault),
            };
            return out.poisoned(Primitive::Div);
        }
        let inv = 1.0 / rhs.value;
        let value = self.value * inv;
        let mut partials = [0.0; MAX_VARS];
        for i in 0..MAX_VARS {
            partials[i] = (self.partials[i] - value * rhs.partials[i]) * inv;
        }
        Dual {
            value,
            partials,
            fault: self.fault.or(rhs.fault),
        }
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        let mut partials = self.partials;
        for p in partials.iter_mut() {
            *p = -*p;
        }
        Dual {
            value: -self.value,
            partials,
            fault: self.fault,
        }
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $method:ident),*) => {$(
        impl $tr<f64> for Dual {
            type Output = Dual;
            #[inline]
            fn $method(self, rhs: f64) -> Dual {
                self.$method(Dual::constant(rhs))
            }
        }
        impl $tr<Dual> for f64 {
            type Output = Dual;
            #[inline]
            fn $method(self, rhs: Dual) -> Dual {
                Dual::constant(self).$method(rhs)
            }
        }
    )*};
}

scalar_ops!(Add add, Sub sub, Mul mul, Div div);

impl AddAssign for Dual {
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual {
    fn mul_assign(&mut self, rhs: Dual) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::constant(0.0), |acc, d| acc + d)
    }
}

/// Lifts a point to constant duals (no seeded directions).
pub fn constants(x: &[f64]) -> Vec<Dual> {
    x.iter().copied().map(Dual::constant).collect()
}

/// Lifts a point to duals seeded with the unit vectors.
pub fn seed(x: &[f64]) -> Result<Vec<Dual>, AdError> {
    if x.len() > MAX_VARS {
        return Err(AdError::TooManyVariables(x.len()));
    }
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(v, i))
        .collect())
}

/// Inner product of two equally long dual vectors.
pub fn dot(a: &[Dual], b: &[Dual]) -> Dual {
    a.iter().zip(b).map(|(&p, &q)| p * q).sum()
}

/// Value and gradient of a fallible scalar field at `x`.
pub fn try_value_and_grad<F, E>(field: F, x: &[f64]) -> Result<(f64, Vec<f64>), E>
where
    F: FnOnce(&[Dual]) -> Result<Dual, E>,
    E: From<AdError>,
{
    let seeded = seed(x)?;
    let out = field(&seeded)?;
    let value = out.checked_value()?;
    let g = out.partials[..x.len()].to_vec();
    if !value.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(AdError::NonFinite.into());
    }
    Ok((value, g))
}

/// Exact gradient of `field` at `x`.
pub fn grad<F>(field: F, x: &[f64]) -> Result<Vec<f64>, AdError>
where
    F: FnOnce(&[Dual]) -> Dual,
{
    try_value_and_grad(|d| Ok::<_, AdError>(field(d)), x).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += step;
                xm[i] -= step;
                (f(&xp) - f(&xm)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn square_gradient() {
        let g = grad(|x| x[0] * x[0], &[3.0]).unwrap();
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn pendulum_constraint_is_stationary_upright() {
        let g = grad(|x| PI * PI / 4.0 - x[0].square(), &[0.0, 1.7]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn requ_values() {
        assert_eq!(requ(2.0), 4.0);
        assert_eq!(requ(-1.0), 0.0);
        assert_eq!(requ_prime(0.0), 0.0);
        assert_eq!(requ_prime(3.0), 6.0);
    }

    #[test]
    fn requ_is_c1() {
        for d in [1e-3, 1e-6] {
            assert!((requ_prime(d) - requ_prime(-d)).abs() <= 2.0 * d + 1e-15);
        }
        let left = grad(|x| x[0].requ(), &[-1e-9]).unwrap()[0];
        let right = grad(|x| x[0].requ(), &[1e-9]).unwrap()[0];
        assert!((left - right).abs() < 1e-8);
        assert_eq!(grad(|x| x[0].requ(), &[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn relu_kink_uses_zero_subderivative() {
        assert_eq!(grad(|x| x[0].relu(), &[0.0]).unwrap()[0], 0.0);
        assert_eq!(grad(|x| x[0].relu(), &[0.5]).unwrap()[0], 1.0);
        assert_eq!(relu(-2.0), 0.0);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let err = grad(|x| Dual::constant(1.0) / (x[0] - 1.0), &[1.0]).unwrap_err();
        assert_eq!(err, AdError::Domain(Primitive::Div));
    }

    #[test]
    fn sqrt_of_negative_is_reported_and_propagates() {
        let err = grad(|x| (x[0] - 2.0).sqrt() * 0.0 + x[1], &[1.0, 1.0]).unwrap_err();
        assert_eq!(err, AdError::Domain(Primitive::Sqrt));
    }

    #[test]
    fn too_many_variables() {
        let err = grad(|x| x[0], &[0.0; 5]).unwrap_err();
        assert_eq!(err, AdError::TooManyVariables(5));
    }

    #[test]
    fn chain_rule_on_polynomials_is_exact() {
        // g(x) = (x0² + 3 x1, x0 x1), F(u, v) = u v - v²
        // dF/dx = [v, u - 2v] * [[2x0, 3], [x1, x0]]
        let x = [1.5, -2.0];
        let g = grad(
            |x| {
                let u = x[0] * x[0] + 3.0 * x[1];
                let v = x[0] * x[1];
                u * v - v * v
            },
            &x,
        )
        .unwrap();
        let (u, v) = (x[0] * x[0] + 3.0 * x[1], x[0] * x[1]);
        let outer = [v, u - 2.0 * v];
        let jac = [[2.0 * x[0], 3.0], [x[1], x[0]]];
        let expected = [
            outer[0] * jac[0][0] + outer[1] * jac[1][0],
            outer[0] * jac[0][1] + outer[1] * jac[1][1],
        ];
        assert_eq!(g, expected.to_vec());
    }

    #[test]
    fn max_min_pick_the_active_branch() {
        let g = grad(|x| x[0].max(x[1] * 2.0), &[1.0, 3.0]).unwrap();
        assert_eq!(g, vec![0.0, 2.0]);
        let g = grad(|x| x[0].min(x[1] * 2.0), &[1.0, 3.0]).unwrap();
        assert_eq!(g, vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn arithmetic_matches_finite_differences(
            a in -3.0f64..3.0, b in 0.5f64..3.0, c in -3.0f64..3.0
        ) {
            let field = |x: &[Dual]| (x[0] * x[1] - x[2]) / x[1] + x[0].sin() * x[2].cos() + (x[1] * x[1] + 1.0).sqrt();
            let plain = |x: &[f64]| (x[0] * x[1] - x[2]) / x[1] + x[0].sin() * x[2].cos() + (x[1] * x[1] + 1.0).sqrt();
            let x = [a, b, c];
            let g = grad(field, &x).unwrap();
            let fd = central_difference(plain, &x, 1e-6);
            for (p, q) in g.iter().zip(&fd) {
                prop_assert!((p - q).abs() / (1.0 + p.abs()) < 1e-7);
            }
        }

        #[test]
        fn seeding_unit_vectors_recovers_partials(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let x = [a, b];
            let g = grad(|x| x[0] * x[0] * x[1] + x[1], &x).unwrap();
            prop_assert_eq!(g[0], 2.0 * a * b);
            prop_assert_eq!(g[1], a * a + 1.0);
        }
    }
}
