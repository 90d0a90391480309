//! Forward-mode automatic differentiation with first-order dual numbers.
//!
//! A [`Dual`] carries a value and a single tangent. Seeding the tangents of
//! the inputs with a direction `u` and evaluating a function once yields the
//! directional derivative `<grad f(x), u>` in the tangent of the output.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{op} is undefined at {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("evaluation produced a non-finite result")]
    NonFinite,
}

/// Value plus directional-derivative channel, with `eps^2 = 0` arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    #[inline]
    pub const fn new(value: f64, tangent: f64) -> Self {
        Dual { value, tangent }
    }

    /// Lifts a constant; its tangent is exactly zero.
    #[inline]
    pub const fn constant(value: f64) -> Self {
        Dual { value, tangent: 0.0 }
    }

    #[inline]
    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Dual::new(e, e * self.tangent)
    }

    pub fn ln(self) -> Result<Self, AdError> {
        if self.value <= 0.0 || self.value.is_nan() {
            return Err(AdError::Domain { op: "ln", value: self.value });
        }
        Ok(Dual::new(self.value.ln(), self.tangent / self.value))
    }

    #[inline]
    pub fn sin(self) -> Self {
        Dual::new(self.value.sin(), self.value.cos() * self.tangent)
    }

    #[inline]
    pub fn cos(self) -> Self {
        Dual::new(self.value.cos(), -self.value.sin() * self.tangent)
    }

    /// Square root. Zero is accepted only with a zero tangent, since the
    /// derivative is unbounded there.
    pub fn sqrt(self) -> Result<Self, AdError> {
        if self.value < 0.0 || self.value.is_nan() || (self.value == 0.0 && self.tangent != 0.0) {
            return Err(AdError::Domain { op: "sqrt", value: self.value });
        }
        let s = self.value.sqrt();
        let t = if self.tangent == 0.0 { 0.0 } else { self.tangent / (2.0 * s) };
        Ok(Dual::new(s, t))
    }

    #[inline]
    pub fn powi(self, n: i32) -> Self {
        match n {
            0 => Dual::constant(1.0),
            1 => self,
            _ => Dual::new(
                self.value.powi(n),
                f64::from(n) * self.value.powi(n - 1) * self.tangent,
            ),
        }
    }

    /// Real power `self^p`. Requires a positive base unless `p` is integral.
    pub fn powf(self, p: f64) -> Result<Self, AdError> {
        if p.fract() == 0.0 && p.abs() <= f64::from(i32::MAX) {
            return Ok(self.powi(p as i32));
        }
        if self.value <= 0.0 || self.value.is_nan() {
            return Err(AdError::Domain { op: "powf", value: self.value });
        }
        Ok(Dual::new(
            self.value.powf(p),
            p * self.value.powf(p - 1.0) * self.tangent,
        ))
    }

    /// Division that rejects a zero denominator instead of producing inf/NaN.
    pub fn checked_div(self, rhs: Dual) -> Result<Self, AdError> {
        if rhs.value == 0.0 {
            return Err(AdError::Domain { op: "div", value: rhs.value });
        }
        Ok(self / rhs)
    }
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}eps", self.value, self.tangent)
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.tangent + self.tangent * rhs.value,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.value;
        Dual::new(
            self.value * inv,
            (self.tangent * rhs.value - self.value * rhs.tangent) * inv * inv,
        )
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: f64) -> Dual {
        Dual::new(self.value + rhs, self.tangent)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: f64) -> Dual {
        Dual::new(self.value - rhs, self.tangent)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.tangent * rhs)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: f64) -> Dual {
        Dual::new(self.value / rhs, self.tangent / rhs)
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        rhs * self
    }
}

impl Add<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        rhs + self
    }
}

impl Sub<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self - rhs.value, -rhs.tangent)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dual {
    #[inline]
    fn sub_assign(&mut self, rhs: Dual) {
        *self = *self - rhs;
    }
}

impl MulAssign for Dual {
    #[inline]
    fn mul_assign(&mut self, rhs: Dual) {
        *self = *self * rhs;
    }
}

impl Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::constant(0.0), |acc, d| acc + d)
    }
}

/// `A x - b` evaluated over duals. `b` may be omitted for a pure linear map.
pub fn affine(a: &DMatrix<f64>, x: &[Dual], b: Option<&DVector<f64>>) -> Result<Vec<Dual>, AdError> {
    if x.len() != a.ncols() {
        return Err(AdError::DimensionMismatch { expected: a.ncols(), got: x.len() });
    }
    if let Some(b) = b {
        if b.len() != a.nrows() {
            return Err(AdError::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
    }
    // column-major walk: accumulate x_j * A[:, j]
    let mut out = vec![Dual::constant(0.0); a.nrows()];
    for (j, xj) in x.iter().enumerate() {
        let col = a.column(j);
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            o.value += aij * xj.value;
            o.tangent += aij * xj.tangent;
        }
    }
    if let Some(b) = b {
        for (o, bi) in out.iter_mut().zip(b.iter()) {
            o.value -= bi;
        }
    }
    Ok(out)
}

pub fn sq_norm(v: &[Dual]) -> Dual {
    v.iter().map(|&d| d * d).sum()
}

/// Scalar-valued function of `dim()` variables, evaluable over duals.
///
/// Implementations must be deterministic and side-effect free.
pub trait ScalarFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[Dual]) -> Result<Dual, AdError>;

    /// Plain value. The default lifts `x` with zero tangents.
    fn value(&self, x: &[f64]) -> Result<f64, AdError> {
        check_dim(self.dim(), x.len())?;
        let lifted: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        Ok(self.eval(&lifted)?.value)
    }

    /// Full gradient. The default runs one forward pass per coordinate;
    /// implementors with a closed form may override.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, AdError> {
        gradient_exact(self, x)
    }
}

impl<F: ScalarFunction + ?Sized> ScalarFunction for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[Dual]) -> Result<Dual, AdError> {
        (**self).eval(x)
    }
    fn value(&self, x: &[f64]) -> Result<f64, AdError> {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, AdError> {
        (**self).gradient(x)
    }
}

/// Adapter turning a closure over duals into a [`ScalarFunction`].
pub struct FnScalar<F> {
    dim: usize,
    f: F,
}

impl<F> FnScalar<F>
where
    F: Fn(&[Dual]) -> Result<Dual, AdError> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnScalar { dim, f }
    }
}

impl<F> ScalarFunction for FnScalar<F>
where
    F: Fn(&[Dual]) -> Result<Dual, AdError> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[Dual]) -> Result<Dual, AdError> {
        check_dim(self.dim, x.len())?;
        (self.f)(x)
    }
}

#[inline]
pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), AdError> {
    if expected == got {
        Ok(())
    } else {
        Err(AdError::DimensionMismatch { expected, got })
    }
}

/// Returns `(f(x), <grad f(x), u>)` from a single forward pass.
pub fn directional_derivative<F: ScalarFunction + ?Sized>(
    f: &F,
    x: &[f64],
    u: &[f64],
) -> Result<(f64, f64), AdError> {
    check_dim(f.dim(), x.len())?;
    check_dim(f.dim(), u.len())?;
    let seeded: Vec<Dual> = x.iter().zip(u).map(|(&xi, &ui)| Dual::new(xi, ui)).collect();
    let out = f.eval(&seeded)?;
    if !out.value.is_finite() || !out.tangent.is_finite() {
        return Err(AdError::NonFinite);
    }
    Ok((out.value, out.tangent))
}

/// Gradient assembled from `m` forward passes along the basis vectors.
pub fn gradient_exact<F: ScalarFunction + ?Sized>(f: &F, x: &[f64]) -> Result<Vec<f64>, AdError> {
    check_dim(f.dim(), x.len())?;
    let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        seeded[j].tangent = 1.0;
        let out = f.eval(&seeded)?;
        if !out.tangent.is_finite() {
            return Err(AdError::NonFinite);
        }
        grad.push(out.tangent);
        seeded[j].tangent = 0.0;
    }
    Ok(grad)
}
