//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the engine can run on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant. Never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// `base` or a small multiple of machine epsilon, whichever is larger.
    ///
    /// Keeps fixed absolute tolerances meaningful for `f32`.
    #[inline]
    fn tol(base: f64) -> Self {
        Self::lit(base).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log Σ exp(x_i)` with the usual max shift. Entries may be `-inf`.
pub fn log_sum_exp<T: Scalar>(xs: impl IntoIterator<Item = T> + Clone) -> T {
    let m = xs
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |acc, x| acc.max(x));
    if m == T::neg_infinity() || m == T::infinity() {
        return m;
    }
    let sum = xs.into_iter().fold(T::zero(), |acc, x| acc + (x - m).exp());
    m + sum.ln()
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn sum<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x)
}

pub fn max_of<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::neg_infinity(), |acc, &x| acc.max(x))
}

pub fn min_of<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::infinity(), |acc, &x| acc.min(x))
}

/// Max-norm distance between two vectors of equal length.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}
