//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast, ToPrimitive};

/// Real scalar usable by the quadratures, fields and transforms.
///
/// Implemented for `f32` and `f64`. Constants that have no closed form in
/// `num_traits` (Gamma values, Gauss-Legendre nodes) are computed in `f64`
/// and converted.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumCast
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal representable")
    }

    /// Conversion from an index or count.
    #[inline]
    fn of_usize(k: usize) -> Self {
        <Self as NumCast>::from(k).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// The `(x)_+^a` convention: `|x|^a` for `x > 0`, zero otherwise.
#[inline]
pub fn positive_part_pow<T: Scalar>(x: T, a: T) -> T {
    if x > T::zero() {
        x.powf(a)
    } else {
        T::zero()
    }
}

/// Gamma function evaluated in `f64`.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub(crate) fn to_f64_vec<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.as_f64()).collect()
}
