use std::ops::Index;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) type Coords<T> = SmallVec<[T; 4]>;

/// A point `x = (x', x_n)` of `R^n`, `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T> {
    coords: Coords<T>,
}

impl<T: Scalar> Point<T> {
    pub fn new(xprime: &[T], xn: T) -> Result<Self> {
        let mut coords: Coords<T> = SmallVec::from_slice(xprime);
        coords.push(xn);
        Self::from_coords(&coords)
    }

    /// Builds a point from all `n` coordinates, the last being `x_n`.
    pub fn from_coords(coords: &[T]) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Dimension(format!(
                "a point needs n >= 2 coordinates, got {}",
                coords.len()
            )));
        }
        Ok(Self {
            coords: SmallVec::from_slice(coords),
        })
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        let c: Coords<T> = coords.iter().map(|&x| T::of(x)).collect();
        Self::from_coords(&c)
    }

    pub fn origin(n: usize) -> Result<Self> {
        Self::from_coords(&vec![T::zero(); n])
    }

    #[inline]
    pub(crate) fn from_smallvec(coords: Coords<T>) -> Self {
        debug_assert!(coords.len() >= 2);
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn xprime(&self) -> &[T] {
        &self.coords[..self.coords.len() - 1]
    }

    #[inline]
    pub fn xn(&self) -> T {
        self.coords[self.coords.len() - 1]
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    /// `|x'|^2`.
    #[inline]
    pub fn xprime_norm_sqr(&self) -> T {
        norm_sqr(self.xprime())
    }

    pub fn norm(&self) -> T {
        norm_sqr(&self.coords).sqrt()
    }

    /// Same `x'`, new last coordinate.
    #[inline]
    pub fn with_xn(&self, xn: T) -> Self {
        let mut coords = self.coords.clone();
        let last = coords.len() - 1;
        coords[last] = xn;
        Self { coords }
    }

    /// `x - s·y`.
    #[inline]
    pub fn sub_scaled(&self, y: &[T], s: T) -> Self {
        let coords = self
            .coords
            .iter()
            .zip(y)
            .map(|(&a, &b)| a - s * b)
            .collect();
        Self { coords }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|x| x.as_f64()).collect()
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

#[inline]
pub(crate) fn norm_sqr<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_into_xprime_and_xn() {
        let p = Point::<f64>::new(&[1.0, 2.0], 3.0).unwrap();
        assert_eq!(p.dim(), 3);
        assert_eq!(p.xprime(), &[1.0, 2.0]);
        assert_eq!(p.xn(), 3.0);
        assert_eq!(p.xprime_norm_sqr(), 5.0);
    }

    #[test]
    fn rejects_one_dimensional_points() {
        assert!(Point::<f64>::from_coords(&[1.0]).is_err());
    }
}
