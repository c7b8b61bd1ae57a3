//! Analytic test functions on `R^n` and `R^n_+`, sphere profiles, and the
//! support hints that let every quadrature focus its nodes.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use ndarray::ArrayD;
use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::point::{Coords, Point};
use crate::quadrature::{Grid, Interval};
use crate::scalar::Scalar;

/// Where a field lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    FullSpace,
    /// `y_n > 0`.
    HalfSpace,
}

type EvalFn<T> = Arc<dyn Fn(&Point<T>) -> Result<T> + Send + Sync>;
type ProfileFn<T> = Arc<dyn Fn(&[T], T) -> Result<T> + Send + Sync>;
pub(crate) type FiberFn<T> = Arc<dyn Fn(&[T]) -> Interval<T> + Send + Sync>;

/// Region outside of which a field is treated as zero.
///
/// `bbox` holds one interval per coordinate (possibly unbounded). `fiber`,
/// when present, narrows the last coordinate for a fixed `x'`; fields whose
/// support is a curved band (images of the parabolic maps, sonar profiles)
/// use it. `scale` is the length used by the `tan` maps on unbounded axes.
#[derive(Clone)]
pub struct Support<T> {
    bbox: Vec<Interval<T>>,
    fiber: Option<FiberFn<T>>,
    scale: T,
}

impl<T: Scalar> fmt::Debug for Support<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Support")
            .field("bbox", &self.bbox)
            .field("fiber", &self.fiber.is_some())
            .field("scale", &self.scale)
            .finish()
    }
}

impl<T: Scalar> Support<T> {
    pub fn boxed(bbox: Vec<Interval<T>>) -> Self {
        let scale = bbox
            .iter()
            .filter(|iv| iv.is_finite())
            .map(|iv| iv.width() / T::of(2.0))
            .fold(T::zero(), T::max);
        Self {
            bbox,
            fiber: None,
            scale: if scale > T::zero() { scale } else { T::one() },
        }
    }

    /// No restriction at all.
    pub fn everywhere(n: usize) -> Self {
        Self {
            bbox: vec![Interval::real_line(); n],
            fiber: None,
            scale: T::one(),
        }
    }

    pub(crate) fn with_fiber(mut self, fiber: FiberFn<T>) -> Self {
        self.fiber = Some(fiber);
        self
    }

    pub fn with_scale(mut self, scale: T) -> Self {
        self.scale = scale;
        self
    }

    pub fn dim(&self) -> usize {
        self.bbox.len()
    }

    pub fn bbox(&self) -> &[Interval<T>] {
        &self.bbox
    }

    pub fn xprime_box(&self) -> &[Interval<T>] {
        &self.bbox[..self.bbox.len() - 1]
    }

    pub fn last_axis(&self) -> Interval<T> {
        self.bbox[self.bbox.len() - 1]
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn is_bounded(&self) -> bool {
        self.bbox.iter().all(|iv| iv.is_finite())
    }

    /// Range of the last coordinate carrying the support above `x'`.
    pub fn fiber(&self, xprime: &[T]) -> Interval<T> {
        let inside = self
            .xprime_box()
            .iter()
            .zip(xprime)
            .all(|(iv, &x)| iv.contains(x));
        if !inside {
            return Interval::new(T::zero(), T::zero());
        }
        match &self.fiber {
            Some(f) => f(xprime).intersect(&self.last_axis()),
            None => self.last_axis(),
        }
    }

    /// Largest distance from the origin to the bounding box, if bounded.
    pub fn decay_radius(&self) -> Option<T> {
        if !self.is_bounded() {
            return None;
        }
        let r2 = self
            .bbox
            .iter()
            .fold(T::zero(), |acc, iv| acc + iv.lo.abs().max(iv.hi.abs()).powi(2));
        Some(r2.sqrt())
    }

    pub(crate) fn hull(&self, other: &Self) -> Self {
        let bbox = self.bbox.iter().zip(&other.bbox).map(|(a, b)| a.hull(b)).collect();
        let fiber = match (&self.fiber, &other.fiber) {
            (None, None) => None,
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let f: FiberFn<T> = Arc::new(move |xp: &[T]| a.fiber(xp).hull(&b.fiber(xp)));
                Some(f)
            }
        };
        Self {
            bbox,
            fiber,
            scale: self.scale.max(other.scale),
        }
    }

    pub(crate) fn clip_last_below(mut self, lo: T) -> Self {
        let n = self.bbox.len();
        self.bbox[n - 1].lo = self.bbox[n - 1].lo.max(lo);
        self
    }
}

/// A real function on `R^n` or `R^n_+`, evaluated lazily.
#[derive(Clone)]
pub struct ScalarField<T> {
    n: usize,
    domain: Domain,
    eval: EvalFn<T>,
    support: Support<T>,
    terms: Option<Arc<[(T, ScalarField<T>)]>>,
}

impl<T: Scalar> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.n)
            .field("domain", &self.domain)
            .field("support", &self.support)
            .finish()
    }
}

impl<T: Scalar> ScalarField<T> {
    pub fn new<F>(n: usize, domain: Domain, support: Support<T>, eval: F) -> Result<Self>
    where
        F: Fn(&Point<T>) -> Result<T> + Send + Sync + 'static,
    {
        check_dim(n)?;
        if support.dim() != n {
            return Err(Error::Dimension(format!(
                "support has {} axes, field has n = {n}",
                support.dim()
            )));
        }
        Ok(Self {
            n,
            domain,
            eval: Arc::new(eval),
            support,
            terms: None,
        })
    }

    pub fn zero(n: usize, domain: Domain) -> Result<Self> {
        let empty = vec![Interval::new(T::zero(), T::zero()); n];
        Self::new(n, domain, Support::boxed(empty), |_| Ok(T::zero()))
    }

    pub fn constant(n: usize, domain: Domain, c: T) -> Result<Self> {
        let support = match domain {
            Domain::FullSpace => Support::everywhere(n),
            Domain::HalfSpace => Support::everywhere(n).clip_last_below(T::zero()),
        };
        Self::new(n, domain, support, move |_| Ok(c))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    /// Effective support radius: beyond it the field is treated as zero.
    pub fn decay_hint(&self) -> Option<T> {
        self.support.decay_radius()
    }

    pub fn eval(&self, x: &Point<T>) -> Result<T> {
        if x.dim() != self.n {
            return Err(Error::Dimension(format!(
                "point of dimension {} passed to a field on R^{}",
                x.dim(),
                self.n
            )));
        }
        if self.domain == Domain::HalfSpace && !(x.xn() > T::zero()) {
            return Err(Error::OutsideHalfSpace { point: x.to_f64() });
        }
        (self.eval)(x)
    }

    pub fn eval_coords(&self, coords: &[T]) -> Result<T> {
        self.eval(&Point::from_coords(coords)?)
    }

    /// `a·self + b·other` with the hull of both supports.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.n != other.n || self.domain != other.domain {
            return Err(Error::DomainMismatch(
                "linear combination of fields on different domains".into(),
            ));
        }
        let (f, g) = (self.eval.clone(), other.eval.clone());
        let mut out = Self::new(
            self.n,
            self.domain,
            self.support.hull(&other.support),
            move |x| Ok(a * f(x)? + b * g(x)?),
        )?;
        let mut terms = self.scaled_terms(a);
        terms.extend(other.scaled_terms(b));
        out.terms = Some(terms.into());
        Ok(out)
    }

    fn scaled_terms(&self, c: T) -> Vec<(T, Self)> {
        match &self.terms {
            Some(ts) => ts.iter().map(|(k, f)| (c * *k, f.clone())).collect(),
            None => vec![(c, self.clone())],
        }
    }

    /// Components of a field built by [`linear_combination`](Self::linear_combination).
    /// Integral transforms act on them one at a time, each over its own support.
    pub fn terms(&self) -> Option<&[(T, ScalarField<T>)]> {
        self.terms.as_deref()
    }

    /// Same field with a cache keyed by the bit pattern of the point.
    /// Evaluation stays pure: entries are only ever filled with the value the
    /// underlying map returns.
    pub fn memoized(&self) -> Self {
        let inner = self.eval.clone();
        let cache: Arc<Mutex<HashMap<SmallVec<[u64; 4]>, T>>> = Arc::default();
        let eval: EvalFn<T> = Arc::new(move |x: &Point<T>| {
            let key: SmallVec<[u64; 4]> = x.coords().iter().map(|c| c.as_f64().to_bits()).collect();
            if let Some(&v) = cache.lock().expect("cache lock").get(&key) {
                return Ok(v);
            }
            let v = inner(x)?;
            cache.lock().expect("cache lock").insert(key, v);
            Ok(v)
        });
        Self {
            n: self.n,
            domain: self.domain,
            eval,
            support: self.support.clone(),
            terms: None,
        }
    }

    /// Same map, different domain tag; used by extension and restriction.
    pub(crate) fn retag(&self, domain: Domain, support: Support<T>) -> Self {
        let inner = self.eval.clone();
        Self {
            n: self.n,
            domain,
            eval: inner,
            support,
            terms: None,
        }
    }

    pub(crate) fn raw(&self) -> EvalFn<T> {
        self.eval.clone()
    }
}

/// A function of `(x', r)`, `x' ∈ R^{n-1}`, `r > 0`; the codomain of the
/// sonar transform. The support's last axis is the radius.
#[derive(Clone)]
pub struct SphereProfile<T> {
    n: usize,
    eval: ProfileFn<T>,
    support: Support<T>,
}

impl<T: Scalar> fmt::Debug for SphereProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereProfile")
            .field("n", &self.n)
            .field("support", &self.support)
            .finish()
    }
}

impl<T: Scalar> SphereProfile<T> {
    pub fn new<F>(n: usize, support: Support<T>, eval: F) -> Result<Self>
    where
        F: Fn(&[T], T) -> Result<T> + Send + Sync + 'static,
    {
        check_dim(n)?;
        if support.dim() != n {
            return Err(Error::Dimension("support/profile dimension mismatch".into()));
        }
        Ok(Self {
            n,
            eval: Arc::new(eval),
            support: support.clip_last_below(T::zero()),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    pub fn eval(&self, xprime: &[T], r: T) -> Result<T> {
        if xprime.len() + 1 != self.n {
            return Err(Error::Dimension(format!(
                "x' of length {} for a profile with n = {}",
                xprime.len(),
                self.n
            )));
        }
        if !(r > T::zero()) {
            return Err(Error::NonPositiveRadius { r: r.as_f64() });
        }
        (self.eval)(xprime, r)
    }

    /// Evaluation at the point `(x', r)`.
    pub fn eval_point(&self, p: &Point<T>) -> Result<T> {
        self.eval(p.xprime(), p.xn())
    }

    /// The profile read as a half-space field in `(x', r)`.
    pub fn to_half_space_field(&self) -> ScalarField<T> {
        let inner = self.eval.clone();
        ScalarField {
            n: self.n,
            domain: Domain::HalfSpace,
            eval: Arc::new(move |p: &Point<T>| inner(p.xprime(), p.xn())),
            support: self.support.clone(),
            terms: None,
        }
    }

    /// Reads a half-space field as a profile.
    pub fn from_half_space_field(field: &ScalarField<T>) -> Result<Self> {
        if field.domain() != Domain::HalfSpace {
            return Err(Error::DomainMismatch(
                "only half-space fields can be read as sphere profiles".into(),
            ));
        }
        let inner = field.raw();
        let n = field.dim();
        Self::new(n, field.support().clone(), move |xp, r| {
            let mut c: Coords<T> = SmallVec::from_slice(xp);
            c.push(r);
            inner(&Point::from_smallvec(c))
        })
    }

    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DomainMismatch("profiles of different dimension".into()));
        }
        let (f, g) = (self.eval.clone(), other.eval.clone());
        Self::new(self.n, self.support.hull(&other.support), move |xp, r| {
            Ok(a * f(xp, r)? + b * g(xp, r)?)
        })
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Dimension(format!("n must be >= 2, got {n}")));
    }
    Ok(())
}

/// Analytic phantom families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    /// `exp(-|y - c|² / s²)`.
    Gaussian,
    /// `exp(-1 / (1 - |y - c|²/s²))` inside the ball of radius `s`, zero outside.
    Bump,
    /// `y_n · exp(-|y - c|² / s²)`.
    MonomialTimesGaussian,
}

impl std::str::FromStr for PhantomKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "bump" => Ok(Self::Bump),
            "monomial_times_gaussian" | "monomial" => Ok(Self::MonomialTimesGaussian),
            other => Err(invalid("phantom", format!("unknown phantom kind `{other}`"))),
        }
    }
}

/// Gaussian tails are cut at this many scale lengths (`e^{-64} < 1e-16`).
const GAUSSIAN_RADII: f64 = 8.0;

/// Builds one of the analytic phantoms on the requested domain.
pub fn make_test_field<T: Scalar>(
    kind: PhantomKind,
    center: &Point<T>,
    scale: T,
    domain: Domain,
) -> Result<ScalarField<T>> {
    let n = center.dim();
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(invalid("scale", format!("must be positive, got {scale}")));
    }
    let c: Coords<T> = SmallVec::from_slice(center.coords());
    let inv_s2 = (scale * scale).recip();
    let radius = match kind {
        PhantomKind::Bump => scale,
        _ => scale * T::of(GAUSSIAN_RADII),
    };
    if kind == PhantomKind::Bump && domain == Domain::HalfSpace && !(center.xn() - scale > T::zero()) {
        return Err(invalid(
            "center",
            "bump support must lie strictly inside the half-space y_n > 0",
        ));
    }
    let bbox: Vec<Interval<T>> = c
        .iter()
        .map(|&ci| Interval::new(ci - radius, ci + radius))
        .collect();
    // chord of the support ball above x'
    let cc = c.clone();
    let chord = move |xp: &[T]| {
        let d2 = xp.iter().zip(cc.iter()).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        let h2 = radius * radius - d2;
        if !(h2 > T::zero()) {
            return Interval::new(T::zero(), T::zero());
        }
        let cn = cc[cc.len() - 1];
        Interval::new(cn - h2.sqrt(), cn + h2.sqrt())
    };
    let mut support = Support::boxed(bbox).with_fiber(Arc::new(chord)).with_scale(scale);
    if domain == Domain::HalfSpace {
        support = support.clip_last_below(T::zero());
    }
    let dist2 = move |x: &Point<T>| {
        x.coords()
            .iter()
            .zip(c.iter())
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    };
    match kind {
        PhantomKind::Gaussian => ScalarField::new(n, domain, support, move |x| Ok((-dist2(x) * inv_s2).exp())),
        PhantomKind::Bump => ScalarField::new(n, domain, support, move |x| {
            let t = dist2(x) * inv_s2;
            Ok(if t < T::one() {
                (-(T::one() - t).recip()).exp()
            } else {
                T::zero()
            })
        }),
        PhantomKind::MonomialTimesGaussian => ScalarField::new(n, domain, support, move |x| {
            Ok(x.xn() * (-dist2(x) * inv_s2).exp())
        }),
    }
}

/// Pointwise evaluation on every grid node; no interpolation.
pub fn sample_on_grid<T: Scalar>(field: &ScalarField<T>, grid: &Grid<T>) -> Result<ArrayD<T>> {
    if grid.dim() != field.dim() {
        return Err(Error::Dimension(format!(
            "grid has {} axes, field lives on R^{}",
            grid.dim(),
            field.dim()
        )));
    }
    let values = grid
        .nodes()
        .into_par_iter()
        .map(|c| field.eval(&Point::from_smallvec(c)))
        .collect::<Result<Vec<T>>>()?;
    Ok(grid.reshape(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_coords(c).unwrap()
    }

    #[test]
    fn gaussian_values() {
        let g = make_test_field(PhantomKind::Gaussian, &p(&[0.0, 0.0]), 1.0, Domain::FullSpace).unwrap();
        assert_eq!(g.eval(&p(&[0.0, 0.0])).unwrap(), 1.0);
        let g3 = make_test_field(PhantomKind::Gaussian, &p(&[0.0, 0.0, 0.0]), 1.0, Domain::FullSpace).unwrap();
        assert!((g3.eval(&p(&[1.0, 0.0, 0.0])).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bump_vanishes_on_boundary_of_support() {
        let b = make_test_field(PhantomKind::Bump, &p(&[0.0, 1.0]), 0.5, Domain::HalfSpace).unwrap();
        assert_eq!(b.eval(&p(&[0.0, 1.5])).unwrap(), 0.0);
        assert!((b.eval(&p(&[0.0, 1.0])).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bump_touching_boundary_is_rejected() {
        let err = make_test_field(PhantomKind::Bump, &p(&[0.0, 0.5]), 0.5, Domain::HalfSpace);
        assert!(err.is_err());
        assert!(make_test_field(PhantomKind::Gaussian, &p(&[0.0, 0.0]), 0.0, Domain::FullSpace).is_err());
    }

    #[test]
    fn monomial_times_gaussian_value() {
        let m = make_test_field(
            PhantomKind::MonomialTimesGaussian,
            &p(&[0.0, 0.0]),
            1.0,
            Domain::HalfSpace,
        )
        .unwrap();
        assert!((m.eval(&p(&[0.0, 1.0])).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn half_space_rejects_lower_points() {
        let m = make_test_field(PhantomKind::Gaussian, &p(&[0.0, 1.0]), 1.0, Domain::HalfSpace).unwrap();
        assert!(matches!(m.eval(&p(&[0.0, 0.0])), Err(Error::OutsideHalfSpace { .. })));
    }

    #[test]
    fn grid_sampling() {
        let g = make_test_field(PhantomKind::Gaussian, &p(&[0.0, 0.0]), 1.0, Domain::FullSpace).unwrap();
        let grid = Grid::new(vec![(-1.0, 1.0, 3), (-1.0, 1.0, 3)]).unwrap();
        let a = sample_on_grid(&g, &grid).unwrap();
        assert!((a[[0, 0]] - (-2.0f64).exp()).abs() < 1e-15);
        for node in grid.nodes() {
            let i: Vec<usize> = node.iter().map(|&x| (x + 1.0) as usize).collect();
            assert_eq!(a[[i[0], i[1]]].to_bits(), g.eval(&Point::from_smallvec(node)).unwrap().to_bits());
        }
        let z = ScalarField::<f64>::zero(2, Domain::FullSpace).unwrap();
        assert!(sample_on_grid(&z, &grid).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_below_half_space_is_an_error() {
        let m = make_test_field(PhantomKind::Gaussian, &p(&[0.0, 1.0]), 1.0, Domain::HalfSpace).unwrap();
        let grid = Grid::new(vec![(-1.0, 1.0, 3), (-1.0, 1.0, 3)]).unwrap();
        assert!(sample_on_grid(&m, &grid).is_err());
    }

    #[test]
    fn memoized_field_matches() {
        let g = make_test_field(PhantomKind::Gaussian, &p(&[0.3, 0.0]), 0.7, Domain::FullSpace).unwrap();
        let m = g.memoized();
        for x in [[0.1, 0.2], [0.1, 0.2], [-1.0, 0.5]] {
            assert_eq!(m.eval(&p(&x)).unwrap().to_bits(), g.eval(&p(&x)).unwrap().to_bits());
        }
    }

    #[test]
    fn profile_rejects_nonpositive_radius() {
        let prof = SphereProfile::<f64>::new(2, Support::everywhere(2), |_, r| Ok(r)).unwrap();
        assert!(prof.eval(&[0.0], 0.0).is_err());
        assert_eq!(prof.eval(&[0.0], 2.0).unwrap(), 2.0);
    }
}
