//! Lebesgue, weighted and mixed norms, the admissibility relation, and
//! scaling scans of the transform-to-input norm ratio.
//!
//! All norms are iterated integrals: an outer tensor rule over `x'` (a tan
//! map on unbounded axes) and an inner rule over the support fiber in the
//! last coordinate.

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::factorizations::{apply, scaling_exponents, Field, OpTag, OperatorId};
use crate::field::{Domain, ScalarField, Support};
use crate::point::{Coords, Point};
use crate::quadrature::{Interval, QuadratureSpec, Rule};
use crate::scalar::Scalar;
use crate::transforms::{parabolic_field, sonar_profile, transversal_field, ParabolicVariant};

/// Weight for [`lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpWeight {
    None,
    /// `y_n^{1-p}` on the half-space.
    HalfSpace,
}

/// Weight for [`mixed_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedWeight {
    None,
    /// `r^{1-s}` in the radius of a sphere profile.
    Profile,
}

/// Exponents `(p, q, s)` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedNormTriple {
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub n: usize,
}

impl MixedNormTriple {
    pub fn new(p: f64, q: f64, s: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Dimension(format!("n must be >= 2, got {n}")));
        }
        for (name, v) in [("p", p), ("q", q), ("s", s)] {
            if !(v >= 1.0) {
                return Err(invalid(name, format!("must be >= 1, got {v}")));
            }
        }
        Ok(Self { p, q, s, n })
    }

    /// The triple determined by `p`; see [`admissible`].
    pub fn from_p(p: f64, n: usize) -> Self {
        let (q, s, _) = admissible(p, n);
        Self { p, q, s, n }
    }

    pub fn is_admissible(&self) -> bool {
        let (q, s, valid) = admissible(self.p, self.n);
        valid && close(q, self.q) && close(s, self.s)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

/// `q = p'`, `1/s = 1 - n/p'`; valid iff `1 <= p < n/(n-1)`.
pub fn admissible(p: f64, n: usize) -> (f64, f64, bool) {
    let nf = n as f64;
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let inv_s = 1.0 - nf * (1.0 - 1.0 / p);
    let s = 1.0 / inv_s;
    let valid = n >= 2 && p >= 1.0 && p < nf / (nf - 1.0);
    (q, s, valid)
}

/// Nodes of the inner rule on `iv`. A singular power weight at a zero
/// endpoint is handled with geometrically graded panels. Intervals straddling
/// zero are split there, since the half-space operators leave a kink at
/// `t = 0`.
fn inner_nodes<T: Scalar>(rule: &Rule<T>, iv: Interval<T>, scale: T, singular_at_zero: bool) -> Vec<(T, T)> {
    if iv.lo < T::zero() && iv.hi > T::zero() {
        let mut out = rule.interval_nodes(Interval::new(iv.lo, T::zero()), scale);
        out.extend(inner_nodes(rule, Interval::new(T::zero(), iv.hi), scale, singular_at_zero));
        return out;
    }
    if !(singular_at_zero && iv.lo <= T::zero() && iv.hi.is_finite()) {
        if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.is_empty() {
            return rule.interval_nodes(iv, scale);
        }
        // t = lo + v²: fibers produced by Q₁ start on the paraboloid with a
        // square-root onset
        let two = T::of(2.0);
        let top = (iv.hi - iv.lo).sqrt();
        return rule
            .interval_nodes(Interval::new(T::zero(), top), scale)
            .into_iter()
            .map(|(v, w)| (iv.lo + v * v, two * v * w))
            .collect();
    }
    const LEVELS: i32 = 40;
    let mut out = Vec::new();
    let mut hi = iv.hi;
    for _ in 0..LEVELS {
        let lo = hi / T::of(2.0);
        out.extend(rule.interval_nodes(Interval::new(lo, hi), scale));
        hi = lo;
    }
    out.extend(rule.interval_nodes(Interval::new(T::zero(), hi), scale));
    out
}

/// Outer nodes over the `x'` box (tensor product, tan map on infinite axes).
fn outer_nodes<T: Scalar>(rule: &Rule<T>, support: &Support<T>) -> Vec<(Coords<T>, T)> {
    let axes: Vec<Vec<(T, T)>> = support
        .xprime_box()
        .iter()
        .map(|&iv| rule.interval_nodes(iv, support.scale()))
        .collect();
    let mut out = vec![(Coords::<T>::new(), T::one())];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for (c, w) in &out {
            for &(x, wx) in axis {
                let mut c2 = c.clone();
                c2.push(x);
                next.push((c2, *w * wx));
            }
        }
        out = next;
    }
    out
}

/// `(∫ [∫ |f(x', t)|^s w(t) dt]^{q/s} dx')^{1/q}` where `w(t) = t^{weight_exp}`
/// (`weight_exp = 0` for no weight). `q = ∞` takes the sup over `x'`.
fn iterated_norm<T, F>(
    f: &F,
    support: &Support<T>,
    q: T,
    s: T,
    weight_exp: T,
    spec: &QuadratureSpec<T>,
) -> Result<T>
where
    T: Scalar,
    F: Fn(&[T], T) -> Result<T> + Sync,
{
    let rule = spec.rule();
    let singular = weight_exp < T::zero();
    let outer = outer_nodes(rule, support);
    let inner = |xp: &[T]| -> Result<T> {
        let fib = support.fiber(xp);
        if fib.is_empty() {
            return Ok(T::zero());
        }
        let mut acc = T::zero();
        for (t, w) in inner_nodes(rule, fib, support.scale(), singular) {
            let v = f(xp, t)?;
            if !v.is_finite() {
                let mut node: Vec<f64> = xp.iter().map(|c| c.as_f64()).collect();
                node.push(t.as_f64());
                return Err(Error::NonFinite { node });
            }
            if v == T::zero() {
                continue;
            }
            let mut term = v.abs().powf(s) * w;
            if weight_exp != T::zero() {
                term = term * t.powf(weight_exp);
            }
            acc = acc + term;
        }
        Ok(acc)
    };
    let values: Vec<(T, T)> = outer
        .par_iter()
        .map(|(xp, w)| Ok((inner(xp)?, *w)))
        .collect::<Result<_>>()?;
    if q.is_infinite() {
        let sup = values.into_iter().fold(T::zero(), |m, (v, _)| m.max(v));
        return Ok(sup.powf(T::one() / s));
    }
    let total: T = values.into_iter().map(|(v, w)| v.powf(q / s) * w).sum();
    Ok(total.powf(T::one() / q))
}

fn check_exponent<T: Scalar>(name: &'static str, v: T, allow_inf: bool) -> Result<()> {
    if !(v >= T::one()) || (!allow_inf && v.is_infinite()) {
        return Err(invalid(name, format!("must be >= 1 and finite, got {v}")));
    }
    Ok(())
}

fn field_fn<T: Scalar>(field: &ScalarField<T>) -> impl Fn(&[T], T) -> Result<T> + Sync + '_ {
    move |xp: &[T], t: T| {
        let mut c: Coords<T> = SmallVec::from_slice(xp);
        c.push(t);
        field.eval(&Point::from_coords(&c)?)
    }
}

/// Half-space fields are integrated over `y_n > 0` only.
fn effective_support<T: Scalar>(support: &Support<T>, domain: Domain) -> Support<T> {
    match domain {
        Domain::HalfSpace => support.clone().clip_last_below(T::zero()),
        Domain::FullSpace => support.clone(),
    }
}

/// `‖f‖_p`, or `‖φ‖~_p = (∫ |φ|^p y_n^{1-p} dy)^{1/p}` on the half-space.
pub fn lp_norm<T: Scalar>(field: &ScalarField<T>, p: T, weight: LpWeight, spec: &QuadratureSpec<T>) -> Result<T> {
    check_exponent("p", p, false)?;
    if weight == LpWeight::HalfSpace && field.domain() != Domain::HalfSpace {
        return Err(Error::DomainMismatch("the y_n^(1-p) weight needs a half-space field".into()));
    }
    let support = effective_support(field.support(), field.domain());
    let wexp = match weight {
        LpWeight::None => T::zero(),
        LpWeight::HalfSpace => T::one() - p,
    };
    iterated_norm(&field_fn(field), &support, p, p, wexp, spec)
}

/// `‖F‖_{q,s}`: inner `L^s` in the last coordinate (or radius), outer `L^q`
/// in `x'`. With [`MixedWeight::Profile`] the inner integral carries `r^{1-s}`.
pub fn mixed_norm<T: Scalar>(data: &Field<T>, q: T, s: T, weight: MixedWeight, spec: &QuadratureSpec<T>) -> Result<T> {
    check_exponent("q", q, true)?;
    check_exponent("s", s, false)?;
    let wexp = match weight {
        MixedWeight::None => T::zero(),
        MixedWeight::Profile => T::one() - s,
    };
    match data {
        Field::Scalar(f) => {
            if weight == MixedWeight::Profile {
                return Err(Error::DomainMismatch("the r^(1-s) weight needs a sphere profile".into()));
            }
            let support = effective_support(f.support(), f.domain());
            iterated_norm(&field_fn(f), &support, q, s, wexp, spec)
        }
        Field::Profile(p) => {
            let f = |xp: &[T], r: T| p.eval(xp, r);
            let support = p.support().clone().clip_last_below(T::zero());
            iterated_norm(&f, &support, q, s, wexp, spec)
        }
        Field::Planes(_) => Err(Error::DomainMismatch("mixed norms are not defined on hyperplane functions".into())),
    }
}

/// Transform examined by [`scaling_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanTransform {
    Transversal,
    Parabolic,
    Sonar,
}

impl std::str::FromStr for ScanTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T" => Ok(Self::Transversal),
            "P" => Ok(Self::Parabolic),
            "H" => Ok(Self::Sonar),
            _ => Err(invalid("transform", format!("expected T, P or H, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow<T> {
    pub lambda: (f64, f64),
    /// Norm of the transformed dilate.
    pub numerator: T,
    /// Norm of the dilate.
    pub denominator: T,
    pub ratio: T,
    /// `λ₁^{e₁} λ₂^{e₂}` with `e` the difference of the exponent pairs;
    /// `1` for sonar rows, where the pair does not apply.
    pub predicted_factor: f64,
}

/// `max ratio / min ratio` over a scan.
pub fn ratio_variation<T: Scalar>(rows: &[ScanRow<T>]) -> T {
    let (lo, hi) = rows.iter().fold((T::infinity(), T::zero()), |(lo, hi), r| {
        (lo.min(r.ratio), hi.max(r.ratio))
    });
    hi / lo
}

/// Dilates a half-space field: `y ↦ φ(λ₁y', λ₂y_n)`.
fn dilate_half<T: Scalar>(phi: &ScalarField<T>, l1: f64, l2: f64) -> Result<ScalarField<T>> {
    let lifted = apply(&OpTag::EMinus.into(), &phi.clone().into())?;
    let scaled = apply(&OperatorId::scaled(OpTag::ALam, l1, l2)?, &lifted)?;
    Ok(apply(&OpTag::RPlus.into(), &scaled)?.as_scalar()?.clone())
}

/// For each `λ`, the ratio `‖Transform(A_λ base)‖ / ‖A_λ base‖`: mixed
/// `(q, s)` over `L^p` for `T` and `P`; the weighted pair `‖·‖~_{q,s}` over
/// `‖·‖~_p` for `H`, whose base lives on the half-space.
pub fn scaling_scan<T: Scalar>(
    transform: ScanTransform,
    triple: &MixedNormTriple,
    lambdas: &[(f64, f64)],
    base: &ScalarField<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Vec<ScanRow<T>>> {
    if base.dim() != triple.n {
        return Err(Error::Dimension("base field and triple dimensions differ".into()));
    }
    let want = if transform == ScanTransform::Sonar {
        Domain::HalfSpace
    } else {
        Domain::FullSpace
    };
    if base.domain() != want {
        return Err(Error::DomainMismatch(format!("{transform:?} scan needs a {want:?} base field")));
    }
    let (p, q, s) = (T::of(triple.p), T::of(triple.q), T::of(triple.s));
    let (lhs, rhs) = scaling_exponents(triple.p, triple.q, triple.n);
    let (e1, e2) = (lhs.0 - rhs.0, lhs.1 - rhs.1);
    lambdas
        .iter()
        .map(|&(l1, l2)| {
            let (num, den) = match transform {
                ScanTransform::Transversal | ScanTransform::Parabolic => {
                    let f = apply(&OperatorId::scaled(OpTag::ALam, l1, l2)?, &base.clone().into())?;
                    let f = f.as_scalar()?;
                    let out = if transform == ScanTransform::Transversal {
                        transversal_field(f, spec)?
                    } else {
                        parabolic_field(f, spec, ParabolicVariant::Full)?
                    };
                    (
                        mixed_norm(&out.into(), q, s, MixedWeight::None, spec)?,
                        lp_norm(f, p, LpWeight::None, spec)?,
                    )
                }
                ScanTransform::Sonar => {
                    let f = dilate_half(base, l1, l2)?;
                    let h = sonar_profile(&f, spec)?;
                    (
                        mixed_norm(&h.into(), q, s, MixedWeight::Profile, spec)?,
                        lp_norm(&f, p, LpWeight::HalfSpace, spec)?,
                    )
                }
            };
            let predicted_factor = if transform == ScanTransform::Sonar {
                1.0
            } else {
                l1.powf(e1) * l2.powf(e2)
            };
            Ok(ScanRow {
                lambda: (l1, l2),
                numerator: num,
                denominator: den,
                ratio: num / den,
                predicted_factor,
            })
        })
        .collect()
}

/// `‖Hφ‖~_{q,s}` predicted by the weighted factorization
/// `2^{(1-n)/q - 1/s} ‖TQ₁φ‖_{q,s}`.
pub fn sonar_norm_via_transversal<T: Scalar>(
    phi: &ScalarField<T>,
    q: T,
    s: T,
    spec: &QuadratureSpec<T>,
) -> Result<T> {
    let n = T::of_usize(phi.dim());
    let q1 = apply(&OpTag::Q1.into(), &phi.clone().into())?;
    let t = transversal_field(q1.as_scalar()?, spec)?;
    let factor = T::of(2.0).powf((T::one() - n) / q - T::one() / s);
    Ok(factor * mixed_norm(&t.into(), q, s, MixedWeight::None, spec)?)
}
