//! Change-of-variable operators and the identity verifier.
//!
//! Chains are written in composition order: `[B2, T, B1]` means `B₂∘T∘B₁`,
//! so the last stage is applied first.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::field::{Domain, ScalarField, SphereProfile, Support};
use crate::point::{norm_sqr, Coords, Point};
use crate::quadrature::{Interval, QuadratureSpec};
use crate::scalar::Scalar;
use crate::transforms::{
    classical_r, lambda_point, parabolic_field, sonar_profile, transversal_field, ParabolicVariant, RadonPlane,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpTag {
    A,
    AInv,
    B1,
    B1Inv,
    B2,
    B2Inv,
    Q1,
    Q1Inv,
    Q2,
    Q2Inv,
    EMinus,
    RPlus,
    ALam,
    BLam,
    Lambda,
}

impl OpTag {
    pub const ALL: [OpTag; 15] = [
        OpTag::A,
        OpTag::AInv,
        OpTag::B1,
        OpTag::B1Inv,
        OpTag::B2,
        OpTag::B2Inv,
        OpTag::Q1,
        OpTag::Q1Inv,
        OpTag::Q2,
        OpTag::Q2Inv,
        OpTag::EMinus,
        OpTag::RPlus,
        OpTag::ALam,
        OpTag::BLam,
        OpTag::Lambda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpTag::A => "A",
            OpTag::AInv => "A_inv",
            OpTag::B1 => "B1",
            OpTag::B1Inv => "B1_inv",
            OpTag::B2 => "B2",
            OpTag::B2Inv => "B2_inv",
            OpTag::Q1 => "Q1",
            OpTag::Q1Inv => "Q1_inv",
            OpTag::Q2 => "Q2",
            OpTag::Q2Inv => "Q2_inv",
            OpTag::EMinus => "e_minus",
            OpTag::RPlus => "r_plus",
            OpTag::ALam => "A_lam",
            OpTag::BLam => "B_lam",
            OpTag::Lambda => "Lambda",
        }
    }

    pub fn is_scaled(self) -> bool {
        matches!(self, OpTag::ALam | OpTag::BLam)
    }

    /// The inverse tag, where the inverse is itself one of the operators.
    pub fn inverse(self) -> Option<OpTag> {
        Some(match self {
            OpTag::A => OpTag::AInv,
            OpTag::AInv => OpTag::A,
            OpTag::B1 => OpTag::B1Inv,
            OpTag::B1Inv => OpTag::B1,
            OpTag::B2 => OpTag::B2Inv,
            OpTag::B2Inv => OpTag::B2,
            OpTag::Q1 => OpTag::Q1Inv,
            OpTag::Q1Inv => OpTag::Q1,
            OpTag::Q2 => OpTag::Q2Inv,
            OpTag::Q2Inv => OpTag::Q2,
            _ => return None,
        })
    }
}

impl fmt::Display for OpTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpTag::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid("operator", format!("unknown operator '{s}'")))
    }
}

/// An operator tag with its scaling parameters, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorId {
    tag: OpTag,
    lambda: Option<(f64, f64)>,
}

impl OperatorId {
    pub fn new(tag: OpTag) -> Result<Self> {
        if tag.is_scaled() {
            return Err(invalid("lambda", format!("{tag} needs scaling parameters")));
        }
        Ok(Self { tag, lambda: None })
    }

    pub fn scaled(tag: OpTag, l1: f64, l2: f64) -> Result<Self> {
        if !tag.is_scaled() {
            return Err(invalid("lambda", format!("{tag} takes no scaling parameters")));
        }
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(invalid("lambda", format!("components must be positive, got ({l1}, {l2})")));
        }
        Ok(Self {
            tag,
            lambda: Some((l1, l2)),
        })
    }

    pub fn tag(&self) -> OpTag {
        self.tag
    }

    pub fn lambda(&self) -> Option<(f64, f64)> {
        self.lambda
    }
}

impl From<OpTag> for OperatorId {
    /// Panics for the scaled tags; use [`OperatorId::scaled`] for those.
    fn from(tag: OpTag) -> Self {
        Self::new(tag).expect("scaled operators need parameters")
    }
}

/// A function on a hyperplane family `(θ, t)`; the codomain of `Λ` and `R`.
#[derive(Clone)]
pub struct PlaneFunction<T> {
    n: usize,
    eval: Arc<dyn Fn(&RadonPlane<T>) -> Result<T> + Send + Sync>,
}

impl<T: Scalar> PlaneFunction<T> {
    pub fn new<F>(n: usize, eval: F) -> Self
    where
        F: Fn(&RadonPlane<T>) -> Result<T> + Send + Sync + 'static,
    {
        Self { n, eval: Arc::new(eval) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, plane: &RadonPlane<T>) -> Result<T> {
        if plane.dim() != self.n {
            return Err(Error::Dimension("plane dimension mismatch".into()));
        }
        (self.eval)(plane)
    }
}

/// Anything an operator or transform can consume or produce.
#[derive(Clone)]
pub enum Field<T> {
    Scalar(ScalarField<T>),
    Profile(SphereProfile<T>),
    Planes(PlaneFunction<T>),
}

/// Type of a [`Field`], used to check chains before evaluating them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Full,
    Half,
    Profile,
    Planes,
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Full => "field on R^n",
            FieldKind::Half => "field on the half-space",
            FieldKind::Profile => "sphere profile",
            FieldKind::Planes => "hyperplane function",
        })
    }
}

impl<T: Scalar> Field<T> {
    pub fn kind(&self) -> FieldKind {
        match self {
            Field::Scalar(f) if f.domain() == Domain::FullSpace => FieldKind::Full,
            Field::Scalar(_) => FieldKind::Half,
            Field::Profile(_) => FieldKind::Profile,
            Field::Planes(_) => FieldKind::Planes,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Field::Scalar(f) => f.dim(),
            Field::Profile(p) => p.dim(),
            Field::Planes(p) => p.dim(),
        }
    }

    /// Scalar fields take `x`, profiles take `(x', r)`, hyperplane functions
    /// take `(θ_1, …, θ_n, t)` with `θ` normalized before use.
    pub fn eval(&self, p: &Point<T>) -> Result<T> {
        match self {
            Field::Scalar(f) => f.eval(p),
            Field::Profile(f) => f.eval_point(p),
            Field::Planes(f) => {
                let c = p.coords();
                if c.len() != f.dim() + 1 {
                    return Err(Error::Dimension("hyperplane points are (theta, t)".into()));
                }
                f.eval(&RadonPlane::from_direction(&c[..c.len() - 1], c[c.len() - 1])?)
            }
        }
    }

    pub fn as_scalar(&self) -> Result<&ScalarField<T>> {
        match self {
            Field::Scalar(f) => Ok(f),
            _ => Err(Error::DomainMismatch(format!("expected a scalar field, got a {}", self.kind()))),
        }
    }

    pub fn as_profile(&self) -> Result<&SphereProfile<T>> {
        match self {
            Field::Profile(p) => Ok(p),
            _ => Err(Error::DomainMismatch(format!("expected a sphere profile, got a {}", self.kind()))),
        }
    }
}

impl<T: Scalar> From<ScalarField<T>> for Field<T> {
    fn from(f: ScalarField<T>) -> Self {
        Field::Scalar(f)
    }
}

impl<T: Scalar> From<SphereProfile<T>> for Field<T> {
    fn from(p: SphereProfile<T>) -> Self {
        Field::Profile(p)
    }
}

impl<T: Scalar> From<PlaneFunction<T>> for Field<T> {
    fn from(p: PlaneFunction<T>) -> Self {
        Field::Planes(p)
    }
}

fn empty<T: Scalar>() -> Interval<T> {
    Interval::new(T::zero(), T::zero())
}

/// Range of `|x'|²` over a box.
fn sq_range<T: Scalar>(bx: &[Interval<T>]) -> Interval<T> {
    let (mut lo, mut hi) = (T::zero(), T::zero());
    for iv in bx {
        let far = iv.lo.abs().max(iv.hi.abs());
        let near = if iv.contains(T::zero()) {
            T::zero()
        } else {
            iv.lo.abs().min(iv.hi.abs())
        };
        lo = lo + near * near;
        hi = hi + far * far;
    }
    Interval::new(lo, hi)
}

/// Interval sum that keeps infinite ends infinite.
fn add<T: Scalar>(a: Interval<T>, b: Interval<T>) -> Interval<T> {
    Interval::new(a.lo + b.lo, a.hi + b.hi)
}

fn neg<T: Scalar>(a: Interval<T>) -> Interval<T> {
    Interval::new(-a.hi, -a.lo)
}

fn scale_box<T: Scalar>(bx: &[Interval<T>], a: T) -> Vec<Interval<T>> {
    bx.iter().map(|iv| iv.scale(a)).collect()
}

fn scaled_vec<T: Scalar>(v: &[T], a: T) -> Coords<T> {
    v.iter().map(|&c| c * a).collect()
}

/// Derived support: new x'-box, new last axis, and a fiber computed from the
/// input's fiber above the mapped `x'`.
fn derive_support<T, M, F>(input: &Support<T>, xbox: Vec<Interval<T>>, last: Interval<T>, xmap: M, fmap: F) -> Support<T>
where
    T: Scalar,
    M: Fn(&[T]) -> Coords<T> + Send + Sync + 'static,
    F: Fn(&[T], Interval<T>) -> Interval<T> + Send + Sync + 'static,
{
    let mut bbox = xbox;
    let scale = input.scale();
    bbox.push(last);
    let inner = input.clone();
    let fiber = move |xp: &[T]| {
        let f = inner.fiber(&xmap(xp));
        if f.is_empty() {
            return empty();
        }
        fmap(xp, f)
    };
    Support::boxed(bbox).with_fiber(Arc::new(fiber)).with_scale(scale)
}

fn need(field: &Field<impl Scalar>, kind: FieldKind, op: OpTag) -> Result<()> {
    if field.kind() != kind {
        return Err(Error::DomainMismatch(format!(
            "{op} consumes a {kind}, got a {}",
            field.kind()
        )));
    }
    Ok(())
}

/// Input and output kinds of an operator.
pub fn signature(tag: OpTag) -> (FieldKind, FieldKind) {
    use FieldKind::*;
    match tag {
        OpTag::A | OpTag::AInv => (Half, Half),
        OpTag::B1 | OpTag::B1Inv | OpTag::B2 | OpTag::B2Inv => (Full, Full),
        OpTag::Q1 => (Half, Full),
        OpTag::Q1Inv => (Full, Half),
        OpTag::Q2 => (Full, Profile),
        OpTag::Q2Inv => (Profile, Full),
        OpTag::EMinus => (Half, Full),
        OpTag::RPlus => (Full, Half),
        OpTag::ALam | OpTag::BLam => (Full, Full),
        OpTag::Lambda => (Full, Planes),
    }
}

/// Applies one operator lazily.
pub fn apply<T: Scalar>(op: &OperatorId, field: &Field<T>) -> Result<Field<T>> {
    let tag = op.tag();
    let (want, _) = signature(tag);
    need(field, want, tag)?;
    let n = field.dim();
    let two = T::of(2.0);
    let four = T::of(4.0);
    let half_space = |f: Coords<T>| Point::from_smallvec(f);
    Ok(match tag {
        OpTag::A => {
            let phi = field.as_scalar()?.clone();
            let s = phi.support();
            let xb = s.xprime_box().to_vec();
            let support = derive_support(s, xb, s.last_axis().square_nonneg(), SmallVec::from_slice, |_, f| {
                f.square_nonneg()
            });
            let inner = phi.raw();
            ScalarField::new(n, Domain::HalfSpace, support, move |z| {
                let zn = z.xn();
                let mut c: Coords<T> = SmallVec::from_slice(z.xprime());
                c.push(zn.sqrt());
                Ok(inner(&half_space(c))? / zn.sqrt())
            })?
            .into()
        }
        OpTag::AInv => {
            let big = field.as_scalar()?.clone();
            let s = big.support();
            let xb = s.xprime_box().to_vec();
            let support = derive_support(s, xb, s.last_axis().sqrt_nonneg(), SmallVec::from_slice, |_, f| {
                f.sqrt_nonneg()
            });
            let inner = big.raw();
            ScalarField::new(n, Domain::HalfSpace, support, move |x| {
                let xn = x.xn();
                let mut c: Coords<T> = SmallVec::from_slice(x.xprime());
                c.push(xn * xn);
                Ok(xn * inner(&half_space(c))?)
            })?
            .into()
        }
        OpTag::B1 | OpTag::B1Inv => {
            let f = field.as_scalar()?.clone();
            let sign = if tag == OpTag::B1 { T::one() } else { -T::one() };
            let s = f.support();
            let xb = s.xprime_box().to_vec();
            let r = sq_range(&xb);
            let last = if sign > T::zero() { add(s.last_axis(), r) } else { add(s.last_axis(), neg(r)) };
            let support = derive_support(s, xb, last, SmallVec::from_slice, move |xp, f| {
                f.shift(sign * norm_sqr(xp))
            });
            let inner = f.raw();
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                inner(&x.with_xn(x.xn() - sign * x.xprime_norm_sqr()))
            })?
            .into()
        }
        OpTag::B2 => {
            let big = field.as_scalar()?.clone();
            let s = big.support();
            let xb = scale_box(s.xprime_box(), T::one() / two);
            let last = add(s.last_axis(), sq_range(&xb));
            let support = derive_support(s, xb, last, move |xp| scaled_vec(xp, two), |xp, f| f.shift(norm_sqr(xp)));
            let inner = big.raw();
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                let mut c = scaled_vec(x.xprime(), two);
                c.push(x.xn() - x.xprime_norm_sqr());
                inner(&Point::from_smallvec(c))
            })?
            .into()
        }
        OpTag::B2Inv => {
            let v = field.as_scalar()?.clone();
            let s = v.support();
            let xb = scale_box(s.xprime_box(), two);
            let last = add(s.last_axis(), neg(sq_range(&xb).scale(T::one() / four)));
            let support = derive_support(s, xb, last, move |xp| scaled_vec(xp, T::one() / two), move |xp, f| {
                f.shift(-norm_sqr(xp) / four)
            });
            let inner = v.raw();
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                let mut c = scaled_vec(x.xprime(), T::one() / two);
                c.push(x.xn() + x.xprime_norm_sqr() / four);
                inner(&Point::from_smallvec(c))
            })?
            .into()
        }
        OpTag::Q1 => {
            let phi = field.as_scalar()?.clone();
            let s = phi.support();
            let xb = s.xprime_box().to_vec();
            let last = add(s.last_axis().square_nonneg(), sq_range(&xb));
            let support = derive_support(s, xb, last, SmallVec::from_slice, |xp, f| {
                f.square_nonneg().shift(norm_sqr(xp))
            });
            let inner = phi.raw();
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                let d = x.xn() - x.xprime_norm_sqr();
                if !(d > T::zero()) {
                    return Ok(T::zero());
                }
                let root = d.sqrt();
                Ok(inner(&x.with_xn(root))? / root)
            })?
            .into()
        }
        OpTag::Q1Inv => {
            let psi = field.as_scalar()?.clone();
            let s = psi.support();
            let xb = s.xprime_box().to_vec();
            let last = add(s.last_axis(), neg(sq_range(&xb))).sqrt_nonneg();
            let support = derive_support(s, xb, last, SmallVec::from_slice, |xp, f| {
                f.shift(-norm_sqr(xp)).sqrt_nonneg()
            })
            .clip_last_below(T::zero());
            let inner = psi.raw();
            ScalarField::new(n, Domain::HalfSpace, support, move |y| {
                let yn = y.xn();
                Ok(yn * inner(&y.with_xn(yn * yn + y.xprime_norm_sqr()))?)
            })?
            .into()
        }
        OpTag::Q2 => {
            let f = field.as_scalar()?.clone();
            let s = f.support();
            let xb = scale_box(s.xprime_box(), T::one() / two);
            let last = add(s.last_axis(), sq_range(&xb)).sqrt_nonneg();
            let support = derive_support(s, xb, last, move |xp| scaled_vec(xp, two), |xp, f| {
                f.shift(norm_sqr(xp)).sqrt_nonneg()
            });
            let inner = f.raw();
            SphereProfile::new(n, support, move |xp, r| {
                let mut c = scaled_vec(xp, two);
                c.push(r * r - norm_sqr(xp));
                Ok(r * inner(&Point::from_smallvec(c))?)
            })?
            .into()
        }
        OpTag::Q2Inv => {
            let big = field.as_profile()?.clone();
            let s = big.support();
            let xb = scale_box(s.xprime_box(), two);
            let last = add(s.last_axis().square_nonneg(), neg(sq_range(&xb).scale(T::one() / four)));
            let support = derive_support(s, xb, last, move |xp| scaled_vec(xp, T::one() / two), move |xp, f| {
                f.square_nonneg().shift(-norm_sqr(xp) / four)
            });
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                let d = x.xn() + x.xprime_norm_sqr() / four;
                if !(d > T::zero()) {
                    return Ok(T::zero());
                }
                let root = d.sqrt();
                Ok(big.eval(&scaled_vec(x.xprime(), T::one() / two), root)? / root)
            })?
            .into()
        }
        OpTag::EMinus => {
            let phi = field.as_scalar()?.clone();
            let support = phi.support().clone();
            let inner = phi.raw();
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                if x.xn() > T::zero() {
                    inner(x)
                } else {
                    Ok(T::zero())
                }
            })?
            .into()
        }
        OpTag::RPlus => {
            let f = field.as_scalar()?;
            let support = f.support().clone().clip_last_below(T::zero());
            f.retag(Domain::HalfSpace, support).into()
        }
        OpTag::ALam | OpTag::BLam => {
            let (l1, l2) = op.lambda().expect("scaled operator carries lambda");
            let (l1, l2) = (T::of(l1), T::of(l2));
            let f = field.as_scalar()?.clone();
            let s = f.support();
            // argument map x ↦ (a·x', l2·x_n), output multiplied by c
            let (a, c) = if tag == OpTag::ALam {
                (l1, T::one())
            } else {
                (l2 / l1, l1.powi(1 - n as i32))
            };
            let xb = scale_box(s.xprime_box(), T::one() / a);
            let last = s.last_axis().scale(T::one() / l2);
            let scale = s.scale() * a / l2;
            let support = derive_support(s, xb, last, move |xp| scaled_vec(xp, a), move |_, f| f.scale(T::one() / l2))
                .with_scale(scale);
            let inner = f.raw();
            ScalarField::new(n, Domain::FullSpace, support, move |x| {
                let mut p = scaled_vec(x.xprime(), a);
                p.push(l2 * x.xn());
                Ok(c * inner(&Point::from_smallvec(p))?)
            })?
            .into()
        }
        OpTag::Lambda => {
            let phi = field.as_scalar()?.clone();
            PlaneFunction::new(n, move |plane: &RadonPlane<T>| phi.eval(&lambda_point(plane)?)).into()
        }
    })
}

/// One link of a chain: an operator or a transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage {
    Op(OperatorId),
    Transversal,
    Parabolic(ParabolicVariant),
    Sonar,
    Classical,
}

impl From<OpTag> for Stage {
    fn from(tag: OpTag) -> Self {
        Stage::Op(tag.into())
    }
}

impl From<OperatorId> for Stage {
    fn from(op: OperatorId) -> Self {
        Stage::Op(op)
    }
}

impl Stage {
    pub fn signature(&self) -> (FieldKind, FieldKind) {
        use FieldKind::*;
        match self {
            Stage::Op(op) => signature(op.tag()),
            Stage::Transversal => (Full, Full),
            Stage::Parabolic(ParabolicVariant::Restricted) => (Full, Half),
            Stage::Parabolic(_) => (Full, Full),
            Stage::Sonar => (Half, Profile),
            Stage::Classical => (Full, Planes),
        }
    }

    pub fn apply<T: Scalar>(&self, field: &Field<T>, spec: &QuadratureSpec<T>) -> Result<Field<T>> {
        match self {
            Stage::Op(op) => apply(op, field),
            Stage::Transversal => Ok(transversal_field(field.as_scalar()?, spec)?.into()),
            Stage::Parabolic(v) => Ok(parabolic_field(field.as_scalar()?, spec, *v)?.into()),
            Stage::Sonar => Ok(sonar_profile(field.as_scalar()?, spec)?.into()),
            Stage::Classical => {
                let f = field.as_scalar()?.clone();
                if f.domain() != Domain::FullSpace {
                    return Err(Error::DomainMismatch("classical Radon transform needs a field on R^n".into()));
                }
                let spec = spec.clone();
                Ok(PlaneFunction::new(f.dim(), move |p: &RadonPlane<T>| classical_r(&f, p, &spec)).into())
            }
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Op(op) => match op.lambda() {
                Some((a, b)) => write!(f, "{}({a}, {b})", op.tag()),
                None => write!(f, "{}", op.tag()),
            },
            Stage::Transversal => f.write_str("T"),
            Stage::Parabolic(ParabolicVariant::Full) => f.write_str("P"),
            Stage::Parabolic(ParabolicVariant::Restricted) => f.write_str("P_restricted"),
            Stage::Parabolic(ParabolicVariant::SurfaceMeasure) => f.write_str("P_surface"),
            Stage::Sonar => f.write_str("H"),
            Stage::Classical => f.write_str("R"),
        }
    }
}

/// Checks that a chain composes starting from `input`; returns its output kind.
pub fn check_chain(chain: &[Stage], input: FieldKind) -> Result<FieldKind> {
    let mut kind = input;
    for stage in chain.iter().rev() {
        let (from, to) = stage.signature();
        if from != kind {
            return Err(Error::DomainMismatch(format!("{stage} consumes a {from} but receives a {kind}")));
        }
        kind = to;
    }
    Ok(kind)
}

/// Applies a chain (composition order) to `input`.
pub fn apply_chain<T: Scalar>(chain: &[Stage], input: &Field<T>, spec: &QuadratureSpec<T>) -> Result<Field<T>> {
    check_chain(chain, input.kind())?;
    let mut field = input.clone();
    for stage in chain.iter().rev() {
        field = stage.apply(&field, spec)?;
    }
    Ok(field)
}

/// Deviation between two chains over a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport<T> {
    pub max_abs_err: T,
    pub max_rel_err: T,
    pub worst_point: Point<T>,
    pub points_checked: usize,
    /// `max_rel_err <= tol`.
    pub within_tol: bool,
}

/// Relative error with a floor: values below `REL_FLOOR` times the largest
/// magnitude seen are compared absolutely against that floor.
pub const REL_FLOOR: f64 = 1e-10;

/// Evaluates both chains at every point and reports the worst deviation.
pub fn verify_identity<T: Scalar>(
    lhs: &[Stage],
    rhs: &[Stage],
    input: &Field<T>,
    points: &[Point<T>],
    tol: T,
    spec: &QuadratureSpec<T>,
) -> Result<IdentityReport<T>> {
    let kl = check_chain(lhs, input.kind())?;
    let kr = check_chain(rhs, input.kind())?;
    // a profile in (x', r) and a half-space field are compared pointwise
    let compatible = |k| if k == FieldKind::Profile { FieldKind::Half } else { k };
    if compatible(kl) != compatible(kr) {
        return Err(Error::DomainMismatch(format!("chains end in a {kl} and a {kr}")));
    }
    if points.is_empty() {
        return Err(invalid("points", "need at least one evaluation point"));
    }
    let fl = apply_chain(lhs, input, spec)?;
    let fr = apply_chain(rhs, input, spec)?;
    let values: Vec<(T, T)> = points
        .par_iter()
        .map(|p| Ok((fl.eval(p)?, fr.eval(p)?)))
        .collect::<Result<_>>()?;
    let (abs, rel, worst) = compare(&values);
    Ok(IdentityReport {
        max_abs_err: abs,
        max_rel_err: rel,
        worst_point: points[worst].clone(),
        points_checked: points.len(),
        within_tol: rel <= tol,
    })
}

/// `(max abs, max rel, index of worst rel)` over value pairs, with the
/// relative floor described at [`REL_FLOOR`].
pub fn compare<T: Scalar>(values: &[(T, T)]) -> (T, T, usize) {
    let big = values
        .iter()
        .fold(T::zero(), |m, &(a, b)| m.max(a.abs()).max(b.abs()));
    let floor = T::of(REL_FLOOR) * big;
    let mut abs = T::zero();
    let mut rel = T::zero();
    let mut worst = 0;
    for (i, &(a, b)) in values.iter().enumerate() {
        let d = (a - b).abs();
        let denom = a.abs().max(b.abs()).max(floor);
        let r = if denom > T::zero() { d / denom } else { T::zero() };
        abs = abs.max(d);
        if r > rel || (i == 0 && r.is_nan()) {
            rel = r;
            worst = i;
        }
        if r.is_nan() {
            rel = T::nan();
        }
    }
    (abs, rel, worst)
}

/// The factorization identities checked by the verifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Identity {
    /// `P = B₂∘T∘B₁`.
    ParabolicTransversal,
    /// `H = Q₂∘T∘Q₁`.
    SonarTransversal,
    /// `H = A⁻¹∘r₊∘P∘e₋∘A`.
    SonarParabolic,
    /// `T∘A_λ = B_λ∘T`.
    Scaling(f64, f64),
}

impl Identity {
    pub fn name(&self) -> &'static str {
        match self {
            Identity::ParabolicTransversal => "parabolic-transversal",
            Identity::SonarTransversal => "sonar-transversal",
            Identity::SonarParabolic => "sonar-parabolic",
            Identity::Scaling(..) => "scaling",
        }
    }

    /// Domain of the input field.
    pub fn input_domain(&self) -> Domain {
        match self {
            Identity::SonarTransversal | Identity::SonarParabolic => Domain::HalfSpace,
            _ => Domain::FullSpace,
        }
    }

    pub fn chains(&self) -> Result<(Vec<Stage>, Vec<Stage>)> {
        use OpTag::*;
        Ok(match *self {
            Identity::ParabolicTransversal => (
                vec![Stage::Parabolic(ParabolicVariant::Full)],
                vec![B2.into(), Stage::Transversal, B1.into()],
            ),
            Identity::SonarTransversal => (vec![Stage::Sonar], vec![Q2.into(), Stage::Transversal, Q1.into()]),
            Identity::SonarParabolic => (
                vec![Stage::Sonar],
                vec![
                    AInv.into(),
                    RPlus.into(),
                    Stage::Parabolic(ParabolicVariant::Full),
                    EMinus.into(),
                    A.into(),
                ],
            ),
            Identity::Scaling(l1, l2) => (
                vec![Stage::Transversal, OperatorId::scaled(ALam, l1, l2)?.into()],
                vec![OperatorId::scaled(BLam, l1, l2)?.into(), Stage::Transversal],
            ),
        })
    }

    pub fn verify<T: Scalar>(
        &self,
        input: &ScalarField<T>,
        points: &[Point<T>],
        tol: T,
        spec: &QuadratureSpec<T>,
    ) -> Result<IdentityReport<T>> {
        let (lhs, rhs) = self.chains()?;
        verify_identity(&lhs, &rhs, &input.clone().into(), points, tol, spec)
    }
}

impl FromStr for Identity {
    type Err = Error;

    /// Parses the descriptive names; `scaling` takes λ = (0.5, 2) unless
    /// written `scaling:l1,l2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("scaling") {
            let rest = rest.trim_start_matches(':');
            if rest.is_empty() {
                return Ok(Identity::Scaling(0.5, 2.0));
            }
            let parts: Vec<f64> = rest
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| invalid("identity", format!("bad scaling parameters in '{s}'")))?;
            if parts.len() != 2 || !(parts[0] > 0.0 && parts[1] > 0.0) {
                return Err(invalid("identity", format!("scaling needs two positive parameters, got '{s}'")));
            }
            return Ok(Identity::Scaling(parts[0], parts[1]));
        }
        match s {
            "parabolic-transversal" => Ok(Identity::ParabolicTransversal),
            "sonar-transversal" => Ok(Identity::SonarTransversal),
            "sonar-parabolic" => Ok(Identity::SonarParabolic),
            _ => Err(invalid("identity", format!("unknown identity '{s}'"))),
        }
    }
}

/// `(λ₁, λ₂)` exponents of both sides of the scaled inequality
/// `‖TA_λψ‖_q ≤ c‖A_λψ‖_p`: left `‖B_λΨ‖_q`, right `‖A_λψ‖_p`.
pub fn scaling_exponents(p: f64, q: f64, n: usize) -> ((f64, f64), (f64, f64)) {
    let nf = n as f64;
    let lhs = (1.0 - nf + (nf - 1.0) / q, -nf / q);
    let rhs = ((1.0 - nf) / p, -1.0 / p);
    (lhs, rhs)
}

/// Whether both exponent pairs agree within `1e-12`.
pub fn exponents_match(p: f64, q: f64, n: usize) -> bool {
    let (l, r) = scaling_exponents(p, q, n);
    (l.0 - r.0).abs() < 1e-12 && (l.1 - r.1).abs() < 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_test_field, PhantomKind};

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_coords(c).unwrap()
    }

    fn gauss_half() -> ScalarField<f64> {
        make_test_field(PhantomKind::Gaussian, &p(&[0.0, 1.0]), 1.0, Domain::HalfSpace).unwrap()
    }

    #[test]
    fn q1_direct_substitution() {
        let q = apply(&OpTag::Q1.into(), &gauss_half().into()).unwrap();
        assert!((q.eval(&p(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        // below the paraboloid the (.)_+ convention gives zero
        assert_eq!(q.eval(&p(&[1.0, 0.5])).unwrap(), 0.0);
    }

    #[test]
    fn b_lambda_direct_substitution() {
        let g: ScalarField<f64> = ScalarField::new(2, Domain::FullSpace, Support::everywhere(2), |x: &Point<f64>| {
            Ok((-norm_sqr(x.coords())).exp())
        })
        .unwrap();
        let op = OperatorId::scaled(OpTag::BLam, 2.0, 3.0).unwrap();
        let v = apply(&op, &g.into()).unwrap().eval(&p(&[1.0, 1.0])).unwrap();
        let want = 0.5 * (-11.25f64).exp();
        assert!((v - want).abs() <= 1e-15 * want);
    }

    #[test]
    fn a_rejects_lower_half() {
        let a = apply(&OpTag::A.into(), &gauss_half().into()).unwrap();
        assert!(matches!(a.eval(&p(&[0.0, -1.0])), Err(Error::OutsideHalfSpace { .. })));
    }

    #[test]
    fn operator_id_invariants() {
        assert!(OperatorId::new(OpTag::ALam).is_err());
        assert!(OperatorId::scaled(OpTag::A, 1.0, 1.0).is_err());
        assert!(OperatorId::scaled(OpTag::BLam, 0.0, 1.0).is_err());
        for t in OpTag::ALL {
            assert_eq!(t.name().parse::<OpTag>().unwrap(), t);
        }
    }

    #[test]
    fn chain_type_errors() {
        let f: Field<f64> = gauss_half().into();
        // B1 needs a full-space field
        let err = verify_identity(&[OpTag::B1.into()], &[OpTag::B1.into()], &f, &[p(&[0.0, 1.0])], 1e-6, &QuadratureSpec::default_for_dim(2));
        assert!(matches!(err, Err(Error::DomainMismatch(_))));
        assert!(check_chain(&[OpTag::Q2.into(), Stage::Transversal, OpTag::Q1.into()], FieldKind::Half).is_ok());
        assert!(check_chain(&[Stage::Sonar, Stage::Transversal], FieldKind::Full).is_err());
    }

    #[test]
    fn exponents() {
        assert!(exponents_match(1.5, 3.0, 2));
        assert!(exponents_match(4.0 / 3.0, 4.0, 3));
        assert!(!exponents_match(1.0, 3.0, 2));
        let (l, r) = scaling_exponents(1.0, 3.0, 2);
        assert!((l.1 + 2.0 / 3.0).abs() < 1e-15 && (r.1 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_names_round_trip() {
        for id in [
            Identity::ParabolicTransversal,
            Identity::SonarTransversal,
            Identity::SonarParabolic,
        ] {
            assert_eq!(id.name().parse::<Identity>().unwrap(), id);
        }
        assert_eq!("scaling:2,0.25".parse::<Identity>().unwrap(), Identity::Scaling(2.0, 0.25));
        assert!("scaling:2".parse::<Identity>().is_err());
    }

    #[test]
    fn compare_floor() {
        let (_, rel, _) = compare(&[(1.0, 1.0), (1e-14, 2e-14)]);
        assert!(rel < 1e-3);
        let (_, rel, w) = compare::<f64>(&[(1.0, 1.0), (0.5, 0.6)]);
        assert!((rel - 0.1 / 0.6).abs() < 1e-15 && w == 1);
        let (_, rel, _) = compare::<f64>(&[(0.0, 0.0)]);
        assert_eq!(rel, 0.0);
    }
}
