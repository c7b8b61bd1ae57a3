//! Forward transforms: sonar (hemispherical), parabolic, transversal and
//! classical Radon, plus the map relating the last two.
//!
//! Every integral is truncated to the support hint of its input mapped
//! through the integration chart, so the nodes sit where the integrand lives.

use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::field::{Domain, ScalarField, SphereProfile, Support};
use crate::point::{dot, norm_sqr, Coords, Point};
use crate::quadrature::{integrate_box, Interval, QuadratureSpec, SphereRule};
use crate::scalar::Scalar;

/// Hyperplane `{y : θ·y = t}` with unit normal `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonPlane<T> {
    theta: Coords<T>,
    t: T,
}

impl<T: Scalar> RadonPlane<T> {
    pub fn new(theta: &[T], t: T) -> Result<Self> {
        if theta.len() < 2 {
            return Err(Error::Dimension("plane normal needs n >= 2 components".into()));
        }
        let norm = norm_sqr(theta).sqrt();
        if (norm - T::one()).abs() > T::of(1e-12).max(T::epsilon() * T::of(16.0)) {
            return Err(invalid("theta", format!("normal must be a unit vector, |theta| = {norm}")));
        }
        Ok(Self {
            theta: SmallVec::from_slice(theta),
            t,
        })
    }

    /// Normalizes `theta` first.
    pub fn from_direction(theta: &[T], t: T) -> Result<Self> {
        let norm = norm_sqr(theta).sqrt();
        if !(norm > T::zero()) {
            return Err(invalid("theta", "zero direction"));
        }
        let unit: Coords<T> = theta.iter().map(|&c| c / norm).collect();
        Self::new(&unit, t)
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// Which integrand the parabolic transform uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParabolicVariant {
    /// `∫ f(x' - y', x_n - |y'|²) dy'`.
    Full,
    /// Same integrand restricted to `|y'| < √x_n`.
    Restricted,
    /// Full integrand weighted by the paraboloid's area element `(1 + 4|y'|²)^{1/2}`.
    SurfaceMeasure,
}

/// Orthonormal basis of the complement of the unit vector `e`, from the
/// Householder reflection mapping the first axis onto `∓e`.
pub(crate) fn orthonormal_complement<T: Scalar>(e: &[T]) -> Vec<Coords<T>> {
    let k = e.len();
    let sign = if e[0] >= T::zero() { T::one() } else { -T::one() };
    let mut v: Coords<T> = SmallVec::from_slice(e);
    v[0] = v[0] + sign;
    let vv = norm_sqr(&v);
    (1..k)
        .map(|j| {
            (0..k)
                .map(|i| {
                    let delta = if i == j { T::one() } else { T::zero() };
                    delta - T::of(2.0) * v[i] * v[j] / vv
                })
                .collect()
        })
        .collect()
}

/// Range of `a·y` over the box `bx`.
fn project_box<T: Scalar>(a: &[T], bx: &[Interval<T>]) -> Interval<T> {
    let mut lo = T::zero();
    let mut hi = T::zero();
    for (&ai, iv) in a.iter().zip(bx) {
        let (p, q) = (ai * iv.lo, ai * iv.hi);
        if ai == T::zero() {
            continue;
        }
        lo = lo + p.min(q);
        hi = hi + p.max(q);
    }
    Interval::new(lo, hi)
}

fn finite_or<T: Scalar>(iv: Interval<T>, r: T) -> Interval<T> {
    Interval::new(
        if iv.lo.is_finite() { iv.lo } else { -r },
        if iv.hi.is_finite() { iv.hi } else { r },
    )
}

fn bounded_box<T: Scalar>(field_support: &Support<T>, r: T) -> Vec<Interval<T>> {
    field_support.bbox().iter().map(|&iv| finite_or(iv, r)).collect()
}

fn check_point<T: Scalar>(n: usize, x: &Point<T>) -> Result<()> {
    if x.dim() != n {
        return Err(Error::Dimension(format!(
            "evaluation point of dimension {} for a transform on R^{n}",
            x.dim()
        )));
    }
    Ok(())
}

/// `(Tψ)(x) = ∫_{R^{n-1}} ψ(y', x'·y' + x_n) dy'`.
pub fn transversal_t<T: Scalar>(psi: &ScalarField<T>, x: &Point<T>, spec: &QuadratureSpec<T>) -> Result<T> {
    let n = psi.dim();
    check_point(n, x)?;
    if psi.domain() != Domain::FullSpace {
        return Err(Error::DomainMismatch("transversal transform needs a field on R^n".into()));
    }
    if let Some(terms) = psi.terms() {
        return terms.iter().try_fold(T::zero(), |acc, (c, g)| Ok(acc + *c * transversal_t(g, x, spec)?));
    }
    let bx = bounded_box(psi.support(), spec.r_max);
    let (bxp, last) = (&bx[..n - 1], bx[n - 1]);
    let slope = x.xprime();
    let b = x.xn();
    let a = norm_sqr(slope).sqrt();
    let eval = psi.raw();
    let rule = spec.rule();
    if n == 2 {
        let mut iv = bxp[0];
        if a > T::zero() {
            let (p, q) = ((last.lo - b) / slope[0], (last.hi - b) / slope[0]);
            iv = iv.intersect(&Interval::new(p.min(q), p.max(q)));
        } else if !last.contains(b) {
            return Ok(T::zero());
        }
        if iv.is_empty() {
            return Ok(T::zero());
        }
        return rule.integrate(iv.lo, iv.hi, |y| {
            eval(&Point::from_smallvec(smallvec::smallvec![y, slope[0] * y + b]))
        });
    }
    if a == T::zero() {
        if !last.contains(b) {
            return Ok(T::zero());
        }
        let lo: Coords<T> = bxp.iter().map(|iv| iv.lo).collect();
        let hi: Coords<T> = bxp.iter().map(|iv| iv.hi).collect();
        return integrate_box(&lo, &hi, rule, |yp| {
            let mut c: Coords<T> = SmallVec::from_slice(yp);
            c.push(b);
            eval(&Point::from_smallvec(c))
        });
    }
    // rotate y' so that the first axis runs along the slope x'
    let e: Coords<T> = slope.iter().map(|&c| c / a).collect();
    let mut basis = vec![e.clone()];
    basis.extend(orthonormal_complement(&e));
    let s_iv = project_box(&e, bxp).intersect(&Interval::new((last.lo - b) / a, (last.hi - b) / a));
    if s_iv.is_empty() {
        return Ok(T::zero());
    }
    let mut lo: Coords<T> = smallvec::smallvec![s_iv.lo];
    let mut hi: Coords<T> = smallvec::smallvec![s_iv.hi];
    for f in &basis[1..] {
        let iv = project_box(f, bxp);
        lo.push(iv.lo);
        hi.push(iv.hi);
    }
    integrate_box(&lo, &hi, rule, |w| {
        let mut c: Coords<T> = smallvec::smallvec![T::zero(); n];
        for (wk, bk) in w.iter().zip(&basis) {
            for i in 0..n - 1 {
                c[i] = c[i] + *wk * bk[i];
            }
        }
        c[n - 1] = a * w[0] + b;
        eval(&Point::from_smallvec(c))
    })
}

/// Interval pieces of `[lo, hi]` where `rlo ≤ |y| ≤ rhi` (one-dimensional).
fn annulus_pieces<T: Scalar>(iv: Interval<T>, rlo: T, rhi: T) -> SmallVec<[Interval<T>; 2]> {
    let mut out = SmallVec::new();
    let outer = iv.intersect(&Interval::symmetric(rhi));
    if rlo > T::zero() {
        for piece in [Interval::new(outer.lo, -rlo), Interval::new(rlo, outer.hi)] {
            let p = piece.intersect(&outer);
            if !p.is_empty() {
                out.push(p);
            }
        }
    } else if !outer.is_empty() {
        out.push(outer);
    }
    out
}

/// Parabolic transforms of `f` at `x`; see [`ParabolicVariant`].
pub fn parabolic_p<T: Scalar>(
    f: &ScalarField<T>,
    x: &Point<T>,
    spec: &QuadratureSpec<T>,
    variant: ParabolicVariant,
) -> Result<T> {
    let n = f.dim();
    check_point(n, x)?;
    if f.domain() != Domain::FullSpace {
        return Err(Error::DomainMismatch("parabolic transform needs a field on R^n".into()));
    }
    if let Some(terms) = f.terms() {
        return terms
            .iter()
            .try_fold(T::zero(), |acc, (c, g)| Ok(acc + *c * parabolic_p(g, x, spec, variant)?));
    }
    let xn = x.xn();
    if variant == ParabolicVariant::Restricted && !(xn > T::zero()) {
        return Err(invalid("x", "restricted parabolic transform needs x_n > 0"));
    }
    let bx = bounded_box(f.support(), spec.r_max);
    let last = bx[n - 1];
    // |y'|² must lie in [x_n - hi_n, x_n - lo_n]
    let mut r2_hi = xn - last.lo;
    if variant == ParabolicVariant::Restricted {
        r2_hi = r2_hi.min(xn);
    }
    if !(r2_hi > T::zero()) {
        return Ok(T::zero());
    }
    let r2_lo = (xn - last.hi).max(T::zero());
    let rhi = r2_hi.sqrt();
    let xp = x.xprime();
    let eval = f.raw();
    let weighted = variant == ParabolicVariant::SurfaceMeasure;
    let restricted = variant == ParabolicVariant::Restricted;
    let integrand = |yp: &[T]| -> Result<T> {
        let r2 = norm_sqr(yp);
        if restricted && !(r2 < xn) {
            return Ok(T::zero());
        }
        let mut c: Coords<T> = xp.iter().zip(yp).map(|(&a, &b)| a - b).collect();
        c.push(xn - r2);
        let v = eval(&Point::from_smallvec(c))?;
        Ok(if weighted {
            v * (T::one() + T::of(4.0) * r2).sqrt()
        } else {
            v
        })
    };
    let rule = spec.rule();
    if n == 2 {
        let iv = Interval::new(xp[0] - bx[0].hi, xp[0] - bx[0].lo);
        let mut acc = T::zero();
        for piece in annulus_pieces(iv, r2_lo.sqrt(), rhi) {
            acc = acc + rule.integrate(piece.lo, piece.hi, |y| integrand(&[y]))?;
        }
        return Ok(acc);
    }
    if n == 3 {
        return polar_paraboloid(xp, &bx[..2], r2_lo.sqrt(), rhi, rule, &integrand);
    }
    let mut lo: Coords<T> = SmallVec::new();
    let mut hi: Coords<T> = SmallVec::new();
    for i in 0..n - 1 {
        let iv = Interval::new(xp[i] - bx[i].hi, xp[i] - bx[i].lo).intersect(&Interval::symmetric(rhi));
        if iv.is_empty() {
            return Ok(T::zero());
        }
        lo.push(iv.lo);
        hi.push(iv.hi);
    }
    integrate_box(&lo, &hi, rule, integrand)
}

/// Angles `φ ∈ [0, 2π)` for which `c - ρ(cos φ, sin φ)` lies in the box.
fn box_arcs<T: Scalar>(c: &[T], rho: T, bx: &[Interval<T>]) -> Vec<Interval<T>> {
    let two_pi = T::of(2.0) * T::PI();
    let one = T::one();
    let mut cuts = vec![T::zero(), two_pi];
    for (axis, iv) in bx.iter().enumerate() {
        for edge in [iv.lo, iv.hi] {
            let v = (c[axis] - edge) / rho;
            if v.abs() > one {
                continue;
            }
            let base = if axis == 0 { v.acos() } else { v.asin() };
            let pair = if axis == 0 { [base, two_pi - base] } else { [base, T::PI() - base] };
            for a in pair {
                let a = if a < T::zero() { a + two_pi } else { a };
                cuts.push(a);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    let inside = |phi: T| {
        let (s, co) = phi.sin_cos();
        bx[0].contains(c[0] - rho * co) && bx[1].contains(c[1] - rho * s)
    };
    let mut out: Vec<Interval<T>> = Vec::new();
    for w in cuts.windows(2) {
        if !(w[1] > w[0]) || !inside((w[0] + w[1]) / T::of(2.0)) {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.hi == w[0] => last.hi = w[1],
            _ => out.push(Interval::new(w[0], w[1])),
        }
    }
    out
}

/// `∫ g(y') dy'` over `ρ_lo ≤ |y'| ≤ ρ_hi` in the plane, restricted to
/// `x' - y'` in the box, in polar coordinates. Radial panels break where the
/// circle becomes tangent to an edge or passes a corner.
fn polar_paraboloid<T: Scalar>(
    xp: &[T],
    bx: &[Interval<T>],
    rho_lo: T,
    rho_hi: T,
    rule: &crate::quadrature::Rule<T>,
    g: &impl Fn(&[T]) -> Result<T>,
) -> Result<T> {
    let mut breaks = vec![rho_lo, rho_hi];
    let (d0, d1) = (
        [xp[0] - bx[0].lo, xp[0] - bx[0].hi],
        [xp[1] - bx[1].lo, xp[1] - bx[1].hi],
    );
    for a in d0.iter().chain(&d1) {
        breaks.push(a.abs());
    }
    for a in d0 {
        for b in d1 {
            breaks.push((a * a + b * b).sqrt());
        }
    }
    breaks.retain(|&b| b >= rho_lo && b <= rho_hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite radii"));
    breaks.dedup();
    let mut acc = T::zero();
    for w in breaks.windows(2) {
        acc = acc
            + rule.integrate(w[0], w[1], |rho| {
                let mut ring = T::zero();
                for arc in box_arcs(xp, rho, bx) {
                    ring = ring
                        + rule.integrate(arc.lo, arc.hi, |phi| {
                            let (s, co) = phi.sin_cos();
                            g(&[rho * co, rho * s])
                        })?;
                }
                Ok(ring * rho)
            })?;
    }
    Ok(acc)
}

/// Angles `t ∈ (0, π)` for which `(x' + r cos t, r sin t)` lies in the box.
fn circle_windows<T: Scalar>(x0: T, r: T, bx: &[Interval<T>]) -> SmallVec<[Interval<T>; 2]> {
    let pi = T::PI();
    let one = T::one();
    let clamp = |v: T| v.max(-one).min(one);
    let mut out = SmallVec::new();
    // cos t ∈ [(lo - x0)/r, (hi - x0)/r], t ↦ cos t decreasing on [0, π]
    let c_lo = (bx[0].lo - x0) / r;
    let c_hi = (bx[0].hi - x0) / r;
    if c_lo > one || c_hi < -one {
        return out;
    }
    let horiz = Interval::new(clamp(c_hi).acos(), clamp(c_lo).acos());
    let s_lo = bx[1].lo / r;
    let s_hi = bx[1].hi / r;
    if s_lo > one || s_hi <= T::zero() {
        return out;
    }
    let lower = if s_lo > T::zero() { s_lo.asin() } else { T::zero() };
    if s_hi >= one {
        let p = horiz.intersect(&Interval::new(lower, pi - lower));
        if !p.is_empty() {
            out.push(p);
        }
    } else {
        let upper = s_hi.asin();
        for piece in [Interval::new(lower, upper), Interval::new(pi - upper, pi - lower)] {
            let p = horiz.intersect(&piece);
            if !p.is_empty() {
                out.push(p);
            }
        }
    }
    out
}

/// `(Hφ)(x', r)`: integral of `φ` over the upper hemisphere of radius `r`
/// centred at `(x', 0)` against surface measure.
pub fn sonar_h<T: Scalar>(phi: &ScalarField<T>, xprime: &[T], r: T, spec: &QuadratureSpec<T>) -> Result<T> {
    let n = phi.dim();
    if xprime.len() + 1 != n {
        return Err(Error::Dimension(format!("x' must have {} components", n - 1)));
    }
    if !(r > T::zero()) {
        return Err(Error::NonPositiveRadius { r: r.as_f64() });
    }
    if phi.domain() != Domain::HalfSpace {
        return Err(Error::DomainMismatch("sonar transform needs a half-space field".into()));
    }
    if let Some(terms) = phi.terms() {
        return terms.iter().try_fold(T::zero(), |acc, (c, g)| Ok(acc + *c * sonar_h(g, xprime, r, spec)?));
    }
    let bx = bounded_box(phi.support(), spec.r_max.max(r + vec_norm(xprime)));
    let eval = phi.raw();
    let rule = spec.rule();
    if n == 2 {
        let x0 = xprime[0];
        let mut acc = T::zero();
        for w in circle_windows(x0, r, &bx) {
            acc = acc
                + rule.integrate(w.lo, w.hi, |t| {
                    let yn = r * t.sin();
                    if !(yn > T::zero()) {
                        return Err(Error::OutsideHalfSpace {
                            point: vec![(x0 + r * t.cos()).as_f64(), yn.as_f64()],
                        });
                    }
                    Ok(eval(&Point::from_smallvec(smallvec::smallvec![x0 + r * t.cos(), yn]))? * r)
                })?;
        }
        return Ok(acc);
    }
    // polar angle from the vertical, restricted by the last-axis range
    let last = bx[n - 1];
    let one = T::one();
    let th_lo = (last.hi / r).min(one).acos();
    let th_hi = (last.lo / r).max(T::zero()).min(one).acos();
    if !(th_lo < th_hi) {
        return Ok(T::zero());
    }
    let mut m_ang = spec.m;
    if m_ang % 2 == 1 {
        m_ang += 1;
    }
    let sphere = SphereRule::<T>::new(n - 1, m_ang)?;
    let rn1 = r.powi(n as i32 - 1);
    rule.integrate(th_lo, th_hi, |th| {
        let (s, c) = th.sin_cos();
        let yn = r * c;
        if !(yn > T::zero()) {
            return Err(Error::OutsideHalfSpace { point: vec![yn.as_f64()] });
        }
        let mut acc = T::zero();
        for (dir, w) in sphere.iter() {
            let mut p: Coords<T> = xprime.iter().zip(dir).map(|(&a, &d)| a + r * s * d).collect();
            p.push(yn);
            acc = acc + w * eval(&Point::from_smallvec(p))?;
        }
        Ok(acc * rn1 * s.powi(n as i32 - 2))
    })
}

fn vec_norm<T: Scalar>(v: &[T]) -> T {
    norm_sqr(v).sqrt()
}

/// `(Rf)(θ, t) = ∫_{θ^⊥} f(y + tθ) dy` over a Householder basis of `θ^⊥`.
pub fn classical_r<T: Scalar>(f: &ScalarField<T>, plane: &RadonPlane<T>, spec: &QuadratureSpec<T>) -> Result<T> {
    let n = f.dim();
    if plane.dim() != n {
        return Err(Error::Dimension("plane and field dimensions differ".into()));
    }
    if f.domain() != Domain::FullSpace {
        return Err(Error::DomainMismatch("classical Radon transform needs a field on R^n".into()));
    }
    if let Some(terms) = f.terms() {
        return terms.iter().try_fold(T::zero(), |acc, (c, g)| Ok(acc + *c * classical_r(g, plane, spec)?));
    }
    let theta = plane.theta();
    let t = plane.t();
    let basis = orthonormal_complement(theta);
    let (center, radius) = match f.support().is_bounded() {
        true => {
            let c: Coords<T> = f.support().bbox().iter().map(|iv| iv.midpoint()).collect();
            let r = f
                .support()
                .bbox()
                .iter()
                .fold(T::zero(), |acc, iv| acc + (iv.width() / T::of(2.0)).powi(2))
                .sqrt();
            (c, r)
        }
        false => (smallvec::smallvec![T::zero(); n], spec.r_max),
    };
    if (dot(theta, &center) - t).abs() > radius {
        return Ok(T::zero());
    }
    let lo: Coords<T> = basis.iter().map(|b| dot(b, &center) - radius).collect();
    let hi: Coords<T> = basis.iter().map(|b| dot(b, &center) + radius).collect();
    let eval = f.raw();
    integrate_box(&lo, &hi, spec.rule(), |u| {
        let mut c: Coords<T> = theta.iter().map(|&th| th * t).collect();
        for (uk, bk) in u.iter().zip(&basis) {
            for i in 0..n {
                c[i] = c[i] + *uk * bk[i];
            }
        }
        eval(&Point::from_smallvec(c))
    })
}

/// `(Λφ)(θ, t) = φ(-θ'/θ_n, t/θ_n)`: the point of `R^n` at which the
/// transversal transform reproduces a given hyperplane.
pub fn lambda_point<T: Scalar>(plane: &RadonPlane<T>) -> Result<Point<T>> {
    let theta = plane.theta();
    let tn = theta[theta.len() - 1];
    if tn == T::zero() {
        return Err(invalid(
            "theta",
            "theta_n = 0: the hyperplane does not meet the last coordinate axis",
        ));
    }
    let xp: Coords<T> = theta[..theta.len() - 1].iter().map(|&c| -c / tn).collect();
    Point::new(&xp, plane.t() / tn)
}

/// Both sides of `(Rf)(θ, t) = |θ_n|^{-1} (ΛTf)(θ, t)`.
pub fn lambda_relation<T: Scalar>(
    f: &ScalarField<T>,
    plane: &RadonPlane<T>,
    spec: &QuadratureSpec<T>,
) -> Result<(T, T)> {
    let x = lambda_point(plane)?;
    let tn = plane.theta()[plane.dim() - 1].abs();
    let lhs = classical_r(f, plane, spec)?;
    let rhs = transversal_t(f, &x, spec)? / tn;
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// lazy transform fields

/// `Tψ` as a field on `R^n`.
pub fn transversal_field<T: Scalar>(psi: &ScalarField<T>, spec: &QuadratureSpec<T>) -> Result<ScalarField<T>> {
    let n = psi.dim();
    if psi.domain() != Domain::FullSpace {
        return Err(Error::DomainMismatch("transversal transform needs a field on R^n".into()));
    }
    let mut support = Support::everywhere(n);
    if psi.support().is_bounded() {
        let bx: Vec<Interval<T>> = psi.support().bbox().to_vec();
        let wp = bx[..n - 1].iter().map(|iv| iv.width()).fold(T::zero(), T::max);
        let scale = if wp > T::zero() { bx[n - 1].width() / wp } else { T::one() };
        let fiber = move |xp: &[T]| {
            let proj = project_box(xp, &bx[..n - 1]);
            Interval::new(bx[n - 1].lo - proj.hi, bx[n - 1].hi - proj.lo)
        };
        support = support.with_fiber(Arc::new(fiber)).with_scale(scale.max(T::of(1e-3)));
    }
    let (psi, spec) = (psi.clone(), spec.clone());
    ScalarField::new(n, Domain::FullSpace, support, move |x| transversal_t(&psi, x, &spec))
}

/// `Pf` (full or surface-measure variant) as a field on `R^n`, or the
/// restricted variant as a half-space field.
pub fn parabolic_field<T: Scalar>(
    f: &ScalarField<T>,
    spec: &QuadratureSpec<T>,
    variant: ParabolicVariant,
) -> Result<ScalarField<T>> {
    let n = f.dim();
    if f.domain() != Domain::FullSpace {
        return Err(Error::DomainMismatch("parabolic transform needs a field on R^n".into()));
    }
    let mut support = Support::everywhere(n);
    if f.support().is_bounded() {
        let bx: Vec<Interval<T>> = f.support().bbox().to_vec();
        let scale = bx[..n - 1].iter().map(|iv| iv.width()).fold(T::zero(), T::max);
        let fiber = move |xp: &[T]| {
            // |y'|² over y' ∈ x' - box'
            let (mut mn, mut mx) = (T::zero(), T::zero());
            for (i, &xi) in xp.iter().enumerate() {
                let iv = Interval::new(xi - bx[i].hi, xi - bx[i].lo);
                let far = iv.lo.abs().max(iv.hi.abs());
                let near = if iv.contains(T::zero()) { T::zero() } else { iv.lo.abs().min(iv.hi.abs()) };
                mn = mn + near * near;
                mx = mx + far * far;
            }
            Interval::new(bx[n - 1].lo + mn, bx[n - 1].hi + mx)
        };
        support = support
            .with_fiber(Arc::new(fiber))
            .with_scale(if scale > T::zero() { scale } else { T::one() });
    }
    let domain = if variant == ParabolicVariant::Restricted {
        support = support.clip_last_below(T::zero());
        Domain::HalfSpace
    } else {
        Domain::FullSpace
    };
    let (f, spec) = (f.clone(), spec.clone());
    ScalarField::new(n, domain, support, move |x| parabolic_p(&f, x, &spec, variant))
}

/// `Hφ` as a sphere profile.
pub fn sonar_profile<T: Scalar>(phi: &ScalarField<T>, spec: &QuadratureSpec<T>) -> Result<SphereProfile<T>> {
    let n = phi.dim();
    if phi.domain() != Domain::HalfSpace {
        return Err(Error::DomainMismatch("sonar transform needs a half-space field".into()));
    }
    let mut support = Support::everywhere(n);
    if phi.support().is_bounded() {
        let bx: Vec<Interval<T>> = phi.support().bbox().to_vec();
        let scale = bx[..n - 1].iter().map(|iv| iv.width()).fold(T::zero(), T::max);
        let fiber = move |xp: &[T]| {
            let (mut near, mut far) = (T::zero(), T::zero());
            for (i, iv) in bx.iter().enumerate() {
                let p = if i + 1 < n { xp[i] } else { T::zero() };
                let clamped = p.max(iv.lo).min(iv.hi);
                near = near + (clamped - p).powi(2);
                far = far + (p - iv.lo).abs().max((iv.hi - p).abs()).powi(2);
            }
            Interval::new(near.sqrt(), far.sqrt())
        };
        support = support
            .with_fiber(Arc::new(fiber))
            .with_scale(if scale > T::zero() { scale } else { T::one() });
    }
    let (phi, spec) = (phi.clone(), spec.clone());
    SphereProfile::new(n, support, move |xp, r| sonar_h(&phi, xp, r, &spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_test_field, PhantomKind};

    const SQRT_PI: f64 = 1.772_453_850_905_516;

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_coords(c).unwrap()
    }

    fn gauss(n: usize) -> ScalarField<f64> {
        make_test_field(PhantomKind::Gaussian, &Point::origin(n).unwrap(), 1.0, Domain::FullSpace).unwrap()
    }

    #[test]
    fn hemisphere_length_and_linear_weight() {
        let spec = QuadratureSpec::default_for_dim(2);
        let one = ScalarField::constant(2, Domain::HalfSpace, 1.0).unwrap();
        let v = sonar_h(&one, &[0.3], 2.0, &spec).unwrap();
        assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        let lin = ScalarField::new(2, Domain::HalfSpace, Support::everywhere(2).clip_last_below(0.0), |x| {
            Ok(x.xn())
        })
        .unwrap();
        for r in [0.5, 1.0, 3.0] {
            let v = sonar_h(&lin, &[-1.0], r, &spec).unwrap();
            assert!((v - 2.0 * r * r).abs() < 1e-10 * r * r);
        }
    }

    #[test]
    fn sonar_errors() {
        let spec = QuadratureSpec::default_for_dim(2);
        let one = ScalarField::constant(2, Domain::HalfSpace, 1.0).unwrap();
        assert!(matches!(sonar_h(&one, &[0.0], 0.0, &spec), Err(Error::NonPositiveRadius { .. })));
        assert!(sonar_h(&gauss(2), &[0.0], 1.0, &spec).is_err());
    }

    #[test]
    fn transversal_gaussian_closed_form() {
        let spec = QuadratureSpec::default_for_dim(2);
        let g = gauss(2);
        for (x, want) in [
            ([0.0, 0.0], SQRT_PI),
            ([1.0, 0.0], (std::f64::consts::PI / 2.0).sqrt()),
            ([0.0, 1.0], SQRT_PI * (-1.0f64).exp()),
        ] {
            let v = transversal_t(&g, &p(&x), &spec).unwrap();
            assert!((v - want).abs() < 1e-12, "{x:?}: {v} vs {want}");
        }
    }

    #[test]
    fn transversal_three_dimensional_matches_closed_form() {
        let spec = QuadratureSpec::default_for_dim(3);
        let g = gauss(3);
        for x in [[0.0f64, 0.0, 0.3], [1.5, -0.5, 0.2], [20.0, 7.0, -1.0]] {
            let a2 = x[0] * x[0] + x[1] * x[1];
            let want = std::f64::consts::PI / (1.0 + a2).sqrt() * (-x[2] * x[2] / (1.0 + a2)).exp();
            let v = transversal_t(&g, &p(&x), &spec).unwrap();
            assert!((v - want).abs() < 1e-10 * want.max(1e-3), "{x:?}: {v} vs {want}");
        }
    }

    #[test]
    fn parabolic_restricted_equals_full_for_upper_support() {
        let spec = QuadratureSpec::default_for_dim(2);
        let b = make_test_field(PhantomKind::Bump, &p(&[0.2, 1.0]), 0.5, Domain::FullSpace).unwrap();
        for x in [[0.0, 1.5], [0.5, 2.0], [-0.4, 1.2]] {
            let full = parabolic_p(&b, &p(&x), &spec, ParabolicVariant::Full).unwrap();
            let res = parabolic_p(&b, &p(&x), &spec, ParabolicVariant::Restricted).unwrap();
            assert!((full - res).abs() <= 1e-14 * full.abs().max(1e-300), "{full} {res}");
        }
        assert!(parabolic_p(&b, &p(&[0.0, -1.0]), &spec, ParabolicVariant::Restricted).is_err());
    }

    #[test]
    fn zero_field_transforms_vanish() {
        let spec = QuadratureSpec::default_for_dim(2);
        let z = ScalarField::<f64>::zero(2, Domain::FullSpace).unwrap();
        for v in [ParabolicVariant::Full, ParabolicVariant::SurfaceMeasure] {
            assert_eq!(parabolic_p(&z, &p(&[0.3, 1.0]), &spec, v).unwrap(), 0.0);
        }
        assert_eq!(transversal_t(&z, &p(&[0.3, 1.0]), &spec).unwrap(), 0.0);
    }

    #[test]
    fn classical_radon_of_gaussian() {
        let spec = QuadratureSpec::default_for_dim(2);
        let g = gauss(2);
        for ang in [0.0, 0.7, 2.0, 4.0] {
            let theta = [f64::cos(ang), f64::sin(ang)];
            let v0 = classical_r(&g, &RadonPlane::new(&theta, 0.0).unwrap(), &spec).unwrap();
            let v1 = classical_r(&g, &RadonPlane::new(&theta, 1.0).unwrap(), &spec).unwrap();
            assert!((v0 - SQRT_PI).abs() < 1e-12);
            assert!((v1 - SQRT_PI * (-1.0f64).exp()).abs() < 1e-12);
        }
        let b = make_test_field(PhantomKind::Bump, &p(&[0.0, 0.0]), 0.5, Domain::FullSpace).unwrap();
        assert_eq!(classical_r(&b, &RadonPlane::new(&[0.0, 1.0], 2.0).unwrap(), &spec).unwrap(), 0.0);
        assert!(RadonPlane::new(&[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn lambda_relation_identity_slot() {
        let spec = QuadratureSpec::default_for_dim(2);
        let g = gauss(2);
        let plane = RadonPlane::new(&[0.0, 1.0], 0.4).unwrap();
        let (l, r) = lambda_relation(&g, &plane, &spec).unwrap();
        let t = transversal_t(&g, &p(&[0.0, 0.4]), &spec).unwrap();
        assert!((l - t).abs() < 1e-13 && (r - t).abs() < 1e-15);
        assert!(lambda_relation(&g, &RadonPlane::new(&[1.0, 0.0], 0.0).unwrap(), &spec).is_err());
    }

    #[test]
    fn householder_complement_is_orthonormal() {
        let e = [0.6f64, -0.0, 0.8];
        let b = orthonormal_complement(&e);
        for u in &b {
            assert!(dot(u, &e).abs() < 1e-15);
            assert!((dot(u, u) - 1.0).abs() < 1e-15);
        }
        assert!(dot(&b[0], &b[1]).abs() < 1e-15);
    }
}
