//! Explicit inversion: g-functionals of transformed data, the hypersingular
//! finite-difference integral, powers of the Laplacian, and their constants.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};
use crate::factorizations::Field;
use crate::field::{Domain, ScalarField, Support};
use crate::point::{dot, norm_sqr, Coords, Point};
use crate::quadrature::{validate_schedule, Interval, QuadratureSpec, Rule, SphereRule};
use crate::scalar::{binomial, gamma, unit_sphere_area, Scalar};

/// Which transform the data came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionKind {
    T,
    P,
    H,
}

impl std::str::FromStr for InversionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T" => Ok(Self::T),
            "P" => Ok(Self::P),
            "H" => Ok(Self::H),
            _ => Err(invalid("kind", format!("expected T, P or H, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionMethod {
    /// `d^{-1} ∫ (Δ^ℓ_y g)(x) |y|^{-exponent} dy`.
    Hypersingular,
    /// `(-Δ)^{(n-1)/2} g`; for even `n` the half power is the `ℓ = 1`
    /// hypersingular integral with exponent `n + 1` and prefactor `c_n`.
    LaplacianPower,
}

impl std::str::FromStr for InversionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hypersingular" => Ok(Self::Hypersingular),
            "laplacian_power" | "laplacian" => Ok(Self::LaplacianPower),
            _ => Err(invalid("method", format!("expected hypersingular or laplacian_power, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionConfig<T> {
    /// Order of the finite difference.
    pub ell: usize,
    /// Strictly decreasing inner cutoffs.
    pub eps_schedule: Vec<T>,
    /// Laplacian stencil spacing.
    pub stencil_h: T,
    /// Power of `|y|` in the hypersingular kernel.
    pub exponent: T,
    /// Quadrature for the g-functional.
    pub g_spec: QuadratureSpec<T>,
    /// Directions of the hypersingular angular rule (even).
    pub angular_nodes: usize,
    /// Gauss-Legendre nodes per log-radial panel.
    pub radial_nodes: usize,
    /// Outer radius of the hypersingular integral; the constant part of the
    /// difference is integrated to infinity in closed form.
    pub r_out: T,
}

impl<T: Scalar> ReconstructionConfig<T> {
    pub fn default_for_dim(n: usize) -> Self {
        let ell = if n % 2 == 0 { n - 1 } else { n };
        let g_spec = QuadratureSpec::default_for_dim(n)
            .with_nodes(if n == 2 { 128 } else { QuadratureSpec::<T>::default_for_dim(n).m })
            .expect("valid node count");
        Self {
            ell,
            eps_schedule: [0.2, 0.1, 0.05, 0.025].iter().map(|&e| T::of(e)).collect(),
            stencil_h: T::of(0.02),
            exponent: T::of_usize(2 * n - 1),
            g_spec,
            angular_nodes: if n == 2 { 32 } else { 12 },
            radial_nodes: 8,
            r_out: T::of(64.0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_ell(n, self.ell)?;
        validate_schedule(&self.eps_schedule)?;
        if !(self.stencil_h > T::zero()) {
            return Err(invalid("stencil_h", "must be positive"));
        }
        if !(self.exponent > T::of_usize(n)) {
            return Err(invalid("exponent", format!("must exceed n = {n}")));
        }
        if self.angular_nodes < 2 || self.angular_nodes % 2 == 1 {
            return Err(invalid("angular_nodes", "need an even count >= 2"));
        }
        if self.radial_nodes < 1 {
            return Err(invalid("radial_nodes", "need at least one node per panel"));
        }
        if !(self.r_out > self.eps_schedule[0]) {
            return Err(invalid("r_out", "must exceed the largest cutoff"));
        }
        Ok(())
    }
}

fn check_ell(n: usize, ell: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Dimension(format!("n must be >= 2, got {n}")));
    }
    if n % 2 == 0 && ell != n - 1 {
        return Err(invalid("ell", format!("even n = {n} requires ell = {}", n - 1)));
    }
    if n % 2 == 1 && ell < n {
        return Err(invalid("ell", format!("odd n = {n} requires ell > {}", n - 1)));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// g-functionals

const WINDOW_SAMPLES: usize = 512;

/// Sub-intervals of `[lo, hi]` where `active` holds on a sample grid,
/// widened by one sample on each side.
fn active_windows<T: Scalar>(lo: T, hi: T, active: impl Fn(T) -> bool) -> Vec<Interval<T>> {
    let k = WINDOW_SAMPLES;
    let step = (hi - lo) / T::of_usize(k);
    // sample cell centres; an active cell keeps its neighbours
    let flags: Vec<bool> = (0..k).map(|i| active(lo + step * (T::of_usize(i) + T::of(0.5)))).collect();
    if flags.iter().all(|&f| f) {
        return vec![Interval::new(lo, hi)];
    }
    let mut keep = vec![false; k];
    for i in 0..k {
        if flags[i] {
            keep[i.saturating_sub(1)..(i + 2).min(k)].iter_mut().for_each(|f| *f = true);
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < k {
        if keep[i] {
            let start = i;
            while i < k && keep[i] {
                i += 1;
            }
            let a = if start == 0 { lo } else { lo + step * T::of_usize(start) };
            let b = if i == k { hi } else { lo + step * T::of_usize(i) };
            out.push(Interval::new(a, b));
        } else {
            i += 1;
        }
    }
    out
}

/// Integrate `f(u)` over the active windows of `[lo, hi]`.
fn windowed<T: Scalar>(rule: &Rule<T>, lo: T, hi: T, active: impl Fn(T) -> bool, mut f: impl FnMut(T) -> Result<T>) -> Result<T> {
    let mut acc = T::zero();
    for w in active_windows(lo, hi, active) {
        acc = acc + rule.integrate(w.lo, w.hi, &mut f)?;
    }
    Ok(acc)
}

/// The data evaluation behind one g-functional: `z'` ↦ (point of the data,
/// factor), or `None` outside the data's support.
trait GKernel<T: Scalar> {
    /// `y' = tan(u)·ω·stretch`.
    fn stretch(&self) -> T;
    fn prefactor(&self, n: usize) -> T;
    /// Returns `None` where the integrand is known to vanish.
    fn locate(&self, zp: &[T]) -> Option<(Coords<T>, T)>;
    fn eval(&self, at: &Coords<T>) -> Result<T>;
}

struct TKernel<'a, T: Scalar> {
    data: &'a ScalarField<T>,
    x: &'a Point<T>,
}

impl<T: Scalar> GKernel<T> for TKernel<'_, T> {
    fn stretch(&self) -> T {
        T::one()
    }

    fn prefactor(&self, n: usize) -> T {
        T::of((2.0 * PI).powi(1 - n as i32))
    }

    fn locate(&self, yp: &[T]) -> Option<(Coords<T>, T)> {
        let t = self.x.xn() - dot(yp, self.x.xprime());
        if !self.data.support().fiber(yp).contains(t) {
            return None;
        }
        let mut c: Coords<T> = SmallVec::from_slice(yp);
        c.push(t);
        Some((c, T::one()))
    }

    fn eval(&self, at: &Coords<T>) -> Result<T> {
        self.data.eval_coords(at)
    }
}

struct PKernel<'a, T: Scalar> {
    data: &'a ScalarField<T>,
    x: &'a Point<T>,
}

fn shifted_arg<T: Scalar>(x: &Point<T>, zp: &[T]) -> T {
    x.xn() - T::of(2.0) * dot(zp, x.xprime()) + norm_sqr(zp)
}

impl<T: Scalar> GKernel<T> for PKernel<'_, T> {
    fn stretch(&self) -> T {
        T::of(0.5)
    }

    fn prefactor(&self, n: usize) -> T {
        T::of(PI.powi(1 - n as i32))
    }

    fn locate(&self, zp: &[T]) -> Option<(Coords<T>, T)> {
        let t = shifted_arg(self.x, zp);
        if !self.data.support().fiber(zp).contains(t) {
            return None;
        }
        let mut c: Coords<T> = SmallVec::from_slice(zp);
        c.push(t);
        Some((c, T::one()))
    }

    fn eval(&self, at: &Coords<T>) -> Result<T> {
        self.data.eval_coords(at)
    }
}

struct HKernel<'a, T: Scalar> {
    data: &'a crate::field::SphereProfile<T>,
    x: &'a Point<T>,
}

impl<T: Scalar> GKernel<T> for HKernel<'_, T> {
    fn stretch(&self) -> T {
        T::of(0.5)
    }

    fn prefactor(&self, n: usize) -> T {
        T::of(PI.powi(1 - n as i32))
    }

    fn locate(&self, zp: &[T]) -> Option<(Coords<T>, T)> {
        let a = shifted_arg(self.x, zp);
        if !(a > T::zero()) {
            return None;
        }
        let r = a.sqrt();
        if !self.data.support().fiber(zp).contains(r) {
            return None;
        }
        let mut c: Coords<T> = SmallVec::from_slice(zp);
        c.push(r);
        Some((c, r.recip()))
    }

    fn eval(&self, at: &Coords<T>) -> Result<T> {
        let k = at.len() - 1;
        self.data.eval(&at[..k], at[k])
    }
}

/// `∫ K(z') (1 + |z'/stretch|²)^{-(n-1)/2} dz'` in the variable
/// `z' = stretch·tan(u)·ω`, in which the integrand of algebraically decaying
/// data stays bounded.
fn g_integral<T: Scalar>(kernel: &impl GKernel<T>, n: usize, spec: &QuadratureSpec<T>) -> Result<T> {
    let rule = spec.rule();
    let c = kernel.stretch();
    let half_pi = T::FRAC_PI_2();
    let jac_scale = c.powi(n as i32 - 1);
    let value = |dir: &[T], u: T| -> Result<T> {
        let (s, co) = u.sin_cos();
        let zp: Coords<T> = dir.iter().map(|&d| c * (s / co) * d).collect();
        match kernel.locate(&zp) {
            None => Ok(T::zero()),
            Some((at, factor)) => {
                let v = kernel.eval(&at)?;
                Ok(v * factor * s.abs().powi(n as i32 - 2) / co)
            }
        }
    };
    let active = |dir: &[T], u: T| {
        let (s, co) = u.sin_cos();
        let zp: Coords<T> = dir.iter().map(|&d| c * (s / co) * d).collect();
        kernel.locate(&zp).is_some()
    };
    let total = if n == 2 {
        let dir = [T::one()];
        windowed(rule, -half_pi, half_pi, |u| active(&dir, u), |u| value(&dir, u))?
    } else {
        let mut m_ang = spec.m;
        if m_ang % 2 == 1 {
            m_ang += 1;
        }
        let sphere = SphereRule::<T>::new(n - 1, m_ang)?;
        let mut acc = T::zero();
        for (dir, w) in sphere.iter() {
            acc = acc + w * windowed(rule, T::zero(), half_pi, |u| active(dir, u), |u| value(dir, u))?;
        }
        acc
    };
    Ok(total * jac_scale * kernel.prefactor(n))
}

/// The g-functional of transformed data at `x`:
/// `T`: `(2π)^{1-n} ∫ Ψ(y', x_n - y'·x') (1+|y'|²)^{-(n-1)/2} dy'`;
/// `P`: `π^{1-n} ∫ F(z', x_n - 2z'·x' + |z'|²) (1+4|z'|²)^{-(n-1)/2} dz'`;
/// `H`: as `P` with `a^{-1/2} Φ(z', √a)`, `a = x_n - 2z'·x' + |z'|²`, and zero
/// where `a <= 0`.
pub fn g_functional<T: Scalar>(kind: InversionKind, data: &Field<T>, x: &Point<T>, spec: &QuadratureSpec<T>) -> Result<T> {
    let n = data.dim();
    if x.dim() != n {
        return Err(Error::Dimension("point and data dimensions differ".into()));
    }
    match kind {
        InversionKind::T | InversionKind::P => {
            let f = data.as_scalar()?;
            if f.domain() != Domain::FullSpace {
                return Err(Error::DomainMismatch(format!("{kind:?} data lives on R^n")));
            }
            if kind == InversionKind::T {
                g_integral(&TKernel { data: f, x }, n, spec)
            } else {
                g_integral(&PKernel { data: f, x }, n, spec)
            }
        }
        InversionKind::H => g_integral(&HKernel { data: data.as_profile()?, x }, n, spec),
    }
}

/// `g` as a lazy, memoized field on `R^n`.
pub fn g_field<T: Scalar>(kind: InversionKind, data: &Field<T>, spec: &QuadratureSpec<T>) -> Result<ScalarField<T>> {
    let n = data.dim();
    let (data, spec) = (data.clone(), spec.clone());
    Ok(ScalarField::new(n, Domain::FullSpace, Support::everywhere(n), move |x| {
        g_functional(kind, &data, x, &spec)
    })?
    .memoized())
}

// ---------------------------------------------------------------------------
// finite differences and the hypersingular integral

/// `(Δ^ℓ_y g)(x) = Σ_j C(ℓ, j) (-1)^j g(x - j·y)`.
pub fn finite_difference<T: Scalar>(g: &ScalarField<T>, x: &Point<T>, y: &Point<T>, ell: usize) -> Result<T> {
    if ell == 0 {
        return Err(invalid("ell", "must be >= 1"));
    }
    difference(|p| g.eval(p), x, y.coords(), ell)
}

fn difference<T: Scalar>(g: impl Fn(&Point<T>) -> Result<T>, x: &Point<T>, y: &[T], ell: usize) -> Result<T> {
    let mut acc = T::zero();
    for j in 0..=ell {
        let c = T::of(binomial(ell, j));
        let sign = if j % 2 == 0 { c } else { -c };
        let v = if j == 0 { g(x)? } else { g(&x.sub_scaled(y, T::of_usize(j)))? };
        acc = acc + sign * v;
    }
    Ok(acc)
}

/// Values of the truncated integrals and the extrapolated limit.
#[derive(Debug, Clone, PartialEq)]
pub struct HypersingularTable<T> {
    /// `(ε, ∫_{|y|>ε} …)` in schedule order.
    pub table: Vec<(T, T)>,
    pub limit: T,
    /// Fitted leading power of `ε`, when extrapolation was needed.
    pub order: Option<T>,
}

/// Radial nodes `(ρ, w)` for `∫ h(ρ) dρ` on `[eps_min, r_out]` using `s = ln ρ`
/// with panels no wider than `ln 2` and breaks at every cutoff.
fn radial_nodes<T: Scalar>(schedule: &[T], r_out: T, per_panel: usize) -> Result<Vec<(T, T)>> {
    let rule = Rule::<T>::gauss_legendre(per_panel.max(1))?;
    let mut breaks: Vec<T> = schedule.iter().map(|e| e.ln()).collect();
    breaks.push(r_out.ln());
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breaks"));
    let max_w = T::LN_2();
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let pieces = (len / max_w).ceil().to_usize().unwrap_or(1).max(1);
        let step = len / T::of_usize(pieces);
        for k in 0..pieces {
            let a = w[0] + step * T::of_usize(k);
            let b = a + step;
            for (&t, &wt) in rule.nodes().iter().zip(rule.weights()) {
                let s = (a + b) / T::of(2.0) + (b - a) / T::of(2.0) * t;
                let rho = s.exp();
                out.push((rho, wt * (b - a) / T::of(2.0) * rho));
            }
        }
    }
    Ok(out)
}

/// `∫_{|y|>ε} (Δ^ℓ_y g)(x) |y|^{-a} dy` for every cutoff, plus the
/// Richardson limit `ε → 0`.
pub fn hypersingular_table<T: Scalar>(
    g: &ScalarField<T>,
    x: &Point<T>,
    ell: usize,
    exponent: T,
    cfg: &ReconstructionConfig<T>,
) -> Result<HypersingularTable<T>> {
    let n = g.dim();
    if ell == 0 {
        return Err(invalid("ell", "must be >= 1"));
    }
    if !(exponent > T::of_usize(n)) {
        return Err(invalid("exponent", format!("must exceed n = {n}")));
    }
    validate_schedule(&cfg.eps_schedule)?;
    let sphere = SphereRule::<T>::new(n, cfg.angular_nodes)?;
    let dirs: Vec<(Coords<T>, T)> = sphere.iter().map(|(d, w)| (SmallVec::from_slice(d), w)).collect();
    let radial = radial_nodes(&cfg.eps_schedule, cfg.r_out, cfg.radial_nodes)?;
    let power = T::of_usize(n) - T::one() - exponent;
    let gx = g.eval(x)?;
    let contributions: Vec<(T, T)> = radial
        .par_iter()
        .map(|&(rho, w)| {
            let mut acc = T::zero();
            for (dir, wd) in &dirs {
                let y: Coords<T> = dir.iter().map(|&d| d * rho).collect();
                let mut diff = gx;
                for j in 1..=ell {
                    let c = T::of(binomial(ell, j));
                    let v = g.eval(&x.sub_scaled(&y, T::of_usize(j)))?;
                    diff = diff + if j % 2 == 0 { c * v } else { -c * v };
                }
                acc = acc + *wd * diff;
            }
            Ok((rho, acc * w * rho.powf(power)))
        })
        .collect::<Result<_>>()?;
    // the j = 0 term beyond r_out, in closed form
    let a_minus_n = exponent - T::of_usize(n);
    let tail = gx * T::of(unit_sphere_area(n)) * cfg.r_out.powf(-a_minus_n) / a_minus_n;
    let table: Vec<(T, T)> = cfg
        .eps_schedule
        .iter()
        .map(|&eps| {
            let inside: T = contributions.iter().filter(|(r, _)| *r > eps).map(|&(_, c)| c).sum();
            (eps, inside + tail)
        })
        .collect();
    let (limit, order) = richardson(&table)?;
    Ok(HypersingularTable { table, limit, order })
}

/// Extrapolates `I(ε) = I₀ + C ε^a` from the last three entries.
pub fn richardson<T: Scalar>(table: &[(T, T)]) -> Result<(T, Option<T>)> {
    let k = table.len();
    if k == 0 {
        return Err(invalid("eps_schedule", "must not be empty"));
    }
    if k < 3 {
        return Ok((table[k - 1].1, None));
    }
    let [(e1, i1), (e2, i2), (e3, i3)] = [table[k - 3], table[k - 2], table[k - 1]];
    let d1 = i2 - i1;
    let d2 = i3 - i2;
    let scale = i3.abs().max(T::one());
    let tiny = T::of(1e-13) * scale;
    if d1.abs() <= tiny && d2.abs() <= tiny {
        return Ok((i3, None));
    }
    let f64_table = || table.iter().map(|&(e, v)| (e.as_f64(), v.as_f64())).collect();
    let ratio = d2 / d1;
    if !(ratio > T::zero()) || !ratio.is_finite() {
        return Err(Error::Extrapolation { table: f64_table() });
    }
    // ratio(a) = (ε₂^a - ε₃^a)/(ε₁^a - ε₂^a) is decreasing in a
    let model = |a: f64| {
        let (e1, e2, e3) = (e1.as_f64(), e2.as_f64(), e3.as_f64());
        (e2.powf(a) - e3.powf(a)) / (e1.powf(a) - e2.powf(a))
    };
    let target = ratio.as_f64();
    let (mut lo, mut hi) = (0.1f64, 8.0f64);
    if !(model(hi) <= target && target <= model(lo)) {
        return Err(Error::Extrapolation { table: f64_table() });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    if !(0.25..=8.0).contains(&a) {
        return Err(Error::Extrapolation { table: f64_table() });
    }
    let at = T::of(a);
    let c = d2 / (e3.powf(at) - e2.powf(at));
    Ok((i3 - c * e3.powf(at), Some(at)))
}

/// The ε-limit of `∫_{|y|>ε} (Δ^ℓ_y g)(x) |y|^{-exponent} dy` with `ℓ` and
/// the exponent taken from `cfg`.
pub fn hypersingular_apply<T: Scalar>(g: &ScalarField<T>, x: &Point<T>, cfg: &ReconstructionConfig<T>) -> Result<T> {
    Ok(hypersingular_table(g, x, cfg.ell, cfg.exponent, cfg)?.limit)
}

// ---------------------------------------------------------------------------
// constants

/// `c_n = Γ((n+1)/2) / π^{(n+1)/2}`.
pub fn c_n(n: usize) -> f64 {
    let h = (n as f64 + 1.0) / 2.0;
    gamma(h) / PI.powf(h)
}

/// `∫_{S^{n-1}} |ω₁|^{n-1} dω`.
fn moment_on_sphere(n: usize) -> f64 {
    let nf = n as f64;
    2.0 * PI.powf((nf - 1.0) / 2.0) * gamma(nf / 2.0) / gamma(nf - 0.5)
}

/// `Σ_j C(ℓ, j) (-1)^j j^m`.
fn alternating_moment(ell: usize, m: u32) -> f64 {
    (0..=ell)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * binomial(ell, j) * (j as f64).powi(m as i32)
        })
        .sum()
}

/// `∫_0^∞ Re[(1 - e^{it})^ℓ] t^{-n} dt`: Taylor series on `[0, δ]`,
/// Gauss-Legendre panels up to `t_end`, and the asymptotic expansion of the
/// oscillatory tail.
fn radial_constant(n: usize, ell: usize, nodes: usize) -> Result<f64> {
    let delta = 1.0 / ell as f64;
    let mut near = 0.0;
    let mut fact = 1.0;
    for k in 0..=40u32 {
        if k > 0 {
            fact *= (2 * k - 1) as f64 * (2 * k) as f64;
        }
        let a = alternating_moment(ell, 2 * k);
        let coeff = if k % 2 == 0 { a } else { -a } / fact;
        if coeff.abs() < 1e-300 || (k == 0 && ell > 0) {
            continue;
        }
        let p = 2.0 * k as f64 - n as f64 + 1.0;
        if p <= 0.0 {
            if coeff.abs() > 1e-12 {
                return Err(invalid("ell", format!("the constant diverges for n = {n}, ell = {ell}")));
            }
            continue;
        }
        near += coeff * delta.powf(p) / p;
    }
    let f = |t: f64| -> f64 {
        (0..=ell)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * binomial(ell, j) * (j as f64 * t).cos()
            })
            .sum::<f64>()
            * t.powi(-(n as i32))
    };
    let t_end = 200.0 * std::f64::consts::TAU;
    let rule = Rule::<f64>::gauss_legendre(nodes)?;
    let panels = (t_end - delta).ceil() as usize;
    let step = (t_end - delta) / panels as f64;
    let mut mid = 0.0;
    for k in 0..panels {
        let a = delta + step * k as f64;
        mid += rule.integrate(a, a + step, |t| Ok(f(t)))?;
    }
    // tail: ∫_T^∞ cos(jt) t^{-n} dt = Re[-e^{ijT} Σ_k (n)_k / ((ij)^{k+1} T^{n+k})]
    let nf = n as f64;
    let mut tail = t_end.powf(1.0 - nf) / (nf - 1.0);
    for j in 1..=ell {
        let w = j as f64;
        let s = if j % 2 == 0 { 1.0 } else { -1.0 } * binomial(ell, j);
        let (mut re, mut im) = (0.0, 0.0);
        let mut rising = 1.0;
        for k in 0..12 {
            // 1/(i w)^{k+1} = (-i)^{k+1} / w^{k+1}
            let mag = rising / (w.powi(k + 1) * t_end.powf(nf + k as f64));
            let (pr, pi) = match (k + 1) % 4 {
                0 => (1.0, 0.0),
                1 => (0.0, -1.0),
                2 => (-1.0, 0.0),
                _ => (0.0, 1.0),
            };
            re += mag * pr;
            im += mag * pi;
            rising *= nf + k as f64;
        }
        let (c, sn) = ((w * t_end).cos(), (w * t_end).sin());
        // -Re[(c + i sn)(re + i im)]
        tail += s * -(c * re - sn * im);
    }
    Ok(near + mid + tail)
}

/// `d_{n,ℓ}(n-1) = ∫_{R^n} (1 - e^{iy₁})^ℓ |y|^{-(2n-1)} dy`; the integral is
/// real by the reflection `y₁ ↦ -y₁`.
pub fn dnl_constant(n: usize, ell: usize) -> Result<f64> {
    check_ell(n, ell)?;
    let coarse = radial_constant(n, ell, 16)?;
    let fine = radial_constant(n, ell, 24)?;
    if (coarse - fine).abs() > 1e-10 * fine.abs().max(1e-300) {
        return Err(Error::NonConvergence(format!(
            "radial constant for n = {n}, ell = {ell}: {coarse} vs {fine}"
        )));
    }
    Ok(moment_on_sphere(n) * fine)
}

// ---------------------------------------------------------------------------
// Laplacian powers

/// `(-Δ)^k g (x)` from `k` applications of the `(2n+1)`-point stencil.
pub fn laplacian_power<T: Scalar>(g: &ScalarField<T>, x: &Point<T>, k: usize, h: T) -> Result<T> {
    laplacian_power_fn(|p| g.eval(p), x, k, h)
}

fn laplacian_power_fn<T: Scalar>(g: impl Fn(&Point<T>) -> Result<T> + Sync, x: &Point<T>, k: usize, h: T) -> Result<T> {
    if !(h > T::zero()) {
        return Err(invalid("h", "stencil spacing must be positive"));
    }
    let n = x.dim();
    // coefficients of (-Δ_h)^k on integer offsets, in units of h^{-2k}
    let mut coeffs: HashMap<SmallVec<[i32; 4]>, f64> = HashMap::new();
    coeffs.insert(SmallVec::from_elem(0, n), 1.0);
    for _ in 0..k {
        let mut next: HashMap<SmallVec<[i32; 4]>, f64> = HashMap::new();
        for (off, c) in &coeffs {
            *next.entry(off.clone()).or_default() += 2.0 * n as f64 * c;
            for i in 0..n {
                for d in [-1, 1] {
                    let mut o = off.clone();
                    o[i] += d;
                    *next.entry(o).or_default() -= c;
                }
            }
        }
        coeffs = next;
    }
    let mut terms: Vec<(SmallVec<[i32; 4]>, f64)> = coeffs.into_iter().filter(|(_, c)| *c != 0.0).collect();
    terms.sort_by(|a, b| a.0.cmp(&b.0));
    let values: Vec<T> = terms
        .par_iter()
        .map(|(off, c)| {
            let p: Coords<T> = x.coords().iter().zip(off).map(|(&xi, &o)| xi + h * T::of(o as f64)).collect();
            Ok(T::of(*c) * g(&Point::from_smallvec(p))?)
        })
        .collect::<Result<_>>()?;
    let sum: T = values.into_iter().sum();
    Ok(sum / h.powi(2 * k as i32))
}

// ---------------------------------------------------------------------------
// composed inversion

/// Where the full-space reconstruction is evaluated, and the factor applied.
fn output_point<T: Scalar>(kind: InversionKind, x: &Point<T>) -> Result<(Point<T>, T)> {
    Ok(match kind {
        InversionKind::T => (x.clone(), T::one()),
        InversionKind::P => (x.with_xn(x.xn() + x.xprime_norm_sqr()), T::one()),
        InversionKind::H => {
            let yn = x.xn();
            if !(yn > T::zero()) {
                return Err(Error::OutsideHalfSpace { point: x.to_f64() });
            }
            (x.with_xn(yn * yn + x.xprime_norm_sqr()), yn)
        }
    })
}

/// `(-Δ)^{(n-1)/2} g` at `x`: a pure stencil power for odd `n`, otherwise the
/// stencil power of `c_n ∫ (g(x) - g(x - y)) |y|^{-n-1} dy`.
fn laplacian_route<T: Scalar>(g: &ScalarField<T>, x: &Point<T>, cfg: &ReconstructionConfig<T>) -> Result<T> {
    let n = g.dim();
    let k = (n - 1) / 2;
    if n % 2 == 1 {
        return laplacian_power(g, x, k, cfg.stencil_h);
    }
    let cn = T::of(c_n(n));
    let exponent = T::of_usize(n + 1);
    let half = |p: &Point<T>| Ok(cn * hypersingular_table(g, p, 1, exponent, cfg)?.limit);
    if k == 0 {
        return half(x);
    }
    laplacian_power_fn(half, x, k, cfg.stencil_h)
}

/// Reconstructs the original function at `x` from transformed `data`.
pub fn invert<T: Scalar>(
    kind: InversionKind,
    data: &Field<T>,
    x: &Point<T>,
    method: InversionMethod,
    cfg: &ReconstructionConfig<T>,
) -> Result<T> {
    let n = data.dim();
    if x.dim() != n {
        return Err(Error::Dimension("point and data dimensions differ".into()));
    }
    cfg.validate(n)?;
    let (at, factor) = output_point(kind, x)?;
    let g = g_field(kind, data, &cfg.g_spec)?;
    let value = match method {
        InversionMethod::Hypersingular => {
            let d = T::of(dnl_constant_for(n, cfg)?);
            hypersingular_apply(&g, &at, cfg)? / d
        }
        InversionMethod::LaplacianPower => laplacian_route(&g, &at, cfg)?,
    };
    Ok(factor * value)
}

/// `d_{n,ℓ}` for the configured exponent; only the `2n - 1` kernel has the
/// closed normalization.
fn dnl_constant_for<T: Scalar>(n: usize, cfg: &ReconstructionConfig<T>) -> Result<f64> {
    if (cfg.exponent.as_f64() - (2 * n - 1) as f64).abs() > 1e-12 {
        return Err(invalid(
            "exponent",
            format!("the hypersingular method is normalized for exponent {}", 2 * n - 1),
        ));
    }
    dnl_constant(n, cfg.ell)
}

/// [`invert`] at many points, in parallel.
pub fn invert_many<T: Scalar>(
    kind: InversionKind,
    data: &Field<T>,
    points: &[Point<T>],
    method: InversionMethod,
    cfg: &ReconstructionConfig<T>,
) -> Result<Vec<T>> {
    points.par_iter().map(|x| invert(kind, data, x, method, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_test_field, PhantomKind};

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_coords(c).unwrap()
    }

    #[test]
    fn differences() {
        let g = ScalarField::new(2, Domain::FullSpace, Support::everywhere(2), |x: &Point<f64>| {
            Ok(x[0] * x[0] + 3.0 * x[1])
        })
        .unwrap();
        let x = p(&[0.5, -1.0]);
        let y = p(&[0.25, 0.5]);
        let one = finite_difference(&g, &x, &y, 1).unwrap();
        assert!((one - (g.eval(&x).unwrap() - g.eval(&p(&[0.25, -1.5])).unwrap())).abs() < 1e-15);
        let two = finite_difference(&g, &x, &y, 2).unwrap();
        assert!((two - 2.0 * 0.0625).abs() < 1e-14);
        assert!(finite_difference(&g, &x, &y, 3).unwrap().abs() < 1e-13);
        assert!(finite_difference(&g, &x, &y, 0).is_err());
    }

    #[test]
    fn constants() {
        assert!((c_n(2) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let d = dnl_constant(2, 1).unwrap();
        assert!((d - 2.0 * PI).abs() < 1e-9, "{d}");
        // (4π/3)(6 ln 2 - 4.5 ln 3) from the elementary antiderivative
        let want = 4.0 * PI / 3.0 * (6.0 * 2f64.ln() - 4.5 * 3f64.ln());
        let d = dnl_constant(3, 3).unwrap();
        assert!((d - want).abs() < 1e-9 * want.abs(), "{d} vs {want}");
        assert!(dnl_constant(2, 2).is_err());
        assert!(dnl_constant(3, 2).is_err());
    }

    #[test]
    fn richardson_recovers_power_law() {
        let table: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| (e, 3.0 + 2.0 * e * e)).collect();
        let (v, a) = richardson(&table).unwrap();
        assert!((v - 3.0).abs() < 1e-12 && (a.unwrap() - 2.0).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = vec![(0.2, 1.0), (0.1, 1.0), (0.05, 1.0)];
        assert_eq!(richardson(&flat).unwrap(), (1.0, None));
        let bad = vec![(0.2, 1.0), (0.1, 2.0), (0.05, 1.0)];
        assert!(matches!(richardson(&bad), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn stencil() {
        let g = make_test_field(PhantomKind::Gaussian, &p(&[0.0, 0.0, 0.0]), 1.0, Domain::FullSpace).unwrap();
        let x = p(&[0.0, 0.0, 0.0]);
        assert_eq!(laplacian_power(&g, &x, 0, 0.1).unwrap(), 1.0);
        let v = laplacian_power(&g, &x, 1, 0.01).unwrap();
        assert!((v - 6.0).abs() < 1e-3, "{v}");
        let lin = ScalarField::new(3, Domain::FullSpace, Support::everywhere(3), |x: &Point<f64>| Ok(x[0] + 2.0)).unwrap();
        assert!(laplacian_power(&lin, &p(&[0.3, 0.1, 0.2]), 1, 0.02).unwrap().abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ReconstructionConfig::<f64>::default_for_dim(2);
        assert!(cfg.validate(2).is_ok());
        cfg.ell = 2;
        assert!(cfg.validate(2).is_err());
        let mut cfg = ReconstructionConfig::<f64>::default_for_dim(3);
        assert_eq!(cfg.ell, 3);
        cfg.eps_schedule = vec![0.1, 0.2];
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn windows_cover_active_set() {
        let w = active_windows(0.0, 1.0, |u: f64| (0.3..0.4).contains(&u));
        assert_eq!(w.len(), 1);
        assert!(w[0].lo <= 0.3 && w[0].hi >= 0.4 && w[0].width() < 0.11);
        assert_eq!(active_windows(0.0, 1.0, |_: f64| true), vec![Interval::new(0.0, 1.0)]);
        assert!(active_windows(0.0, 1.0, |_: f64| false).is_empty());
    }
}
