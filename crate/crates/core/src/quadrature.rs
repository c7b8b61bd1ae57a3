//! Gauss-Legendre and trapezoid rules, tensor-product integration over boxes,
//! infinite-interval maps and product rules on spheres.

use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};

use crate::error::{invalid, Error, Result};
use crate::point::Coords;
use crate::scalar::{to_f64_vec, Scalar};

/// Which one-dimensional rule the tensor quadrature is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    GaussLegendre,
    Trapezoid,
}

/// Nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule<T> {
    kind: RuleKind,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> Rule<T> {
    pub fn new(kind: RuleKind, m: usize) -> Result<Self> {
        match kind {
            RuleKind::GaussLegendre => Self::gauss_legendre(m),
            RuleKind::Trapezoid => Self::trapezoid(m),
        }
    }

    /// `m`-point Gauss-Legendre rule, exact for polynomials of degree `2m - 1`.
    ///
    /// Nodes are found by Newton iteration on `P_m` in `f64`, starting from the
    /// Tricomi approximation, and then converted to `T`.
    pub fn gauss_legendre(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "a Gauss-Legendre rule needs at least one node"));
        }
        let mut nodes = vec![0.0f64; m];
        let mut weights = vec![0.0f64; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // three-term recurrence for P_m and its derivative
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pm = if m == 1 { x } else { p1 };
                let pm1 = if m == 1 { 1.0 } else { p0 };
                dp = mf * (x * pm - pm1) / (x * x - 1.0);
                let dx = pm / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Ok(Self {
            kind: RuleKind::GaussLegendre,
            nodes: nodes.into_iter().map(T::of).collect(),
            weights: weights.into_iter().map(T::of).collect(),
        })
    }

    /// Composite trapezoid rule with `m >= 2` equispaced nodes including both ends.
    pub fn trapezoid(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("m", "a trapezoid rule needs at least two nodes"));
        }
        let h = 2.0 / (m - 1) as f64;
        let nodes = (0..m).map(|i| T::of(-1.0 + h * i as f64)).collect();
        let weights = (0..m)
            .map(|i| T::of(if i == 0 || i == m - 1 { h / 2.0 } else { h }))
            .collect();
        Ok(Self {
            kind: RuleKind::Trapezoid,
            nodes,
            weights,
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `∫_a^b f`.
    pub fn integrate<F>(&self, a: T, b: T, mut f: F) -> Result<T>
    where
        F: FnMut(T) -> Result<T>,
    {
        let half = (b - a) / T::of(2.0);
        let mid = (a + b) / T::of(2.0);
        let mut acc = T::zero();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let x = mid + half * t;
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { node: vec![x.as_f64()] });
            }
            acc = acc + w * v;
        }
        Ok(acc * half)
    }

    /// Integral over an interval that may be unbounded.
    ///
    /// Finite intervals use the affine map; `(-∞, ∞)` uses `x = s·tan u`,
    /// half-lines use `x = a ± s·tan u` with `u ∈ [0, π/2)`.
    pub fn integrate_interval<F>(&self, iv: Interval<T>, scale: T, mut f: F) -> Result<T>
    where
        F: FnMut(T) -> Result<T>,
    {
        if iv.is_empty() {
            return Ok(T::zero());
        }
        let map = IntervalMap::new(iv, scale);
        let mut acc = T::zero();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let (x, jw) = map.apply(t, w);
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { node: vec![x.as_f64()] });
            }
            acc = acc + jw * v;
        }
        Ok(acc)
    }

    /// Node/weight pairs of [`Rule::integrate_interval`].
    pub fn interval_nodes(&self, iv: Interval<T>, scale: T) -> Vec<(T, T)> {
        if iv.is_empty() {
            return Vec::new();
        }
        let map = IntervalMap::new(iv, scale);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| map.apply(t, w))
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum IntervalMap<T> {
    Affine { mid: T, half: T },
    Full { scale: T },
    Lower { a: T, scale: T },
    Upper { b: T, scale: T },
}

impl<T: Scalar> IntervalMap<T> {
    fn new(iv: Interval<T>, scale: T) -> Self {
        let two = T::of(2.0);
        match (iv.lo.is_finite(), iv.hi.is_finite()) {
            (true, true) => Self::Affine {
                mid: (iv.lo + iv.hi) / two,
                half: (iv.hi - iv.lo) / two,
            },
            (false, false) => Self::Full { scale },
            (true, false) => Self::Lower { a: iv.lo, scale },
            (false, true) => Self::Upper { b: iv.hi, scale },
        }
    }

    /// Maps the reference node `t ∈ [-1, 1]` with weight `w` to `(x, w·dx/dt)`.
    #[inline]
    fn apply(&self, t: T, w: T) -> (T, T) {
        let quarter_pi = T::FRAC_PI_4();
        match *self {
            Self::Affine { mid, half } => (mid + half * t, w * half),
            Self::Full { scale } => {
                let u = T::FRAC_PI_2() * t;
                let c = u.cos();
                (scale * u.tan(), w * T::FRAC_PI_2() * scale / (c * c))
            }
            Self::Lower { a, scale } => {
                let u = quarter_pi * (t + T::one());
                let c = u.cos();
                (a + scale * u.tan(), w * quarter_pi * scale / (c * c))
            }
            Self::Upper { b, scale } => {
                let u = quarter_pi * (t + T::one());
                let c = u.cos();
                (b - scale * u.tan(), w * quarter_pi * scale / (c * c))
            }
        }
    }
}

/// Closed interval `[lo, hi]`; either end may be infinite. Empty when `lo >= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn real_line() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn symmetric(r: T) -> Self {
        Self { lo: -r, hi: r }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn hull(&self, other: &Self) -> Self {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn shift(&self, c: T) -> Self {
        Self {
            lo: self.lo + c,
            hi: self.hi + c,
        }
    }

    /// Image under `x ↦ a·x` for `a > 0`.
    pub fn scale(&self, a: T) -> Self {
        Self {
            lo: self.lo * a,
            hi: self.hi * a,
        }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> T {
        (self.lo + self.hi) / T::of(2.0)
    }

    /// Image under `x ↦ x²` restricted to `x >= 0`.
    pub fn square_nonneg(&self) -> Self {
        let lo = self.lo.max(T::zero());
        Self {
            lo: lo * lo,
            hi: if self.hi > T::zero() { self.hi * self.hi } else { T::zero() },
        }
    }

    /// Image under `x ↦ √x` restricted to `x >= 0`.
    pub fn sqrt_nonneg(&self) -> Self {
        if self.hi <= T::zero() {
            return Self::new(T::zero(), T::zero());
        }
        Self {
            lo: self.lo.max(T::zero()).sqrt(),
            hi: self.hi.sqrt(),
        }
    }
}

/// Quadrature parameters shared by every integral in the crate.
#[derive(Debug, Clone)]
pub struct QuadratureSpec<T> {
    /// Truncation radius used when an integrand carries no support hint.
    pub r_max: T,
    /// Nodes per axis.
    pub m: usize,
    /// Inner cutoff of singular integrals when no schedule is used.
    pub eps: T,
    /// Decreasing cutoffs for limit extrapolation.
    pub eps_schedule: Vec<T>,
    rule: Arc<Rule<T>>,
}

impl<T: Scalar> QuadratureSpec<T> {
    pub fn new(kind: RuleKind, r_max: T, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("m", format!("need at least 2 nodes per axis, got {m}")));
        }
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return Err(invalid("r_max", format!("must be positive and finite, got {r_max}")));
        }
        Ok(Self {
            r_max,
            m,
            eps: T::of(0.025),
            eps_schedule: [0.2, 0.1, 0.05, 0.025].iter().map(|&e| T::of(e)).collect(),
            rule: Arc::new(Rule::new(kind, m)?),
        })
    }

    pub fn gauss_legendre(r_max: T, m: usize) -> Result<Self> {
        Self::new(RuleKind::GaussLegendre, r_max, m)
    }

    /// Tensor Gauss-Legendre with 200 nodes per axis in `n = 2`, 80 in
    /// `n = 3` and 40 beyond.
    pub fn default_for_dim(n: usize) -> Self {
        let m = match n {
            0..=2 => 200,
            3 => 80,
            _ => 40,
        };
        Self::gauss_legendre(T::of(8.0), m).expect("valid default quadrature")
    }

    pub fn with_nodes(&self, m: usize) -> Result<Self> {
        let mut out = Self::new(self.rule.kind(), self.r_max, m)?;
        out.eps = self.eps;
        out.eps_schedule = self.eps_schedule.clone();
        Ok(out)
    }

    pub fn with_r_max(mut self, r_max: T) -> Result<Self> {
        if !(r_max > T::zero()) || !r_max.is_finite() {
            return Err(invalid("r_max", "must be positive and finite"));
        }
        self.r_max = r_max;
        Ok(self)
    }

    pub fn with_eps_schedule(mut self, schedule: Vec<T>) -> Result<Self> {
        validate_schedule(&schedule)?;
        self.eps = *schedule.last().unwrap();
        self.eps_schedule = schedule;
        Ok(self)
    }

    pub fn kind(&self) -> RuleKind {
        self.rule.kind()
    }

    pub fn rule(&self) -> &Rule<T> {
        &self.rule
    }
}

pub(crate) fn validate_schedule<T: Scalar>(schedule: &[T]) -> Result<()> {
    if schedule.is_empty() {
        return Err(invalid("eps_schedule", "must not be empty"));
    }
    if schedule.iter().any(|&e| !(e > T::zero()) || !e.is_finite()) {
        return Err(invalid("eps_schedule", "every cutoff must be positive and finite"));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps_schedule", "cutoffs must be strictly decreasing"));
    }
    Ok(())
}

/// Tensor-product integral of `f` over the box `lo × … × hi`.
pub fn integrate_box<T, F>(lo: &[T], hi: &[T], rule: &Rule<T>, mut f: F) -> Result<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    let k = lo.len();
    assert_eq!(k, hi.len());
    if k == 0 {
        return f(&[]);
    }
    if lo.iter().zip(hi).any(|(&a, &b)| !(a < b)) {
        return Ok(T::zero());
    }
    let two = T::of(2.0);
    let half: Coords<T> = lo.iter().zip(hi).map(|(&a, &b)| (b - a) / two).collect();
    let mid: Coords<T> = lo.iter().zip(hi).map(|(&a, &b)| (b + a) / two).collect();
    let m = rule.len();
    let mut idx = vec![0usize; k];
    let mut x: Coords<T> = mid.clone();
    let jac = half.iter().fold(T::one(), |acc, &h| acc * h);
    let mut acc = T::zero();
    loop {
        let mut w = T::one();
        for d in 0..k {
            x[d] = mid[d] + half[d] * rule.nodes[idx[d]];
            w = w * rule.weights[idx[d]];
        }
        let v = f(&x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { node: to_f64_vec(&x) });
        }
        acc = acc + w * v;
        // odometer increment, last axis fastest
        let mut d = k;
        loop {
            if d == 0 {
                return Ok(acc * jac);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Tensor-product integral over boxes whose axes may be unbounded
/// (see [`Rule::integrate_interval`] for the maps).
pub fn integrate_region<T, F>(axes: &[Interval<T>], scale: T, rule: &Rule<T>, mut f: F) -> Result<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    if axes.iter().all(|a| a.is_finite()) {
        let lo: Coords<T> = axes.iter().map(|a| a.lo).collect();
        let hi: Coords<T> = axes.iter().map(|a| a.hi).collect();
        return integrate_box(&lo, &hi, rule, f);
    }
    let per_axis: Vec<Vec<(T, T)>> = axes.iter().map(|a| rule.interval_nodes(*a, scale)).collect();
    if per_axis.iter().any(|v| v.is_empty()) {
        return Ok(T::zero());
    }
    let k = axes.len();
    let mut idx = vec![0usize; k];
    let mut x: Coords<T> = smallvec::smallvec![T::zero(); k];
    let mut acc = T::zero();
    loop {
        let mut w = T::one();
        for d in 0..k {
            let (xd, wd) = per_axis[d][idx[d]];
            x[d] = xd;
            w = w * wd;
        }
        let v = f(&x)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { node: to_f64_vec(&x) });
        }
        acc = acc + w * v;
        let mut d = k;
        loop {
            if d == 0 {
                return Ok(acc);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < per_axis[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Integral of `f` over `[-R_max, R_max]^k`.
pub fn integrate<T, F>(f: F, k: usize, spec: &QuadratureSpec<T>) -> Result<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<T>,
{
    if k == 0 {
        return Err(Error::Dimension("integration dimension must be positive".into()));
    }
    let r = spec.r_max;
    integrate_box(&vec![-r; k], &vec![r; k], spec.rule(), f)
}

/// Product rule on the unit sphere `S^{d-1} ⊂ R^d`.
///
/// `d = 1`: the two points `±1`; `d = 2`: `m` equispaced angles; `d >= 3`:
/// Gauss-Legendre in the polar angle (weight `sin^{d-2}`) times the rule on
/// `S^{d-2}`. With even `m` the rule is invariant under `ω ↦ -ω`.
#[derive(Debug, Clone)]
pub struct SphereRule<T> {
    dirs: Vec<Coords<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> SphereRule<T> {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        match d {
            0 => Err(Error::Dimension("sphere rule needs d >= 1".into())),
            1 => Ok(Self {
                dirs: vec![smallvec::smallvec![T::one()], smallvec::smallvec![-T::one()]],
                weights: vec![T::one(), T::one()],
            }),
            2 => {
                if m < 2 || m % 2 == 1 {
                    return Err(invalid("angular nodes", format!("need an even count >= 2, got {m}")));
                }
                let step = 2.0 * std::f64::consts::PI / m as f64;
                let dirs = (0..m)
                    .map(|i| {
                        let a = step * (i as f64 + 0.5);
                        smallvec::smallvec![T::of(a.cos()), T::of(a.sin())]
                    })
                    .collect();
                Ok(Self {
                    dirs,
                    weights: vec![T::of(step); m],
                })
            }
            _ => {
                let inner = Self::new(d - 1, m)?;
                let polar = Rule::<f64>::gauss_legendre((m / 2).max(2))?;
                let mut dirs = Vec::new();
                let mut weights = Vec::new();
                let pi = std::f64::consts::PI;
                for (&t, &w) in polar.nodes().iter().zip(polar.weights()) {
                    let th = pi / 2.0 * (t + 1.0);
                    let wt = w * pi / 2.0 * th.sin().powi(d as i32 - 2);
                    for (dir, &wi) in inner.dirs.iter().zip(&inner.weights) {
                        let mut v: Coords<T> = smallvec::smallvec![T::of(th.cos())];
                        v.extend(dir.iter().map(|&c| c * T::of(th.sin())));
                        dirs.push(v);
                        weights.push(T::of(wt) * wi);
                    }
                }
                Ok(Self { dirs, weights })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], T)> + '_ {
        self.dirs.iter().map(|d| d.as_slice()).zip(self.weights.iter().copied())
    }
}

/// Closed per-axis ranges with node counts; nodes are equispaced and include
/// both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    axes: Vec<(T, T, usize)>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(axes: Vec<(T, T, usize)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Dimension("grid needs at least one axis".into()));
        }
        for &(lo, hi, count) in &axes {
            if count < 2 {
                return Err(invalid("grid", format!("node count must be >= 2, got {count}")));
            }
            if !(lo < hi) {
                return Err(invalid("grid", format!("degenerate range [{lo}, {hi}]")));
            }
        }
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.2).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.2).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axes(&self) -> &[(T, T, usize)] {
        &self.axes
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> T {
        let (lo, hi, count) = self.axes[axis];
        if i + 1 == count {
            return hi;
        }
        lo + (hi - lo) * T::of_usize(i) / T::of_usize(count - 1)
    }

    /// Node coordinates in row-major order (last axis fastest).
    pub fn nodes(&self) -> Vec<Coords<T>> {
        let shape = self.shape();
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; shape.len()];
        loop {
            out.push(idx.iter().enumerate().map(|(a, &i)| self.coordinate(a, i)).collect());
            let mut d = shape.len();
            loop {
                if d == 0 {
                    return out;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    pub(crate) fn reshape(&self, values: Vec<T>) -> ArrayD<T> {
        ArrayD::from_shape_vec(IxDyn(&self.shape()), values).expect("grid shape matches node count")
    }
}
