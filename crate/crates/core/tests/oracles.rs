//! Values checked against quadratures and closed forms that share no code
//! with the library.

use std::f64::consts::PI;

use sonar_radon::inversion::hypersingular_apply;
use sonar_radon::transforms::{parabolic_field, transversal_field};
use sonar_radon::*;
use statrs::function::erf::erf;

fn pt(c: &[f64]) -> Point64 {
    Point64::from_f64(c).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson on `[a, b]`, started from 64 equal pieces so narrow
/// features are not skipped.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(&f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 30)
        })
        .sum()
}

fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn gaussian(n: usize, domain: Domain) -> Field64 {
    make_test_field(PhantomKind::Gaussian, &Point64::origin(n).unwrap(), 1.0, domain).unwrap()
}

#[test]
fn quartic_gaussian_integral() {
    let want = simpson(|t| (-t * t - t.powi(4)).exp(), -4.0, 4.0, 1e-12);
    // 1.368427, often quoted as 1.3688
    assert!((want - 1.368_426_855_7).abs() < 1e-9, "Simpson value {want}");
    let spec = Spec64::gauss_legendre(4.0, 400).unwrap();
    let got = integrate(|t: &[f64]| Ok((-t[0] * t[0] - t[0].powi(4)).exp()), 1, &spec).unwrap();
    assert!(rel(got, want) < 1e-8, "integrate {got} vs {want}");

    let p = parabolic_p(&gaussian(2, Domain::FullSpace), &pt(&[0.0, 0.0]), &Spec64::default_for_dim(2), ParabolicVariant::Full)
        .unwrap();
    assert!(rel(p, want) < 1e-8, "P {p} vs {want}");
}

#[test]
fn sonar_bump_matches_dense_trapezoid() {
    let phi = make_test_field(PhantomKind::Bump, &pt(&[0.0, 1.0]), 0.5, Domain::HalfSpace).unwrap();
    let m = 1_000_000;
    let h = PI / m as f64;
    let mut acc = 0.0;
    // the bump vanishes near both end points, which lie on the boundary
    for k in 1..m {
        let a = k as f64 * h;
        acc += phi.eval(&pt(&[a.cos(), a.sin()])).unwrap();
    }
    let want = acc * h;
    let got = sonar_h(&phi, &[0.0], 1.0, &Spec64::default_for_dim(2)).unwrap();
    assert!(want > 0.05);
    assert!(rel(got, want) < 1e-9, "{got} vs {want}");
}

#[test]
fn sonar_of_gaussian_closed_form() {
    let phi = gaussian(2, Domain::HalfSpace);
    let spec = Spec64::default_for_dim(2);
    for (x, r) in [(0.0f64, 0.7f64), (0.4, 1.0), (-0.8, 1.5)] {
        let want = r * (-x * x - r * r).exp() * PI * bessel_i0(2.0 * x * r);
        let got = sonar_h(&phi, &[x], r, &spec).unwrap();
        assert!(rel(got, want) < 1e-10, "({x}, {r}): {got} vs {want}");
    }
}

#[test]
fn hemisphere_first_moment_in_three_dimensions() {
    let phi = Field64::new(3, Domain::HalfSpace, Support::everywhere(3), |x: &Point64| Ok(x.xn())).unwrap();
    let spec = Spec64::default_for_dim(3);
    for r in [0.5f64, 1.0, 2.0] {
        let got = sonar_h(&phi, &[0.3, -0.1], r, &spec).unwrap();
        assert!(rel(got, PI * r.powi(3)) < 1e-10, "r = {r}: {got}");
    }
}

#[test]
fn classical_radon_of_gaussian_in_three_dimensions() {
    let f = gaussian(3, Domain::FullSpace);
    let spec = Spec64::default_for_dim(3);
    for t in [0.0f64, 0.6, -1.3] {
        let plane = Plane64::new(&[1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0], t).unwrap();
        let got = classical_r(&f, &plane, &spec).unwrap();
        assert!(rel(got, PI * (-t * t).exp()) < 1e-10, "t = {t}: {got}");
    }
}

/// `∫_0^∞ 2π (1 - J_0(ρ)) ρ^{-2} dρ`, with the angular mean of
/// `1 - cos(ρ cos α)` taken by a periodic trapezoid rule.
#[test]
fn dnl_2_1_by_polar_quadrature() {
    let angular = |rho: f64| -> (f64, f64) {
        let m = 64 + 2 * rho.ceil() as usize;
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..m {
            let c = (2.0 * PI * (k as f64 + 0.5) / m as f64).cos();
            re += 1.0 - (rho * c).cos();
            im -= (rho * c).sin();
        }
        (re * 2.0 * PI / m as f64, im * 2.0 * PI / m as f64)
    };
    let big = 400.0;
    let radial = simpson(
        |rho| if rho < 1e-6 { PI / 2.0 } else { angular(rho).0 / (rho * rho) },
        0.0,
        big,
        1e-10,
    );
    // beyond `big` only the constant 2π survives (J_0 tail is O(big^{-3/2}))
    let oracle = radial + 2.0 * PI / big;
    assert!(rel(oracle, 2.0 * PI) < 1e-6, "oracle {oracle}");
    let got = dnl_constant(2, 1).unwrap();
    assert!(rel(got, oracle) < 1e-6, "{got} vs {oracle}");
    assert!(rel(got * c_n(2), 1.0) < 1e-3);

    for rho in [0.3, 2.0, 17.0, 150.0] {
        let (re, im) = angular(rho);
        assert!(im.abs() <= 1e-10 * re.abs().max(1.0), "imaginary part {im} at {rho}");
    }
}

/// `∫_0^∞ ρ^{-3} 2π ∫_{-1}^{1} Re(1 - e^{iρu})³ du dρ`.
#[test]
fn dnl_3_3_by_polar_quadrature() {
    let sinc = |x: f64| x.sin() / x;
    let shell = |rho: f64| {
        if rho < 1.0 {
            // power series of 2 - 6 sinc ρ + 6 sinc 2ρ - 2 sinc 3ρ
            let mut sum = 0.0;
            let mut fact = 1.0;
            for k in 1..14 {
                fact *= ((2 * k) * (2 * k + 1)) as f64;
                let c = -6.0 + 6.0 * 4f64.powi(k) - 2.0 * 9f64.powi(k);
                sum += if k % 2 == 1 { -1.0 } else { 1.0 } * c * rho.powi(2 * k) / fact;
            }
            return 2.0 * PI * sum;
        }
        2.0 * PI * (2.0 - 6.0 * sinc(rho) + 6.0 * sinc(2.0 * rho) - 2.0 * sinc(3.0 * rho))
    };
    let big = 400.0;
    let radial = simpson(|rho| if rho == 0.0 { 0.0 } else { shell(rho) / rho.powi(3) }, 0.0, big, 1e-11);
    let oracle = radial + 2.0 * PI * 2.0 / (2.0 * big * big);
    let got = dnl_constant(3, 3).unwrap();
    assert!(rel(got, oracle) < 1e-7, "{got} vs {oracle}");
}

#[test]
fn transversal_closed_form() {
    let psi = gaussian(2, Domain::FullSpace);
    let spec = Spec64::default_for_dim(2);
    for (a, b) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-0.7, 0.4), (2.0, -1.5)] {
        let q: f64 = 1.0 + a * a;
        let want = (PI / q).sqrt() * (-b * b / q).exp();
        let got = transversal_t(&psi, &pt(&[a, b]), &spec).unwrap();
        assert!(rel(got, want) < 1e-12, "({a}, {b}): {got} vs {want}");
    }
}

#[test]
fn transversal_g_closed_forms() {
    let data2: Field<f64> = transversal_field(&gaussian(2, Domain::FullSpace), &Spec64::default_for_dim(2))
        .unwrap()
        .into();
    let g_spec = Config64::default_for_dim(2).g_spec;
    for c in [[0.0, 0.0], [0.5, 0.5], [-1.0, 0.3], [2.0, 1.0]] {
        let r2: f64 = c[0] * c[0] + c[1] * c[1];
        let want = PI.sqrt() / 2.0 * (-r2 / 2.0).exp() * bessel_i0(r2 / 2.0);
        let got = g_functional(InversionKind::T, &data2, &pt(&c), &g_spec).unwrap();
        assert!(rel(got, want) < 1e-10, "{c:?}: {got} vs {want}");
    }

    let data3: Field<f64> = transversal_field(&gaussian(3, Domain::FullSpace), &Spec64::default_for_dim(3))
        .unwrap()
        .into();
    let g_spec = Config64::default_for_dim(3).g_spec;
    for c in [[0.0, 0.0, 0.0], [0.4, -0.3, 0.5]] {
        let r = (c.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let want = if r == 0.0 { 0.5 } else { PI.sqrt() * erf(r) / (4.0 * r) };
        let got = g_functional(InversionKind::T, &data3, &pt(&c), &g_spec).unwrap();
        assert!(rel(got, want) < 1e-8, "{c:?}: {got} vs {want}");
    }
}

/// `π^{-1} ∫ F(z, z²) (1 + 4z²)^{-1/2} dz` with `F = P(gaussian)` computed
/// by an inner Simpson rule, in the variable `z = tan(u)/2`.
#[test]
fn parabolic_g_by_nested_quadrature() {
    let inner = |z: f64| {
        let k = 1.0 + 2.0 * z.abs();
        simpson(
            |s| {
                let y = s / k;
                (-y * y - (2.0 * z * y - y * y).powi(2)).exp() / k
            },
            -50.0,
            50.0,
            1e-12,
        )
    };
    let edge = PI / 2.0 - 1e-7;
    let outer = simpson(
        |u| {
            let z = u.tan() / 2.0;
            inner(z) / (2.0 * u.cos())
        },
        -edge,
        edge,
        1e-10,
    );
    let oracle = outer / PI;

    let spec = Spec64::default_for_dim(2);
    let f: Field<f64> = parabolic_field(&gaussian(2, Domain::FullSpace), &spec, ParabolicVariant::Full)
        .unwrap()
        .into();
    let got = g_functional(InversionKind::P, &f, &pt(&[0.0, 0.0]), &Config64::default_for_dim(2).g_spec).unwrap();
    assert!(rel(got, oracle) < 1e-6, "{got} vs {oracle}");
}

/// With `g` known in closed form, the hypersingular integral over the
/// constant recovers the gaussian for several `ℓ > n - 1`.
#[test]
fn hypersingular_with_analytic_g_in_three_dimensions() {
    let g = Field64::new(3, Domain::FullSpace, Support::everywhere(3), |x: &Point64| {
        let r = x.norm();
        Ok(if r < 1e-8 { 0.5 } else { PI.sqrt() * erf(r) / (4.0 * r) })
    })
    .unwrap();
    for ell in [3usize, 4, 5] {
        let mut cfg = Config64::default_for_dim(3);
        cfg.ell = ell;
        for c in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.4]] {
            let x = pt(&c);
            let got = hypersingular_apply(&g, &x, &cfg).unwrap() / dnl_constant(3, ell).unwrap();
            let want = (-x.norm().powi(2)).exp();
            assert!(rel(got, want) < 1e-3, "ell = {ell}, {c:?}: {got} vs {want}");
        }
    }
}

#[test]
fn weighted_profile_mixed_norm() {
    let prof = Profile64::new(2, Support::everywhere(2), |xp: &[f64], r: f64| {
        Ok((-xp[0] * xp[0]).exp() * r * (-r * r).exp())
    })
    .unwrap();
    let got = mixed_norm(&prof.into(), 3.0, 3.0, MixedWeight::Profile, &Spec64::default_for_dim(2)).unwrap();
    let want = ((PI / 3.0).sqrt() / 6.0).powf(1.0 / 3.0);
    assert!(rel(got, want) < 1e-10, "{got} vs {want}");
}

#[test]
fn single_precision_transforms() {
    let psi = make_test_field(PhantomKind::Gaussian, &Point32::origin(2).unwrap(), 1.0f32, Domain::FullSpace).unwrap();
    let spec = Spec32::default_for_dim(2);
    let t = transversal_t(&psi, &Point32::from_coords(&[1.0f32, 0.0]).unwrap(), &spec).unwrap();
    assert!((t - (std::f32::consts::PI / 2.0).sqrt()).abs() < 1e-5, "{t}");
    let half = make_test_field(PhantomKind::Gaussian, &Point32::origin(2).unwrap(), 1.0f32, Domain::HalfSpace).unwrap();
    let h = sonar_h(&half, &[0.0f32], 1.0, &spec).unwrap();
    assert!((h - std::f32::consts::PI * (-1.0f32).exp()).abs() < 1e-5, "{h}");
}
