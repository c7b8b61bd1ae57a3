use std::f64::consts::PI;

use approx::assert_relative_eq;
use sonar_radon::factorizations::exponents_match;
use sonar_radon::transforms::transversal_field;
use sonar_radon::*;

fn pt(c: &[f64]) -> Point64 {
    Point64::from_f64(c).unwrap()
}

fn phantom(kind: PhantomKind, c: &[f64], s: f64, domain: Domain) -> Field64 {
    make_test_field(kind, &pt(c), s, domain).unwrap()
}

#[test]
fn phantom_values() {
    let g = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    assert_eq!(g.eval(&pt(&[0.0, 0.0])).unwrap(), 1.0);
    let b = phantom(PhantomKind::Bump, &[0.0, 1.0], 0.5, Domain::FullSpace);
    assert_eq!(b.eval(&pt(&[0.0, 1.5])).unwrap(), 0.0);
    let g3 = phantom(PhantomKind::Gaussian, &[0.0, 0.0, 0.0], 1.0, Domain::FullSpace);
    assert_relative_eq!(g3.eval(&pt(&[1.0, 0.0, 0.0])).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
}

#[test]
fn elementary_integrals() {
    let spec = Spec64::gauss_legendre(8.0, 200).unwrap();
    let v = integrate(|t: &[f64]| Ok((-t[0] * t[0]).exp()), 1, &spec).unwrap();
    assert!((v - PI.sqrt()).abs() < 1e-12);
    let spec = Spec64::gauss_legendre(1.0, 8).unwrap();
    let v = integrate(|_: &[f64]| Ok(1.0), 2, &spec).unwrap();
    assert_relative_eq!(v, 4.0, max_relative = 1e-14);
}

#[test]
fn grid_samples() {
    let g = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    let grid = Grid::new(vec![(-1.0, 1.0, 3), (-1.0, 1.0, 3)]).unwrap();
    let a = sample_on_grid(&g, &grid).unwrap();
    for corner in [[0, 0], [0, 2], [2, 0], [2, 2]] {
        assert_relative_eq!(a[&corner[..]], (-2.0f64).exp(), max_relative = 1e-15);
    }
    let z = sample_on_grid(&Field64::zero(2, Domain::FullSpace).unwrap(), &grid).unwrap();
    assert!(z.iter().all(|&v| v == 0.0));

    let m = phantom(PhantomKind::MonomialTimesGaussian, &[0.0, 0.0], 1.0, Domain::HalfSpace);
    assert_relative_eq!(m.eval(&pt(&[0.0, 1.0])).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
}

#[test]
fn sonar_elementary() {
    let spec = Spec64::default_for_dim(2);
    let one = Field64::constant(2, Domain::HalfSpace, 1.0).unwrap();
    assert_relative_eq!(sonar_h(&one, &[0.7], 2.0, &spec).unwrap(), 2.0 * PI, max_relative = 1e-12);
    let lin = Field64::new(2, Domain::HalfSpace, Support::everywhere(2), |x: &Point64| Ok(x.xn())).unwrap();
    for r in [0.5f64, 1.3] {
        assert_relative_eq!(sonar_h(&lin, &[-0.4], r, &spec).unwrap(), 2.0 * r * r, max_relative = 1e-12);
    }
}

#[test]
fn parabolic_of_zero_and_restriction() {
    let spec = Spec64::default_for_dim(2);
    let z = Field64::zero(2, Domain::FullSpace).unwrap();
    for v in [ParabolicVariant::Full, ParabolicVariant::SurfaceMeasure, ParabolicVariant::Restricted] {
        assert_eq!(parabolic_p(&z, &pt(&[0.3, 0.5]), &spec, v).unwrap(), 0.0);
    }
    let f = phantom(PhantomKind::Bump, &[0.2, 0.6], 0.4, Domain::FullSpace);
    for c in [[0.0, 1.0], [0.5, 0.9], [-0.3, 2.0]] {
        let full = parabolic_p(&f, &pt(&c), &spec, ParabolicVariant::Full).unwrap();
        let restricted = parabolic_p(&f, &pt(&c), &spec, ParabolicVariant::Restricted).unwrap();
        assert_relative_eq!(full, restricted, max_relative = 1e-12);
    }
}

#[test]
fn classical_radon_elementary() {
    let spec = Spec64::default_for_dim(2);
    let f = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    for a in [0.1f64, 1.0, 2.5] {
        let th = [a.cos(), a.sin()];
        let p0 = Plane64::new(&th, 0.0).unwrap();
        let p1 = Plane64::new(&th, 1.0).unwrap();
        assert_relative_eq!(classical_r(&f, &p0, &spec).unwrap(), PI.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(classical_r(&f, &p1, &spec).unwrap(), PI.sqrt() / 1f64.exp(), max_relative = 1e-12);
    }
    let b = phantom(PhantomKind::Bump, &[0.0, 0.0], 0.5, Domain::FullSpace);
    let far = Plane64::new(&[0.6, 0.8], 2.0).unwrap();
    assert_eq!(classical_r(&b, &far, &spec).unwrap(), 0.0);
}

#[test]
fn lambda_relation_examples() {
    let spec = Spec64::default_for_dim(2);
    let f = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    let (l, r) = lambda_relation(&f, &Plane64::new(&[0.0, 1.0], 0.7).unwrap(), &spec).unwrap();
    let t_direct = transversal_t(&f, &pt(&[0.0, 0.7]), &spec).unwrap();
    assert_relative_eq!(l, t_direct, max_relative = 1e-12);
    assert_relative_eq!(r, t_direct, max_relative = 1e-12);

    let s = 0.5f64.sqrt();
    for (theta, t, want) in [
        ([s, s], 0.0, PI.sqrt()),
        ([0.6, 0.8], 0.5, PI.sqrt() * (-0.25f64).exp()),
    ] {
        let (l, r) = lambda_relation(&f, &Plane64::new(&theta, t).unwrap(), &spec).unwrap();
        assert_relative_eq!(l, want, max_relative = 1e-10);
        assert_relative_eq!(r, want, max_relative = 1e-10);
    }
    // the six-digit value is 1.380388
    assert!((PI.sqrt() * (-0.25f64).exp() - 1.380388).abs() < 1e-6);
}

#[test]
fn operator_examples() {
    let g = phantom(PhantomKind::Gaussian, &[0.0, 1.0], 1.0, Domain::HalfSpace);
    let q1 = apply(&OpTag::Q1.into(), &g.clone().into()).unwrap();
    assert_relative_eq!(q1.eval(&pt(&[0.0, 1.0])).unwrap(), 1.0, max_relative = 1e-15);

    let psi = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    let op = OperatorId::scaled(OpTag::BLam, 2.0, 3.0).unwrap();
    let v = apply(&op, &psi.into()).unwrap().eval(&pt(&[1.0, 1.0])).unwrap();
    assert_relative_eq!(v, 0.5 * (-11.25f64).exp(), max_relative = 1e-14);
}

#[test]
fn sonar_identities_on_named_points() {
    let spec = Spec64::default_for_dim(2);
    let phi = phantom(PhantomKind::Bump, &[0.0, 1.0], 0.4, Domain::HalfSpace);
    let mut points = Vec::new();
    for x in [-1.0, 0.0, 1.0] {
        for r in [0.5, 1.0, 2.0] {
            points.push(pt(&[x, r]));
        }
    }
    for id in [Identity::SonarTransversal, Identity::SonarParabolic] {
        let rep = id.verify(&phi, &points, 1e-6, &spec).unwrap();
        assert!(rep.within_tol, "{}: {rep:?}", id.name());
    }
}

#[test]
fn transversal_of_gaussian_named_points() {
    let spec = Spec64::default_for_dim(2);
    let psi = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    for (c, want) in [([0.0, 0.0], 1.772454), ([1.0, 0.0], 1.253314), ([0.0, 1.0], 0.652049)] {
        assert_relative_eq!(transversal_t(&psi, &pt(&c), &spec).unwrap(), want, max_relative = 1e-6);
    }
    let data: Field<f64> = transversal_field(&psi, &spec).unwrap().into();
    let g0 = g_functional(InversionKind::T, &data, &pt(&[0.0, 0.0]), &spec).unwrap();
    assert_relative_eq!(g0, PI.sqrt() / 2.0, max_relative = 1e-12);
    let zero: Field<f64> = Field64::zero(2, Domain::FullSpace).unwrap().into();
    assert_eq!(g_functional(InversionKind::T, &zero, &pt(&[0.3, 0.1]), &spec).unwrap(), 0.0);
}

#[test]
fn exponent_arithmetic() {
    assert!(exponents_match(1.5, 3.0, 2));
    assert!(exponents_match(4.0 / 3.0, 4.0, 3));
    let ((l1, l2), (r1, r2)) = scaling_exponents(1.0, 3.0, 2);
    assert!((l1 - r1).abs() > 1e-12 || (l2 - r2).abs() > 1e-12);
    // λ₂: n/q = 2/3 against 1/p = 1
    assert_relative_eq!(-l2, 2.0 / 3.0, max_relative = 1e-15);
    assert_relative_eq!(-r2, 1.0, max_relative = 1e-15);
    assert!(!exponents_match(1.0, 3.0, 2));
}

#[test]
fn admissible_triples() {
    let (q, s, ok) = admissible(1.5, 2);
    assert!(ok);
    assert_relative_eq!(q, 3.0, max_relative = 1e-12);
    assert_relative_eq!(s, 3.0, max_relative = 1e-12);
    let (q, s, ok) = admissible(4.0 / 3.0, 3);
    assert!(ok);
    assert_relative_eq!(q, 4.0, max_relative = 1e-12);
    assert_relative_eq!(s, 4.0, max_relative = 1e-12);
    assert!(!admissible(2.0, 2).2);
}

#[test]
fn norm_examples() {
    let spec = Spec64::default_for_dim(2);
    let g = phantom(PhantomKind::Gaussian, &[0.0, 0.0], 1.0, Domain::FullSpace);
    assert_relative_eq!(lp_norm(&g, 2.0, LpWeight::None, &spec).unwrap(), (PI / 2.0).sqrt(), max_relative = 1e-12);
    let m = phantom(PhantomKind::MonomialTimesGaussian, &[0.0, 0.0], 1.0, Domain::HalfSpace);
    let want = (0.25 * (PI / 2.0).sqrt()).sqrt();
    assert_relative_eq!(lp_norm(&m, 2.0, LpWeight::HalfSpace, &spec).unwrap(), want, max_relative = 1e-10);
    assert!((want - 0.559757).abs() < 1e-6);
    let z = Field64::zero(2, Domain::FullSpace).unwrap();
    assert_eq!(lp_norm(&z, 1.5, LpWeight::None, &spec).unwrap(), 0.0);

    let sep = Field64::new(2, Domain::FullSpace, Support::everywhere(2), |x: &Point64| {
        Ok((-x[0] * x[0] - x[1] * x[1]).exp())
    })
    .unwrap();
    let v = mixed_norm(&sep.clone().into(), 3.0, 3.0, MixedWeight::None, &spec).unwrap();
    assert_relative_eq!(v, (PI / 3.0).powf(1.0 / 3.0), max_relative = 1e-12);
    let l3 = lp_norm(&sep, 3.0, LpWeight::None, &spec).unwrap();
    assert_relative_eq!(v, l3, max_relative = 1e-12);
}

#[test]
fn finite_difference_expansions() {
    let g = Field64::new(2, Domain::FullSpace, Support::everywhere(2), |x: &Point64| {
        Ok((x[0] * 1.3 - x[1]).sin() + x[1] * x[1])
    })
    .unwrap();
    let (x, y) = (pt(&[0.4, -0.2]), pt(&[0.3, 0.7]));
    let at = |k: f64| g.eval(&pt(&[0.4 - k * 0.3, -0.2 - k * 0.7])).unwrap();
    assert_relative_eq!(finite_difference(&g, &x, &y, 1).unwrap(), at(0.0) - at(1.0), max_relative = 1e-14);
    assert_relative_eq!(
        finite_difference(&g, &x, &y, 2).unwrap(),
        at(0.0) - 2.0 * at(1.0) + at(2.0),
        max_relative = 1e-13
    );
    let affine = Field64::new(2, Domain::FullSpace, Support::everywhere(2), |x: &Point64| Ok(2.0 * x[0] - x[1] + 0.5))
        .unwrap();
    assert!(finite_difference(&affine, &x, &y, 2).unwrap().abs() < 1e-14);
    let c = Field64::constant(2, Domain::FullSpace, 3.0).unwrap();
    for ell in 1..5 {
        assert_eq!(finite_difference(&c, &x, &y, ell).unwrap(), 0.0);
    }
}

#[test]
fn laplacian_examples() {
    let g = phantom(PhantomKind::Gaussian, &[0.0, 0.0, 0.0], 1.0, Domain::FullSpace);
    let x = pt(&[0.0, 0.0, 0.0]);
    assert_eq!(laplacian_power(&g, &x, 0, 0.02).unwrap(), 1.0);
    assert!((laplacian_power(&g, &x, 1, 0.02).unwrap() - 6.0).abs() < 1e-2);
    let h = Field64::new(3, Domain::FullSpace, Support::everywhere(3), |x: &Point64| Ok(x[0])).unwrap();
    assert!(laplacian_power(&h, &pt(&[0.3, 0.2, 0.1]), 1, 0.02).unwrap().abs() < 1e-9);
}

#[test]
#[allow(clippy::approx_constant)]
fn normalization_constants() {
    assert_relative_eq!(c_n(2), 1.0 / (2.0 * PI), max_relative = 1e-14);
    assert_relative_eq!(c_n(2), 0.159155, max_relative = 1e-5);
    let d = dnl_constant(2, 1).unwrap();
    assert_relative_eq!(d, 6.28319, max_relative = 1e-5);
    assert_relative_eq!(d * c_n(2), 1.0, max_relative = 1e-3);
}
