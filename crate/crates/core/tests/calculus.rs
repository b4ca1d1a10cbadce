use proptest::prelude::*;

use hahn_varcalc::integral::{
    fundamental_theorem_residual, integral, integral_from_omega0, integration_by_parts_residual,
};
use hahn_varcalc::{HahnParams, QuadratureSpec};

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * t + x)
}

fn params() -> impl Strategy<Value = HahnParams> {
    (0.3..0.95_f64, 0.0..1.0_f64).prop_map(|(q, w)| HahnParams::new(q, w).unwrap())
}

fn poly() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0_f64, 1..5)
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / (1.0 + x.abs().max(y.abs()))
}

/// Largest `|h|` on the hull of `{a, b, omega0}`.
fn hull_max(h: impl Fn(f64) -> f64, p: &HahnParams, a: f64, b: f64) -> f64 {
    let lo = a.min(p.omega0());
    let hi = b.max(p.omega0());
    (0..=100)
        .map(|i| h(lo + (hi - lo) * i as f64 / 100.0).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_fixes_omega0(p in params()) {
        let w0 = p.omega0();
        prop_assert!((p.sigma(w0) - w0).abs() <= 1e-12 * (1.0 + w0.abs()));
    }

    #[test]
    fn derivative_is_linear(p in params(), f in poly(), g in poly(), c in -3.0..3.0_f64, t in -2.0..2.0_f64) {
        prop_assume!((t - p.omega0()).abs() > 0.1);
        let s = p.default_fixed_point_step();
        let ff = |x: f64| horner(&f, x);
        let gg = |x: f64| horner(&g, x);
        let lhs = p.hahn_derivative(|x| c * ff(x) + gg(x), t, s).unwrap();
        let rhs = c * p.hahn_derivative(ff, t, s).unwrap() + p.hahn_derivative(gg, t, s).unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-9);
    }

    #[test]
    fn product_rule(p in params(), f in poly(), g in poly(), t in -2.0..2.0_f64) {
        prop_assume!((t - p.omega0()).abs() > 0.1);
        let s = p.default_fixed_point_step();
        let ff = |x: f64| horner(&f, x);
        let gg = |x: f64| horner(&g, x);
        let lhs = p.hahn_derivative(|x| ff(x) * gg(x), t, s).unwrap();
        let df = p.hahn_derivative(ff, t, s).unwrap();
        let dg = p.hahn_derivative(gg, t, s).unwrap();
        prop_assert!(rel(lhs, df * gg(t) + ff(p.sigma(t)) * dg) < 1e-9);
    }

    #[test]
    fn shift_identity(p in params(), f in poly(), t in -2.0..2.0_f64) {
        prop_assume!((t - p.omega0()).abs() > 0.1);
        let ff = |x: f64| horner(&f, x);
        let df = p.hahn_derivative(ff, t, p.default_fixed_point_step()).unwrap();
        prop_assert!(rel(ff(p.sigma(t)), ff(t) + p.step(t) * df) < 1e-12);
    }

    #[test]
    fn power_rule_matches(p in params(), a in -2.0..2.0_f64, b in -2.0..2.0_f64, n in 1u32..7, t in -2.0..2.0_f64) {
        prop_assume!((t - p.omega0()).abs() > 0.1);
        let d = p.hahn_derivative(|x| (a * x + b).powi(n as i32), t, p.default_fixed_point_step()).unwrap();
        prop_assert!(rel(d, p.power_rule(a, b, n, t).unwrap()) < 1e-9);
    }

    #[test]
    fn integral_is_linear(p in params(), f in poly(), g in poly(), c in -3.0..3.0_f64, a in -1.0..1.0_f64, len in 0.1..1.5_f64) {
        let b = a + len;
        let spec = QuadratureSpec::default();
        let ff = |x: f64| horner(&f, x);
        let gg = |x: f64| horner(&g, x);
        let lhs = integral(|x| c * ff(x) + gg(x), &p, a, b, &spec).unwrap().value;
        let rhs = c * integral(ff, &p, a, b, &spec).unwrap().value + integral(gg, &p, a, b, &spec).unwrap().value;
        let scale = 1.0 + hull_max(|x| c.abs() * ff(x).abs() + gg(x).abs(), &p, a, b);
        prop_assert!((lhs - rhs).abs() / scale < 1e-10);
    }

    #[test]
    fn integral_is_additive(p in params(), f in poly(), a in -1.0..1.0_f64, l1 in 0.1..1.0_f64, l2 in 0.1..1.0_f64) {
        let (b, c) = (a + l1, a + l1 + l2);
        let spec = QuadratureSpec::default();
        let ff = |x: f64| horner(&f, x);
        let ab = integral(ff, &p, a, b, &spec).unwrap().value;
        let bc = integral(ff, &p, b, c, &spec).unwrap().value;
        let ac = integral(ff, &p, a, c, &spec).unwrap().value;
        prop_assert!((ab + bc - ac).abs() / (1.0 + hull_max(ff, &p, a, c)) < 1e-10);
    }

    #[test]
    fn integral_is_antisymmetric(p in params(), f in poly(), a in -1.0..1.0_f64, len in 0.1..1.5_f64) {
        let b = a + len;
        let spec = QuadratureSpec::default();
        let ff = |x: f64| horner(&f, x);
        let ab = integral(ff, &p, a, b, &spec).unwrap().value;
        let ba = integral(ff, &p, b, a, &spec).unwrap().value;
        prop_assert!((ab + ba).abs() < 1e-12 * (1.0 + ab.abs()));
    }

    #[test]
    fn fundamental_theorem(p in params(), f in poly(), a in -1.0..1.0_f64, len in 0.1..1.5_f64) {
        let b = a + len;
        let ff = |x: f64| horner(&f, x);
        let r = fundamental_theorem_residual(ff, &p, a, b, &QuadratureSpec::default()).unwrap();
        prop_assert!(r / (1.0 + hull_max(ff, &p, a, b)) < 1e-10);
    }

    #[test]
    fn integration_by_parts(p in params(), f in poly(), g in poly(), a in -1.0..1.0_f64, len in 0.1..1.5_f64) {
        let b = a + len;
        let ff = |x: f64| horner(&f, x);
        let gg = |x: f64| horner(&g, x);
        let r = integration_by_parts_residual(ff, gg, &p, a, b, &QuadratureSpec::default()).unwrap();
        prop_assert!(r / (1.0 + hull_max(|x| ff(x) * gg(x), &p, a, b)) < 1e-10);
    }
}

#[test]
fn constant_integrates_to_length() {
    let p = HahnParams::new(0.5, 0.5).unwrap();
    let spec = QuadratureSpec::default();
    let v = integral(|_| 1.0, &p, 0.0, 1.0, &spec).unwrap().value;
    assert!((v - 1.0).abs() < 1e-12);
    assert_eq!(integral(|t| t * t, &p, 0.7, 0.7, &spec).unwrap().value, 0.0);
    // int_{omega0}^{x} 1 = x - omega0.
    let v = integral_from_omega0(|_| 1.0, &p, 3.0, &spec).unwrap().value;
    assert!((v - 2.0).abs() < 1e-12);
}

#[test]
fn derivative_of_square() {
    // D[t^2] = (q + 1) t + omega.
    let p = HahnParams::new(0.5, 0.5).unwrap();
    let d = p
        .hahn_derivative(|t| t * t, 2.0, p.default_fixed_point_step())
        .unwrap();
    assert!((d - 3.5).abs() < 1e-14);
}

#[test]
fn derivative_at_fixed_point_is_ordinary() {
    let p = HahnParams::new(0.5, 0.5).unwrap();
    let d = p
        .hahn_derivative(|t| t * t * t, p.omega0(), p.default_fixed_point_step())
        .unwrap();
    assert!((d - 3.0).abs() < 1e-6);
}
