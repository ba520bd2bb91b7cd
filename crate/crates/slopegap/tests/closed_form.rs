use std::f64::consts::PI;

use proptest::prelude::*;
use slopegap::closed_form::*;

#[test]
fn anchors() {
    assert!((w_tail(0.0, TailSource::ClosedForm).unwrap() - (3.0 + PI * PI) / 6.0).abs() < 1e-12);
    assert!((w_tail(1.0, TailSource::ClosedForm).unwrap() - ((3.0 + PI * PI) / 6.0 - 0.875)).abs() < 1e-12);
    assert!((normalized_tail(0.0, TailSource::Quadrature).unwrap() - 1.0).abs() < 1e-8);
}

#[test]
fn frozen_tail_values() {
    // Closed form on [0, 2), cross-checked against the direct fibre integral.
    for (t, g) in [(0.5, 1.707434066848226), (1.5, 0.841301952639073), (1.9, 0.592561359589185)] {
        assert!((w_tail(t, TailSource::ClosedForm).unwrap() - g).abs() < 1e-12, "t = {t}");
    }
    for (t, g) in [(5.0, 0.061865136530), (10.0, 0.013178924086), (30.0, 0.001346482876)] {
        assert!((w_tail(t, TailSource::Quadrature).unwrap() - g).abs() < 1e-10, "t = {t}");
    }
}

#[test]
fn quadrature_tail_is_nonincreasing() {
    let spec = QuadratureSpec { rel_tol: 1e-5, ..Default::default() };
    let mut prev = f64::INFINITY;
    for i in 0..=1000 {
        let t = 0.1 * i as f64;
        let g = w_tail_quadrature_with(t, spec).unwrap();
        assert!(g <= prev + 1e-7, "t = {t}");
        prev = g;
    }
}

#[test]
fn density_on_first_piece() {
    let Density::Value { value } = w_density(0.5, 1e-4, TailSource::ClosedForm, false).unwrap() else { panic!() };
    assert!((value - 0.875).abs() < 1e-9);
    assert!(matches!(w_density(1.0, 1e-4, TailSource::ClosedForm, false), Err(ClosedFormError::Ambiguous { .. })));
    let Density::OneSided { left, .. } = w_density(1.0, 1e-4, TailSource::ClosedForm, true).unwrap() else { panic!() };
    assert!((left - 0.875).abs() < 1e-9);
}

#[test]
fn normalized_density_integrates_to_one() {
    // Trapezoid of the density on [0, 2) plus the remaining tail mass.
    let n = 2000;
    let h = 2.0 / n as f64;
    let dens = |t: f64| match w_density(t, 1e-5, TailSource::ClosedForm, true).unwrap() {
        Density::Value { value } => value,
        Density::OneSided { left, right } => 0.5 * (left + right),
    };
    let mut int = 0.0;
    for i in 0..n {
        let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
        let lo = if i == 0 { 0.875 } else { dens(x0) };
        let hi = if i + 1 == n { dens(x1 - 1e-4) } else { dens(x1) };
        int += 0.5 * (lo + hi) * h;
    }
    let total = (int + w_tail_quadrature(2.0).unwrap()) / g_zero();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

#[test]
fn torsion_values() {
    let want = [(8.0, 0.018140186548), (16.0, 0.004179759917), (64.0, 0.000248058050)];
    for q in [2, 3, 5] {
        for (t, v) in want {
            // Small t relative to q picks up extra mass from the second region.
            if t >= 2.0 * q as f64 {
                assert!((torsion_tail(q, t).unwrap().total - v).abs() < 1e-10, "q = {q}, t = {t}");
            }
        }
    }
    assert!((torsion_tail(5, 8.0).unwrap().total - 0.020485330106).abs() < 1e-10);
    // alpha = a lies on the other side of the region boundary and doubles the tail.
    assert!((torsion_tail(1, 16.0).unwrap().total - 2.0 * 0.004179759917).abs() < 1e-10);
    for q in [2, 3] {
        let t = torsion_tail(q, 16.0).unwrap();
        assert!((torsion_c1_list(q, 16.0).unwrap() - t.c1).abs() < 1e-10);
    }
    assert!(matches!(torsion_tail(3, 2.5), Err(ClosedFormError::OutOfRegime(_))));
}

#[test]
fn torsion_tails_decay_quadratically() {
    for q in [1, 2, 3] {
        let v: Vec<f64> = geometric_grid(8.0, 64.0, 7).iter().map(|&t| t * t * torsion_tail(q, t).unwrap().total).collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        assert!(hi / lo < 3.0, "q = {q}: {v:?}");
    }
}

#[test]
fn omega_bounds() {
    for t in [10.0, 20.0, 50.0, 100.0] {
        let b = omega_tail_bounds(t).unwrap();
        assert!(b.lower > 0.0 && b.lower < b.upper);
        assert!((b.lower * t * t - 0.42).abs() < 0.03, "t = {t}");
        // Lower-bound piece from the second region vanishes for t >= 1.
        assert_eq!(b.omega2_lower, 0.0);
    }
    let (u10, u100) = (omega_tail_bounds(10.0).unwrap().upper * 10.0, omega_tail_bounds(100.0).unwrap().upper * 100.0);
    assert!(u100 / u10 < 3.0);
}

#[test]
fn cubic_roots() {
    for t in [13.5, 20.0, 100.0, 1e4] {
        for k in [1, 2] {
            let b = cubic_root(t, k).unwrap();
            assert!((t * b * (1.0 - b).powi(2) - 2.0).abs() < 1e-9, "t = {t}, k = {k}");
        }
        assert!(cubic_root(t, 2).unwrap() <= cubic_root(t, 1).unwrap());
    }
    assert!((cubic_root(100.0, 2).unwrap() - 0.020861309769).abs() < 1e-11);
    assert!(cubic_root(13.0, 1).is_err());
    assert!(cubic_root(20.0, 3).is_err());
}

#[test]
fn tail_decay_exponent() {
    let ts = geometric_grid(8.0, 128.0, 9);
    let v: Vec<f64> = ts.iter().map(|&t| normalized_tail(t, TailSource::Quadrature).unwrap()).collect();
    let e = fit_decay_exponent(&ts, &v).unwrap();
    assert!((-2.1..=-2.0).contains(&e), "{e}");
}

#[test]
fn closed_form_continuity_holds_at_one() {
    let c = continuity_report().unwrap();
    assert!(c[0].jump() < 1e-6);
    let m = piece_mismatch(20).unwrap();
    assert!(m[0].max_abs_diff < 1e-6 && m[1].max_abs_diff < 1e-6);
}

#[test]
fn domain_errors() {
    assert!(w_tail(-1.0, TailSource::ClosedForm).is_err());
    assert!(w_tail(f64::NAN, TailSource::Quadrature).is_err());
    assert!(dilog(1.01).is_err());
    assert!(fit_decay_exponent(&[1.0, 2.0], &[1.0, 0.5]).is_err());
}

proptest! {
    #[test]
    fn dilog_reflection(x in 1e-6f64..(1.0 - 1e-6)) {
        let lhs = dilog(x).unwrap() + dilog(1.0 - x).unwrap();
        let rhs = PI * PI / 6.0 - x.ln() * (1.0 - x).ln();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dilog_is_increasing(x in -5.0f64..0.99, d in 1e-6f64..0.01) {
        prop_assert!(dilog(x + d).unwrap() > dilog(x).unwrap());
    }
}
