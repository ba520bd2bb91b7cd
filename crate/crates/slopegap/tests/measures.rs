use std::f64::consts::PI;

use slopegap::closed_form::{g_zero, torsion_tail};
use slopegap::measures::*;
use slopegap::oracle::Engine;
use slopegap::transversal::{classify_point, OmegaRegion};

const GRID: [f64; 8] = [0.0, 0.05, 0.1, 0.5, 1.0, 2.0, 4.0, 8.0];

fn within(est: f64, se: f64, want: f64, k: f64) -> bool {
    (est - want).abs() <= k * se
}

#[test]
fn omega_total_mass() {
    let m = mc_mass(&MeasureSpec::HaarOmega, 200_000, 5, 2, |_| true).unwrap();
    assert!(within(m.estimate, m.std_error, PI * PI / 6.0, 4.0), "{m:?}");
}

#[test]
fn omega3_slice_mass() {
    let in_o3 = |p: &SamplePoint| matches!(p, SamplePoint::Omega { point } if classify_point(point) == OmegaRegion::O3);
    let m = mc_mass(&MeasureSpec::HaarOmega, 200_000, 6, 2, in_o3).unwrap();
    assert!(within(m.estimate, m.std_error, PI * PI / 6.0 - 1.0, 4.0), "{m:?}");
}

#[test]
fn w_total_mass() {
    let est = mc_tail(&MeasureSpec::HaarW, Engine::Formula, &[0.0], 200_000, 7, 2).unwrap();
    assert!(within(est.total_mass, est.total_mass_se, g_zero(), 4.0), "{} +- {}", est.total_mass, est.total_mass_se);
    assert_eq!(est.survival[0], 1.0);
}

#[test]
fn survival_is_monotone() {
    for m in [MeasureSpec::HaarOmega, MeasureSpec::HaarW, MeasureSpec::Torsion { q: 3 }] {
        let est = mc_tail(&m, Engine::Formula, &GRID, 50_000, 1, 2).unwrap();
        assert!(est.survival.windows(2).all(|w| w[1] <= w[0]), "{m:?}: {:?}", est.survival);
        assert!(est.ci_halfwidth.iter().all(|&c| c >= 0.0));
        assert_eq!(est.failed, 0);
    }
}

#[test]
fn results_do_not_depend_on_workers() {
    let a = mc_tail(&MeasureSpec::HaarW, Engine::Formula, &GRID, 30_000, 4, 1).unwrap();
    let b = mc_tail(&MeasureSpec::HaarW, Engine::Formula, &GRID, 30_000, 4, 3).unwrap();
    assert_eq!(a.survival, b.survival);
    assert_eq!(a.ci_halfwidth, b.ci_halfwidth);
    let c = mc_tail(&MeasureSpec::HaarW, Engine::Formula, &GRID, 30_000, 5, 1).unwrap();
    assert_ne!(a.survival, c.survival);
}

#[test]
fn torsion_tail_matches_integral() {
    let t = 16.0;
    let want = torsion_tail(2, t).unwrap().total;
    let est = mc_tail(&MeasureSpec::Torsion { q: 2 }, Engine::Formula, &[t], 1_000_000, 2, 2).unwrap();
    let se = est.ci_halfwidth[0] / 1.96;
    assert!(within(est.survival[0], se, want, 4.0), "{} vs {want}", est.survival[0]);
}

#[test]
fn periodic_point_is_a_dirac_mass() {
    let est = mc_tail(&MeasureSpec::PeriodicPoint, Engine::Formula, &[1.9, 2.1], 1000, 1, 1).unwrap();
    assert_eq!(est.survival, vec![1.0, 0.0]);
}

#[test]
fn oracle_engines_have_mass_near_zero() {
    for (m, e) in [
        (MeasureSpec::HaarOmega, Engine::OracleAffineOnly),
        (MeasureSpec::HaarOmega, Engine::OracleDoubledSlit),
        (MeasureSpec::HaarW, Engine::OracleAffineOnly),
        (MeasureSpec::HaarW, Engine::OracleDoubledSlit),
    ] {
        let est = mc_tail(&m, e, &[0.05, 0.1], 20_000, 3, 2).unwrap();
        assert_eq!(est.failed, 0);
        assert!(est.survival[1] < 1.0 - 3.0 * est.ci_halfwidth[1], "{m:?} {e:?}");
        assert!(est.survival[0] >= est.survival[1]);
    }
}

#[test]
fn doubled_engine_returns_no_later_than_affine() {
    let grid = [0.25, 0.5, 1.0, 2.0];
    let a = mc_tail(&MeasureSpec::HaarW, Engine::OracleAffineOnly, &grid, 20_000, 8, 2).unwrap();
    let d = mc_tail(&MeasureSpec::HaarW, Engine::OracleDoubledSlit, &grid, 20_000, 8, 2).unwrap();
    for (x, y) in d.survival.iter().zip(&a.survival) {
        assert!(x <= y);
    }
}

#[test]
fn invalid_arguments() {
    assert!(matches!(
        mc_tail(&MeasureSpec::HaarW, Engine::Formula, &[1.0], 0, 1, 1),
        Err(MeasureError::InvalidArgument(_))
    ));
    assert!(matches!(
        mc_tail(&MeasureSpec::HaarW, Engine::Formula, &[f64::NAN], 10, 1, 1),
        Err(MeasureError::InvalidArgument(_))
    ));
    assert!(matches!(
        mc_tail(&MeasureSpec::Torsion { q: 0 }, Engine::Formula, &[1.0], 10, 1, 1),
        Err(MeasureError::InvalidSpec(_))
    ));
    assert!(mc_mass(&MeasureSpec::HaarOmega, 1, 1, 1, |_| true).is_err());
}
