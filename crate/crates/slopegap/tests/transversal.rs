use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slopegap::lattice::{AffineLattice, HolonomySet};
use slopegap::measures::{sample_delta, sample_haar_omega};
use slopegap::oracle::{min_strip_slope, omega_oracle, oracle_gap_sequence};
use slopegap::transversal::*;

fn om(a: f64, b: f64, s: f64, alpha: f64) -> OmegaPoint {
    OmegaPoint::Generic(OmegaCoords::new(a, b, s, alpha).unwrap())
}

fn close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * y.abs().max(1.0)
}

/// BCZ return times against the oracle's successive first returns to the strip.
#[test]
fn bcz_times_equal_primitive_slope_gaps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut d = sample_delta(&mut rng);
        let start = AffineLattice::lattice(d.matrix()).unwrap();
        let oracle = oracle_gap_sequence(&start, HolonomySet::PrimitiveLattice, 1000).unwrap();
        for r in oracle {
            worst = worst.max((bcz_return_time(&d) - r).abs());
            d = bcz_return_map(&d);
        }
    }
    assert!(worst < 1e-9, "max deviation {worst}");
}

#[test]
fn worked_return_times() {
    let cases = [
        (om(0.5, 1.0, 0.2, 0.75), 0.4),
        (om(0.8, 0.5, 1.0, 0.3), 0.9375),
        (om(0.5, 0.6, 2.0, 0.9), 1.8),
        (OmegaPoint::Vl(VLCoords::new(0.5, 0.2, 0.5).unwrap()), 1.0),
        (om(1.0, 1.0, 0.0, 0.5), 2.0),
    ];
    for (p, want) in cases {
        assert!((omega_return_time(&p).unwrap() - want).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn worked_examples_agree_with_oracle() {
    for p in [
        om(0.5, 1.0, 0.2, 0.75),
        om(0.8, 0.5, 1.0, 0.3),
        om(0.5, 0.6, 2.0, 0.9),
        OmegaPoint::Vl(VLCoords::new(0.5, 0.2, 0.5).unwrap()),
        om(1.0, 1.0, 0.0, 0.5),
    ] {
        let f = omega_return_time(&p).unwrap();
        let o = omega_oracle(&p, HolonomySet::Coset).unwrap();
        assert!(close(f, o, 1e-9), "{p:?}: {f} vs {o}");
    }
}

#[test]
fn o2_formula_overshoots_for_large_s() {
    // O2 with j = 0: the formula gives s a/(alpha - a) = 4, but the coset vector
    // (0.65, 2.2) reaches the horizontal first, at time 2.2/0.65 = 44/13.
    let p = om(0.5, 0.9, 2.0, 0.75);
    assert_eq!(classify_point(&p), OmegaRegion::O2);
    assert_eq!(OmegaCoords::new(0.5, 0.9, 2.0, 0.75).unwrap().j(), 0.0);
    assert!((omega_return_time(&p).unwrap() - 4.0).abs() < 1e-12);
    let (o, w) = min_strip_slope(&p.lattice(), HolonomySet::Coset, None).unwrap();
    assert!((o - 44.0 / 13.0).abs() < 1e-12);
    assert!((w.x - 0.65).abs() < 1e-12 && (w.y - 2.2).abs() < 1e-12);
    assert!(p.lattice().contains(w, 1e-12).unwrap());
    // Smaller s in the same region is consistent.
    let q = om(0.5, 0.9, 1.0, 0.75);
    assert!((omega_oracle(&q, HolonomySet::Coset).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn region_boundaries_are_rare() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let mut near = 0;
    for _ in 0..n {
        let (p, _) = sample_haar_omega(&mut rng);
        let (a, b, s, al) = (p.a, p.b, p.s, p.alpha);
        let d = [(al - a).abs(), (b + al - 1.0).abs(), if al > a { (s - (al - a) / (a * b * al)).abs() } else { 1.0 }];
        if d.iter().any(|&x| x < 1e-9) {
            near += 1;
        }
    }
    assert!((near as f64) / (n as f64) < 1e-6);
}

#[test]
fn bcz_stays_in_delta() {
    let mut d = DeltaCoords::new(0.7548776662466927, 0.5698402909980532).unwrap();
    for _ in 0..10_000 {
        d = bcz_return_map(&d);
        assert!(d.a > 0.0 && d.a <= 1.0 && d.b <= 1.0 && d.a + d.b > 1.0 - 1e-12);
    }
}

proptest! {
    #[test]
    fn recoordinatize_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = sample_haar_omega(&mut rng);
        let back = recoordinatize_omega(&p.lattice()).unwrap();
        let OmegaPoint::Generic(q) = back else { return Err(TestCaseError::fail("VL")) };
        prop_assert!((q.a - p.a).abs() < 1e-9 && (q.b - p.b).abs() < 1e-9);
        prop_assert!((q.s - p.s).abs() < 1e-9 * (1.0 + p.s) && (q.alpha - p.alpha).abs() < 1e-9);
    }

    #[test]
    fn return_map_is_idempotent_under_recoordinatization(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = sample_haar_omega(&mut rng);
        if let Ok(next) = omega_return_map(&OmegaPoint::Generic(p)) {
            let again = recoordinatize_omega(&next.lattice()).unwrap();
            prop_assert!(next.lattice().same_coset(&again.lattice(), 1e-8).unwrap());
            let (x, y) = (omega_return_time(&next), omega_return_time(&again));
            if let (Ok(x), Ok(y)) = (x, y) {
                prop_assert!(close(x, y, 1e-9));
            }
        }
    }

    #[test]
    fn regions_partition(a in 0.01f64..=1.0, t in 0.0f64..1.0, u in 0.0f64..1.0, alpha in 0.001f64..=1.0) {
        let b = 1.0 - a + t * a;
        prop_assume!(b > 1.0 - a && b <= 1.0);
        let s = u / (a * b);
        let p = OmegaCoords::new(a, b, s, alpha).unwrap();
        let r = classify_omega(&p);
        let expect = if alpha > a {
            if s <= (alpha - a) / (a * b * alpha) { OmegaRegion::O1 } else { OmegaRegion::O2 }
        } else if b + alpha < 1.0 { OmegaRegion::O3 } else { OmegaRegion::O4 };
        prop_assert_eq!(r, expect);
    }

    #[test]
    fn w_return_on_sa_respects_minimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (omega, _) = sample_haar_omega(&mut rng);
        let w = w_return_time(&WPoint::Sa { omega }).unwrap();
        prop_assert!(w > 0.0);
        let cap = 1.0 / (omega.a * omega.b) - omega.s;
        prop_assert!(w <= cap + 1e-9);
        if let Ok(r) = omega_return_time(&OmegaPoint::Generic(omega)) {
            prop_assert!(w <= r + 1e-9, "w = {}, omega = {}", w, r);
        }
    }

    #[test]
    fn bcz_return_time_is_inverse_area(a in 0.01f64..=1.0, t in 0.0f64..1.0) {
        let b = 1.0 - a + (t + 1e-9).min(1.0) * a;
        let d = DeltaCoords::new(a, b).unwrap();
        prop_assert!((bcz_return_time(&d) * a * b - 1.0).abs() < 1e-12);
    }
}
