use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slopegap::lattice::{HolonomySet, SurfaceMode};
use slopegap::measures::{sample, sample_haar_omega, MeasureSpec, SamplePoint};
use slopegap::oracle::*;
use slopegap::transversal::*;

#[test]
fn omega_discrepancy_is_confined_to_two_strata() {
    let rep = diff_test(DiffRegion::OmegaR, 100_000, 1, SurfaceMode::AffineOnly, 2, VDomain::Parallelogram);
    assert_eq!(rep.failures, 0);
    assert!(rep.counterexample_count > 0);
    for (name, st) in &rep.strata {
        if name == "O2 j=0" || name == "O4 j=1" {
            assert!(st.counterexamples > 0, "{name}");
        } else {
            assert_eq!(st.counterexamples, 0, "{name}");
        }
    }
    // Every anchor agrees with the oracle.
    assert!(rep.counterexamples.iter().all(|c| !c.anchor));
}

#[test]
fn delta_region_has_no_counterexamples() {
    let rep = diff_test(DiffRegion::DeltaR, 100_000, 1, SurfaceMode::AffineOnly, 2, VDomain::Parallelogram);
    assert_eq!(rep.counterexample_count, 0);
    assert!(rep.max_rel_err < 1e-9);
}

#[test]
fn rho_anchor_counterexamples() {
    let rep = diff_test(DiffRegion::WslRho, 0, 1, SurfaceMode::AffineOnly, 1, VDomain::Parallelogram);
    let find = |c: [f64; 4]| rep.counterexamples.iter().find(|x| x.coords == c).cloned();
    let first = find([0.6, 0.5, 0.3, 0.5]).expect("listed");
    assert!((first.formula - 5.0 / 3.0).abs() < 1e-12);
    assert!((first.oracle - 5.0 / 9.0).abs() < 1e-12);
    let second = find([0.6, 0.9, 0.3, 0.5]).expect("listed");
    assert!((second.oracle - 5.0 / 9.0).abs() < 1e-12);
    assert!(find([0.6, 0.5, 0.5, 0.8]).is_none());
}

#[test]
fn doubled_w_anchor_counterexample() {
    let rep = diff_test(DiffRegion::WReturn, 0, 1, SurfaceMode::DoubledSlit, 1, VDomain::Parallelogram);
    let c = rep.counterexamples.iter().find(|x| x.coords == [0.5, 0.6, 2.0, 0.9]).expect("listed");
    assert!((c.formula - 4.0 / 3.0).abs() < 1e-12);
    assert!((c.oracle - 0.75).abs() < 1e-12);
}

#[test]
fn diff_report_is_deterministic() {
    let a = diff_test(DiffRegion::WReturn, 3000, 9, SurfaceMode::DoubledSlit, 1, VDomain::Parallelogram);
    let b = diff_test(DiffRegion::WReturn, 3000, 9, SurfaceMode::DoubledSlit, 3, VDomain::Parallelogram);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}

#[test]
fn off_transversal_is_rejected() {
    let l = OmegaCoords::new(0.5, 1.0, 0.2, 0.75).unwrap().lattice().horocycle(0.1);
    assert!(matches!(oracle_first_return(&l, HolonomySet::Coset, None), Err(OracleError::NotOnTransversal)));
}

proptest! {
    #[test]
    fn larger_caps_keep_the_minimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = sample_haar_omega(&mut rng);
        let l = p.lattice();
        let (r, _) = min_strip_slope(&l, HolonomySet::Coset, None).unwrap();
        for hint in [r * 0.5, r, 2.0 * r, 50.0 * r] {
            let (r2, _) = min_strip_slope(&l, HolonomySet::Coset, Some(hint)).unwrap();
            prop_assert_eq!(r, r2);
        }
    }

    #[test]
    fn doubled_never_exceeds_affine(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = sample(&MeasureSpec::HaarW, &mut rng);
        let SamplePoint::W { point } = s.point else { unreachable!() };
        if let WPoint::Sa { omega } = point {
            let p = OmegaPoint::Generic(omega);
            let d = omega_oracle(&p, HolonomySet::Doubled).unwrap();
            let a = omega_oracle(&p, HolonomySet::Coset).unwrap();
            prop_assert!(d <= a + 1e-12);
        }
        let d = w_oracle(&point, HolonomySet::Doubled).unwrap();
        let a = w_oracle(&point, HolonomySet::LatticeAndCoset).unwrap();
        prop_assert!(d <= a + 1e-12);
    }

    #[test]
    fn delta_formula_matches_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = slopegap::measures::sample_delta(&mut rng);
        let o = delta_oracle(&d).unwrap();
        prop_assert!((o - bcz_return_time(&d)).abs() <= 1e-9 * o.max(1.0));
    }
}
