//! Brute-force first-return times by direct enumeration, and differential tests
//! of the piecewise formulas against them.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    set_window_points, AffineLattice, HolonomySet, LatticeError, Mat2, SurfaceMode, Vec2, Window, STRIP_TOL,
};
use crate::measures::{self, chunked};
use crate::transversal::{
    self, classify_omega, DeltaCoords, OmegaCoords, OmegaPoint, OmegaRegion, TransversalError, VLCoords, WPoint,
    HORIZONTAL_TOL,
};

/// Relative error above which a formula value is a counterexample.
pub const COUNTEREXAMPLE_REL_TOL: f64 = 1e-6;

/// Counterexamples kept verbatim in a report; the count covers all of them.
pub const MAX_LISTED: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Formula,
    OracleAffineOnly,
    OracleDoubledSlit,
}

impl std::str::FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "formula" => Ok(Engine::Formula),
            "oracle-affine" => Ok(Engine::OracleAffineOnly),
            "oracle-doubled" => Ok(Engine::OracleDoubledSlit),
            _ => Err(format!("unknown engine '{s}' (formula, oracle-affine, oracle-doubled)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("not on the transversal: no short horizontal vector in the holonomy set")]
    NotOnTransversal,
    #[error("no strip vector found below slope {0}")]
    Exhausted(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Transversal(#[from] TransversalError),
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn horizontal_exclusion(surface: &AffineLattice) -> f64 {
    STRIP_TOL * surface.g.norm_max().max(1.0)
}

/// Whether the set has a vector with `x` in `(0, 1]` and `|y| <= 1e-9`.
pub fn on_transversal(surface: &AffineLattice, set: HolonomySet) -> Result<bool> {
    let w = Window { x_lo: STRIP_TOL, x_hi: 1.0 + STRIP_TOL, y_lo: -HORIZONTAL_TOL, y_hi: HORIZONTAL_TOL };
    Ok(!set_window_points(surface, set, &w)?.is_empty())
}

/// Smallest slope of a strip vector of `set` strictly above the horizontal,
/// with the vector attaining it. The window height starts at `2 hint` (or 4) and
/// doubles; since `x <= 1`, every vector of slope at most the height lies inside,
/// so a candidate is accepted only once its slope is within the height.
pub fn min_strip_slope(surface: &AffineLattice, set: HolonomySet, hint: Option<f64>) -> Result<(f64, Vec2)> {
    let surface = surface.reduced()?;
    let exclude = horizontal_exclusion(&surface);
    let mut cap = match hint {
        Some(h) if h > 0.0 && h.is_finite() => 2.0 * h,
        _ => 4.0,
    };
    for _ in 0..64 {
        let w = Window { x_lo: STRIP_TOL, x_hi: 1.0 + STRIP_TOL, y_lo: exclude, y_hi: cap * (1.0 + STRIP_TOL) };
        let best = set_window_points(&surface, set, &w)?
            .into_iter()
            .min_by(|p, q| p.slope().total_cmp(&q.slope()).then(p.x.total_cmp(&q.x)));
        match best {
            Some(p) if p.slope() <= cap => return Ok((p.slope(), p)),
            Some(p) => cap = p.slope(),
            None => cap *= 2.0,
        }
    }
    Err(OracleError::Exhausted(cap))
}

/// First return time to the transversal defined by `set`.
pub fn oracle_first_return(surface: &AffineLattice, set: HolonomySet, hint: Option<f64>) -> Result<f64> {
    if !on_transversal(surface, set)? {
        return Err(OracleError::NotOnTransversal);
    }
    Ok(min_strip_slope(surface, set, hint)?.0)
}

/// Oracle return time on `Omega`; `set` is `Coset` or `Doubled`.
pub fn omega_oracle(p: &OmegaPoint, set: HolonomySet) -> Result<f64> {
    let hint = transversal::omega_return_time(p).ok();
    oracle_first_return(&p.lattice(), set, hint)
}

/// Oracle return time on `W`; `set` is `LatticeAndCoset` or `Doubled`.
pub fn w_oracle(w: &WPoint, set: HolonomySet) -> Result<f64> {
    let hint = transversal::w_return_time(w).ok();
    oracle_first_return(&w.surface(), set, hint)
}

/// Smallest strip slope of `p_{a,b} Z^2 + v`. No transversal precondition.
pub fn rho_oracle(a: f64, b: f64, v1: f64, v2: f64) -> Result<f64> {
    let s = AffineLattice::new(Mat2::p(a, b), Vec2::new(v1, v2))?;
    Ok(min_strip_slope(&s, HolonomySet::Coset, None)?.0)
}

/// Oracle return time on `Delta`: smallest strip slope of a primitive vector.
pub fn delta_oracle(d: &DeltaCoords) -> Result<f64> {
    let s = AffineLattice::lattice(d.matrix())?;
    oracle_first_return(&s, HolonomySet::PrimitiveLattice, Some(transversal::bcz_return_time(d)))
}

/// Successive oracle return times along the horocycle orbit of `start`.
pub fn oracle_gap_sequence(start: &AffineLattice, set: HolonomySet, n: usize) -> Result<Vec<f64>> {
    if !on_transversal(start, set)? {
        return Err(OracleError::NotOnTransversal);
    }
    let mut cur = start.reduced()?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (r, _) = min_strip_slope(&cur, set, out.last().copied())?;
        out.push(r);
        cur = cur.horocycle(r).reduced()?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiffRegion {
    DeltaR,
    OmegaR,
    WslRho,
    WReturn,
}

impl std::str::FromStr for DiffRegion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "DeltaR" => Ok(DiffRegion::DeltaR),
            "OmegaR" => Ok(DiffRegion::OmegaR),
            "WslRho" => Ok(DiffRegion::WslRho),
            "WReturn" => Ok(DiffRegion::WReturn),
            _ => Err(format!("unknown region '{s}' (DeltaR, OmegaR, WslRho, WReturn)")),
        }
    }
}

/// Sampling domain of `v` for `WslRho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VDomain {
    /// `v` uniform in the fundamental parallelogram of `p_{a,b}`.
    #[default]
    Parallelogram,
    /// `v1` uniform on `(0, a)`, `v2` uniform on `(0, 1/a)`.
    Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    /// `delta`, `omega`, `vl`, `sl` or `sa`; names the meaning of `coords`.
    pub kind: String,
    pub coords: Vec<f64>,
    pub stratum: String,
    pub formula: f64,
    pub oracle: f64,
    pub rel_err: f64,
    pub anchor: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StratumStats {
    pub samples: usize,
    pub counterexamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub region: DiffRegion,
    pub mode: SurfaceMode,
    pub seed: u64,
    pub samples: usize,
    pub anchors: usize,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub counterexample_count: usize,
    /// Inputs where either side could not be evaluated.
    pub failures: usize,
    pub counterexamples: Vec<Counterexample>,
    pub strata: BTreeMap<String, StratumStats>,
}

struct Case {
    kind: &'static str,
    coords: Vec<f64>,
    stratum: String,
    formula: f64,
    oracle: f64,
}

type Eval = std::result::Result<Case, ()>;

fn omega_stratum(p: &OmegaCoords) -> String {
    let r = classify_omega(p);
    match r {
        OmegaRegion::O2 | OmegaRegion::O4 => format!("{} j={}", r.name(), p.j()),
        _ => r.name().to_string(),
    }
}

fn eval_delta(d: DeltaCoords) -> Eval {
    let oracle = delta_oracle(&d).map_err(|_| ())?;
    Ok(Case {
        kind: "delta",
        coords: vec![d.a, d.b],
        stratum: "Delta".into(),
        formula: transversal::bcz_return_time(&d),
        oracle,
    })
}

fn eval_omega(p: OmegaPoint, mode: SurfaceMode) -> Eval {
    let formula = transversal::omega_return_time(&p).map_err(|_| ())?;
    let oracle = omega_oracle(&p, mode.into()).map_err(|_| ())?;
    let (kind, coords, stratum) = match p {
        OmegaPoint::Generic(c) => ("omega", vec![c.a, c.b, c.s, c.alpha], omega_stratum(&c)),
        OmegaPoint::Vl(v) => ("vl", vec![v.a, v.s, v.alpha], "VL".to_string()),
    };
    Ok(Case { kind, coords, stratum, formula, oracle })
}

fn eval_rho(a: f64, b: f64, v1: f64, v2: f64) -> Eval {
    let formula = transversal::rho_sl_to_sa(a, b, v1, v2).map_err(|_| ())?;
    let oracle = rho_oracle(a, b, v1, v2).map_err(|_| ())?;
    let stratum = if b + v1 <= 1.0 {
        if v1 + a <= 1.0 { "b+v1<=1, v1+a<=1" } else { "b+v1<=1, v1+a>1" }.to_string()
    } else {
        "b+v1>1".to_string()
    };
    Ok(Case { kind: "sl", coords: vec![a, b, v1, v2], stratum, formula, oracle })
}

fn eval_w(w: WPoint, mode: SurfaceMode) -> Eval {
    let formula = transversal::w_return_time(&w).map_err(|_| ())?;
    let set = match mode {
        SurfaceMode::AffineOnly => HolonomySet::LatticeAndCoset,
        SurfaceMode::DoubledSlit => HolonomySet::Doubled,
    };
    let oracle = w_oracle(&w, set).map_err(|_| ())?;
    let (kind, coords, stratum) = match w {
        WPoint::Sl { delta, v } => {
            let s = if delta.b + v.x <= 1.0 { "SL b+v1<=1" } else { "SL b+v1>1" };
            ("sl", vec![delta.a, delta.b, v.x, v.y], s.to_string())
        }
        WPoint::Sa { omega } => (
            "sa",
            vec![omega.a, omega.b, omega.s, omega.alpha],
            format!("SA {}", classify_omega(&omega).name()),
        ),
    };
    Ok(Case { kind, coords, stratum, formula, oracle })
}

fn anchors(region: DiffRegion, mode: SurfaceMode) -> Vec<Eval> {
    let om = |a, b, s, al| OmegaPoint::Generic(OmegaCoords { a, b, s, alpha: al });
    match region {
        DiffRegion::DeltaR => vec![
            eval_delta(DeltaCoords { a: 1.0, b: 1.0 }),
            eval_delta(DeltaCoords { a: 0.5, b: 0.75 }),
        ],
        DiffRegion::OmegaR => vec![
            eval_omega(om(0.5, 1.0, 0.2, 0.75), mode),
            eval_omega(om(0.8, 0.5, 1.0, 0.3), mode),
            eval_omega(om(0.5, 0.6, 2.0, 0.9), mode),
            eval_omega(OmegaPoint::Vl(VLCoords { a: 0.5, s: 0.2, alpha: 0.5 }), mode),
            eval_omega(om(1.0, 1.0, 0.0, 0.5), mode),
        ],
        DiffRegion::WslRho => vec![
            eval_rho(0.6, 0.5, 0.5, 0.8),
            eval_rho(0.6, 0.5, 0.3, 0.5),
            eval_rho(0.6, 0.9, 0.3, 0.5),
        ],
        DiffRegion::WReturn => vec![
            eval_w(WPoint::Sa { omega: OmegaCoords { a: 0.5, b: 1.0, s: 0.2, alpha: 0.75 } }, mode),
            eval_w(WPoint::Sa { omega: OmegaCoords { a: 0.5, b: 0.6, s: 2.0, alpha: 0.9 } }, mode),
            eval_w(WPoint::Sl { delta: DeltaCoords { a: 0.6, b: 0.5 }, v: Vec2::new(0.5, 0.8) }, mode),
        ],
    }
}

fn sample_case<R: Rng>(region: DiffRegion, mode: SurfaceMode, domain: VDomain, rng: &mut R) -> Eval {
    match region {
        DiffRegion::DeltaR => eval_delta(measures::sample_delta(rng)),
        DiffRegion::OmegaR => eval_omega(OmegaPoint::Generic(measures::sample_haar_omega(rng).0), mode),
        DiffRegion::WslRho => {
            let d = measures::sample_delta(rng);
            let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
            let v = match domain {
                VDomain::Parallelogram => Mat2::p(d.a, d.b).apply(Vec2::new(x, y)),
                VDomain::Rect => Vec2::new(d.a * x, y / d.a),
            };
            eval_rho(d.a, d.b, v.x, v.y)
        }
        DiffRegion::WReturn => {
            let s = measures::sample(&measures::MeasureSpec::HaarW, rng);
            let measures::SamplePoint::W { point } = s.point else { unreachable!() };
            eval_w(point, mode)
        }
    }
}

#[derive(Default)]
struct Acc {
    samples: usize,
    failures: usize,
    max_abs: f64,
    max_rel: f64,
    count: usize,
    listed: Vec<Counterexample>,
    strata: BTreeMap<String, StratumStats>,
}

impl Acc {
    fn push(&mut self, e: Eval, anchor: bool) {
        self.samples += 1;
        let Ok(c) = e else {
            self.failures += 1;
            return;
        };
        let abs = (c.formula - c.oracle).abs();
        let rel = abs / c.oracle.abs().max(f64::MIN_POSITIVE);
        self.max_abs = self.max_abs.max(abs);
        self.max_rel = self.max_rel.max(rel);
        let st = self.strata.entry(c.stratum.clone()).or_default();
        st.samples += 1;
        if rel > COUNTEREXAMPLE_REL_TOL {
            st.counterexamples += 1;
            self.count += 1;
            if self.listed.len() < MAX_LISTED {
                self.listed.push(Counterexample {
                    kind: c.kind.to_string(),
                    coords: c.coords,
                    stratum: c.stratum,
                    formula: c.formula,
                    oracle: c.oracle,
                    rel_err: rel,
                    anchor,
                });
            }
        }
    }

    fn merge(&mut self, o: Acc) {
        self.samples += o.samples;
        self.failures += o.failures;
        self.max_abs = self.max_abs.max(o.max_abs);
        self.max_rel = self.max_rel.max(o.max_rel);
        self.count += o.count;
        for c in o.listed {
            if self.listed.len() < MAX_LISTED {
                self.listed.push(c);
            }
        }
        for (k, v) in o.strata {
            let st = self.strata.entry(k).or_default();
            st.samples += v.samples;
            st.counterexamples += v.counterexamples;
        }
    }
}

/// Formula versus oracle on fixed anchor inputs followed by `n` random inputs.
pub fn diff_test(
    region: DiffRegion,
    n: usize,
    seed: u64,
    mode: SurfaceMode,
    workers: usize,
    domain: VDomain,
) -> DiffReport {
    let mut acc = Acc::default();
    let anchor_evals = anchors(region, mode);
    let n_anchors = anchor_evals.len();
    for e in anchor_evals {
        acc.push(e, true);
    }
    let parts = chunked(n, seed, workers, |rng, lo, hi| {
        let mut a = Acc::default();
        for _ in lo..hi {
            a.push(sample_case(region, mode, domain, rng), false);
        }
        a
    });
    for p in parts {
        acc.merge(p);
    }
    DiffReport {
        region,
        mode,
        seed,
        samples: acc.samples,
        anchors: n_anchors,
        max_abs_err: acc.max_abs,
        max_rel_err: acc.max_rel,
        counterexample_count: acc.count,
        failures: acc.failures,
        counterexamples: acc.listed,
        strata: acc.strata,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega(a: f64, b: f64, s: f64, alpha: f64) -> AffineLattice {
        OmegaCoords::new(a, b, s, alpha).unwrap().lattice()
    }

    #[test]
    fn first_return_examples() {
        let r = oracle_first_return(&omega(0.5, 1.0, 0.2, 0.75), HolonomySet::Coset, None).unwrap();
        assert!((r - 0.4).abs() < 1e-12);
        let r = oracle_first_return(&omega(1.0, 1.0, 0.0, 0.5), HolonomySet::Coset, None).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let s = AffineLattice::new(Mat2::p(0.6, 0.5), Vec2::new(0.5, 0.8)).unwrap();
        let r = min_strip_slope(&s, HolonomySet::Doubled, None).unwrap().0;
        assert!((r - 13.0 / 9.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn off_transversal_is_an_error() {
        let s = AffineLattice::new(Mat2::identity(), Vec2::new(0.3, 0.4)).unwrap();
        assert_eq!(oracle_first_return(&s, HolonomySet::Coset, None), Err(OracleError::NotOnTransversal));
    }

    #[test]
    fn gap_sequences() {
        let s = omega(1.0, 1.0, 0.0, 0.5);
        assert_eq!(oracle_gap_sequence(&s, HolonomySet::Coset, 5).unwrap(), vec![2.0; 5]);
        let z = AffineLattice::lattice(Mat2::identity()).unwrap();
        assert_eq!(oracle_gap_sequence(&z, HolonomySet::PrimitiveLattice, 5).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn rho_counterexample() {
        assert!((rho_oracle(0.6, 0.5, 0.3, 0.5).unwrap() - 5.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn w_doubled_counterexample() {
        let w = WPoint::sa(0.5, 0.6, 2.0, 0.9).unwrap();
        assert!((w_oracle(&w, HolonomySet::Doubled).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn parse_names() {
        assert_eq!("oracle-doubled".parse::<Engine>().unwrap(), Engine::OracleDoubledSlit);
        assert!("x".parse::<Engine>().is_err());
        assert_eq!("WslRho".parse::<DiffRegion>().unwrap(), DiffRegion::WslRho);
    }
}
