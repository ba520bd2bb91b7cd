//! Samplers for the invariant measures and self-normalized Monte Carlo tails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{HolonomySet, Mat2, Vec2};
use crate::oracle::{self, Engine, OracleError};
use crate::transversal::{
    self, DeltaCoords, OmegaCoords, OmegaPoint, TransversalError, VLCoords, WPoint,
};

/// Samples per deterministic chunk; each chunk has its own RNG stream.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("invalid measure: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("total weight is degenerate ({0})")]
    DegenerateWeight(f64),
    #[error(transparent)]
    Transversal(#[from] TransversalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    HaarOmega,
    HaarW,
    Torsion { q: u32 },
    PeriodicOmega { a: f64, alpha: f64 },
    /// Dirac mass at the fixed point `(1, 1, 0, 1/2)`.
    PeriodicPoint,
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MeasureSpec::Torsion { q: 0 } => Err(MeasureError::InvalidSpec("torsion order must be >= 1".into())),
            MeasureSpec::PeriodicOmega { a, alpha } => {
                if !(a > 0.0 && a <= 1.0) {
                    return Err(MeasureError::InvalidSpec(format!("a = {a} outside (0, 1]")));
                }
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(MeasureError::InvalidSpec(format!("alpha = {alpha} outside (0, 1]")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeasureSpec::HaarOmega => "haar-omega".into(),
            MeasureSpec::HaarW => "haar-w".into(),
            MeasureSpec::Torsion { q } => format!("torsion:{q}"),
            MeasureSpec::PeriodicOmega { a, alpha } => format!("periodic:{a},{alpha}"),
            MeasureSpec::PeriodicPoint => "periodic-point".into(),
        }
    }
}

impl std::str::FromStr for MeasureSpec {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || MeasureError::InvalidSpec(format!("unknown measure '{s}'"));
        let spec = match s {
            "haar-omega" => MeasureSpec::HaarOmega,
            "haar-w" => MeasureSpec::HaarW,
            "periodic-point" => MeasureSpec::PeriodicPoint,
            _ => {
                if let Some(q) = s.strip_prefix("torsion:") {
                    MeasureSpec::Torsion { q: q.parse().map_err(|_| bad())? }
                } else if let Some(rest) = s.strip_prefix("periodic:") {
                    let (a, alpha) = rest.split_once(',').ok_or_else(bad)?;
                    MeasureSpec::PeriodicOmega {
                        a: a.trim().parse().map_err(|_| bad())?,
                        alpha: alpha.trim().parse().map_err(|_| bad())?,
                    }
                } else {
                    return Err(bad());
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A point on `Omega` or on `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SamplePoint {
    Omega { point: OmegaPoint },
    W { point: WPoint },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub point: SamplePoint,
    pub weight: f64,
}

/// `(a, b)` uniform on `Delta` by rejection from the unit square.
pub fn sample_delta<R: Rng + ?Sized>(rng: &mut R) -> DeltaCoords {
    loop {
        let a = 1.0 - rng.random::<f64>();
        let b = 1.0 - rng.random::<f64>();
        if b > 1.0 - a {
            return DeltaCoords { a, b };
        }
    }
}

/// Proposal for Lebesgue measure on `Omega`; the weight `1/b` corrects the proposal density.
pub fn sample_haar_omega<R: Rng + ?Sized>(rng: &mut R) -> (OmegaCoords, f64) {
    let a = 1.0 - rng.random::<f64>();
    let b = 1.0 - a * rng.random::<f64>();
    let s = rng.random::<f64>() / (a * b);
    let alpha = 1.0 - rng.random::<f64>();
    (OmegaCoords { a, b, s, alpha }, 1.0 / b)
}

/// `v` uniform in the fundamental parallelogram of `p_{a,b}`.
pub fn sample_sl<R: Rng + ?Sized>(rng: &mut R) -> WPoint {
    let delta = sample_delta(rng);
    let c = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
    WPoint::Sl { delta, v: Mat2::p(delta.a, delta.b).apply(c) }
}

pub fn sample<R: Rng + ?Sized>(m: &MeasureSpec, rng: &mut R) -> WeightedSample {
    match *m {
        MeasureSpec::HaarOmega => {
            let (p, w) = sample_haar_omega(rng);
            WeightedSample { point: SamplePoint::Omega { point: OmegaPoint::Generic(p) }, weight: w }
        }
        MeasureSpec::HaarW => {
            if rng.random::<bool>() {
                WeightedSample { point: SamplePoint::W { point: sample_sl(rng) }, weight: 1.0 }
            } else {
                let (omega, w) = sample_haar_omega(rng);
                WeightedSample { point: SamplePoint::W { point: WPoint::Sa { omega } }, weight: 2.0 * w }
            }
        }
        MeasureSpec::Torsion { q } => {
            let d = sample_delta(rng);
            let p = OmegaCoords { a: d.a, b: d.b, s: 0.0, alpha: d.a / q as f64 };
            WeightedSample { point: SamplePoint::Omega { point: OmegaPoint::Generic(p) }, weight: 1.0 }
        }
        MeasureSpec::PeriodicOmega { a, alpha } => {
            let s = a * a * (1.0 - rng.random::<f64>());
            let p = VLCoords { a, s, alpha };
            WeightedSample { point: SamplePoint::Omega { point: OmegaPoint::Vl(p) }, weight: 1.0 }
        }
        MeasureSpec::PeriodicPoint => {
            let p = OmegaCoords { a: 1.0, b: 1.0, s: 0.0, alpha: 0.5 };
            WeightedSample { point: SamplePoint::Omega { point: OmegaPoint::Generic(p) }, weight: 1.0 }
        }
    }
}

/// Return time of a point under the chosen engine.
pub fn return_time(p: &SamplePoint, engine: Engine) -> Result<f64> {
    Ok(match (p, engine) {
        (SamplePoint::Omega { point }, Engine::Formula) => transversal::omega_return_time(point)?,
        (SamplePoint::Omega { point }, Engine::OracleAffineOnly) => oracle::omega_oracle(point, HolonomySet::Coset)?,
        (SamplePoint::Omega { point }, Engine::OracleDoubledSlit) => oracle::omega_oracle(point, HolonomySet::Doubled)?,
        (SamplePoint::W { point }, Engine::Formula) => transversal::w_return_time(point)?,
        (SamplePoint::W { point }, Engine::OracleAffineOnly) => oracle::w_oracle(point, HolonomySet::LatticeAndCoset)?,
        (SamplePoint::W { point }, Engine::OracleDoubledSlit) => oracle::w_oracle(point, HolonomySet::Doubled)?,
    })
}

/// One step of the return system: the return time and the next point.
/// An `Omega` point under the doubled engine continues on `W`.
pub fn advance(p: &SamplePoint, engine: Engine) -> Result<(f64, SamplePoint)> {
    let r = return_time(p, engine)?;
    let next = match (p, engine) {
        (SamplePoint::Omega { point }, Engine::Formula) => {
            SamplePoint::Omega { point: transversal::omega_return_map(point)? }
        }
        (SamplePoint::Omega { point }, Engine::OracleAffineOnly) => SamplePoint::Omega {
            point: transversal::recoordinatize_omega(&point.lattice().horocycle(r))?,
        },
        (SamplePoint::Omega { point }, Engine::OracleDoubledSlit) => SamplePoint::W {
            point: transversal::reconstruct_w(&point.lattice().horocycle(r))?,
        },
        (SamplePoint::W { point }, _) => SamplePoint::W {
            point: transversal::reconstruct_w(&point.surface().horocycle(r))?,
        },
    };
    Ok((r, next))
}

/// Fraction of the first `n` return times lying in `(lo, hi]`.
pub fn ergodic_average(start: &SamplePoint, engine: Engine, n: usize, lo: f64, hi: f64) -> Result<f64> {
    if n == 0 {
        return Err(MeasureError::InvalidArgument("N must be >= 1".into()));
    }
    let mut p = *start;
    let mut hits = 0usize;
    for _ in 0..n {
        let (r, next) = advance(&p, engine)?;
        if r > lo && r <= hi {
            hits += 1;
        }
        p = next;
    }
    Ok(hits as f64 / n as f64)
}

/// Run `f` over `n` items split into fixed chunks, chunk `i` drawing from stream `i` of `seed`.
/// Results do not depend on the worker count.
pub fn chunked<T, F>(n: usize, seed: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let start = i * CHUNK;
                f(&mut rng, start, (start + CHUNK).min(n))
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub t_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    pub n_eff: f64,
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
    pub engine: Engine,
    pub measure: MeasureSpec,
    /// Mean weight: the total mass of the measure in its unit-density normalization.
    pub total_mass: f64,
    pub total_mass_se: f64,
    /// Samples whose return time could not be evaluated; excluded from the estimate.
    pub failed: usize,
}

#[derive(Default)]
struct TailAcc {
    sw: f64,
    sw2: f64,
    hit: Vec<f64>,
    // Per grid point: sum of w^2 1{R > t}.
    hit2: Vec<f64>,
    failed: usize,
}

/// Self-normalized estimate of `P(R > t)` for each `t` of the grid.
pub fn mc_tail(
    measure: &MeasureSpec,
    engine: Engine,
    t_grid: &[f64],
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<TailEstimate> {
    measure.validate()?;
    if n == 0 {
        return Err(MeasureError::InvalidArgument("n must be >= 1".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(MeasureError::InvalidArgument("non-finite grid point".into()));
    }
    let k = t_grid.len();
    let parts = chunked(n, seed, workers, |rng, lo, hi| {
        let mut acc = TailAcc { hit: vec![0.0; k], hit2: vec![0.0; k], ..Default::default() };
        for _ in lo..hi {
            let s = sample(measure, rng);
            match return_time(&s.point, engine) {
                Ok(r) => {
                    let w = s.weight;
                    acc.sw += w;
                    acc.sw2 += w * w;
                    for (i, &t) in t_grid.iter().enumerate() {
                        if r > t {
                            acc.hit[i] += w;
                            acc.hit2[i] += w * w;
                        }
                    }
                }
                Err(_) => acc.failed += 1,
            }
        }
        acc
    });
    let mut tot = TailAcc { hit: vec![0.0; k], hit2: vec![0.0; k], ..Default::default() };
    for p in parts {
        tot.sw += p.sw;
        tot.sw2 += p.sw2;
        tot.failed += p.failed;
        for i in 0..k {
            tot.hit[i] += p.hit[i];
            tot.hit2[i] += p.hit2[i];
        }
    }
    if !(tot.sw > 0.0 && tot.sw.is_finite()) {
        return Err(MeasureError::DegenerateWeight(tot.sw));
    }
    let mut survival = Vec::with_capacity(k);
    let mut ci = Vec::with_capacity(k);
    for i in 0..k {
        let p = tot.hit[i] / tot.sw;
        // sum w^2 (1{R>t} - p)^2 expanded.
        let var_num = tot.hit2[i] * (1.0 - 2.0 * p) + p * p * tot.sw2;
        survival.push(p);
        ci.push(1.96 * var_num.max(0.0).sqrt() / tot.sw);
    }
    let used = (n - tot.failed) as f64;
    let mean = tot.sw / used;
    let var = (tot.sw2 / used - mean * mean).max(0.0);
    Ok(TailEstimate {
        t_grid: t_grid.to_vec(),
        survival,
        ci_halfwidth: ci,
        n_eff: tot.sw * tot.sw / tot.sw2,
        n,
        seed,
        workers,
        engine,
        measure: *measure,
        total_mass: mean,
        total_mass_se: (var / used).sqrt(),
        failed: tot.failed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Unit-density mass of `{selector}` under the measure: mean of `w 1{selector}`.
pub fn mc_mass<F>(measure: &MeasureSpec, n: usize, seed: u64, workers: usize, selector: F) -> Result<MassEstimate>
where
    F: Fn(&SamplePoint) -> bool + Sync,
{
    measure.validate()?;
    if n < 2 {
        return Err(MeasureError::InvalidArgument("n must be >= 2".into()));
    }
    let parts = chunked(n, seed, workers, |rng, lo, hi| {
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in lo..hi {
            let s = sample(measure, rng);
            let x = if selector(&s.point) { s.weight } else { 0.0 };
            s1 += x;
            s2 += x * x;
        }
        (s1, s2)
    });
    let (s1, s2) = parts.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok(MassEstimate { estimate: mean, std_error: (var / nf).sqrt(), n })
}
