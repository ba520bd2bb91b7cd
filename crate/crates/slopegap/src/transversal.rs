//! Return systems on the three transversals: `Delta` (short lattice vector),
//! `Omega` (short affine vector) and `W` (short saddle connection on a doubled slit torus).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{gcd, window_points, AffineLattice, LatticeError, Mat2, Vec2, Window, STRIP_TOL};

/// Upward nudge applied before flooring `j`.
pub const FLOOR_NUDGE: f64 = 1e-12;

/// A vector counts as horizontal when `|y|` is below this.
pub const HORIZONTAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransversalError {
    #[error("coordinates outside the domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("not on the transversal: {0}")]
    NotOnTransversal(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

pub type Result<T> = std::result::Result<T, TransversalError>;

fn floor_j(x: f64) -> f64 {
    (x + FLOOR_NUDGE).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCoords {
    pub a: f64,
    pub b: f64,
}

impl DeltaCoords {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0 && b > 1.0 - a && b <= 1.0) {
            return Err(TransversalError::Domain(format!("(a, b) = ({a}, {b}) is not in Delta")));
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::p(self.a, self.b)
    }
}

/// Return time of the BCZ section, `1/(ab)`.
pub fn bcz_return_time(d: &DeltaCoords) -> f64 {
    1.0 / (d.a * d.b)
}

/// `S(a, b) = (b, -a + floor((1 + a)/b) b)`.
pub fn bcz_return_map(d: &DeltaCoords) -> DeltaCoords {
    let (a, b) = (d.a, d.b);
    let mut k = ((1.0 + a) / b).floor();
    let mut next = k.mul_add(b, -a);
    // Rounding can push the image across the boundary lines of Delta.
    if next > 1.0 {
        k -= 1.0;
        next = k.mul_add(b, -a);
    } else if next <= 1.0 - b {
        k += 1.0;
        next = k.mul_add(b, -a);
    }
    DeltaCoords { a: b, b: next }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaCoords {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub alpha: f64,
}

impl OmegaCoords {
    pub fn new(a: f64, b: f64, s: f64, alpha: f64) -> Result<Self> {
        DeltaCoords::new(a, b)?;
        if !(s >= 0.0 && s < 1.0 / (a * b)) {
            return Err(TransversalError::Domain(format!("s = {s} outside [0, 1/(ab))")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(TransversalError::Domain(format!("alpha = {alpha} outside (0, 1]")));
        }
        Ok(Self { a, b, s, alpha })
    }

    /// `g = h_s p_{a,b}`.
    pub fn matrix(&self) -> Mat2 {
        let (a, b, s) = (self.a, self.b, self.s);
        Mat2::new(a, b, -s * a, 1.0 / a - s * b)
    }

    pub fn lattice(&self) -> AffineLattice {
        AffineLattice { g: self.matrix(), v: Vec2::new(self.alpha, 0.0) }
    }

    pub fn j(&self) -> f64 {
        floor_j((1.0 + self.a - self.alpha) / self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VLCoords {
    pub a: f64,
    pub s: f64,
    pub alpha: f64,
}

impl VLCoords {
    pub fn new(a: f64, s: f64, alpha: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(TransversalError::Domain(format!("a = {a} outside (0, 1]")));
        }
        if !(s > 0.0 && s <= a * a) {
            return Err(TransversalError::Domain(format!("s = {s} outside (0, a^2]")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(TransversalError::Domain(format!("alpha = {alpha} outside (0, 1]")));
        }
        Ok(Self { a, s, alpha })
    }

    /// Columns `(0, a)` and `(-1/a, s/a)`.
    pub fn matrix(&self) -> Mat2 {
        Mat2::new(0.0, -1.0 / self.a, self.a, self.s / self.a)
    }

    pub fn lattice(&self) -> AffineLattice {
        AffineLattice { g: self.matrix(), v: Vec2::new(self.alpha, 0.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaPoint {
    Generic(OmegaCoords),
    Vl(VLCoords),
}

impl OmegaPoint {
    pub fn lattice(&self) -> AffineLattice {
        match self {
            OmegaPoint::Generic(p) => p.lattice(),
            OmegaPoint::Vl(p) => p.lattice(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OmegaRegion {
    O1,
    O2,
    O3,
    O4,
    VL,
}

impl OmegaRegion {
    pub fn name(self) -> &'static str {
        match self {
            OmegaRegion::O1 => "O1",
            OmegaRegion::O2 => "O2",
            OmegaRegion::O3 => "O3",
            OmegaRegion::O4 => "O4",
            OmegaRegion::VL => "VL",
        }
    }
}

/// Region of a generic point. Ties: `alpha = a` goes to the `alpha <= a` side,
/// `b + alpha = 1` to `O4`, and `s` at the threshold to `O1`.
pub fn classify_omega(p: &OmegaCoords) -> OmegaRegion {
    let (a, b, s, alpha) = (p.a, p.b, p.s, p.alpha);
    if alpha > a {
        if s <= (alpha - a) / (a * b * alpha) {
            OmegaRegion::O1
        } else {
            OmegaRegion::O2
        }
    } else if b + alpha < 1.0 {
        OmegaRegion::O3
    } else {
        OmegaRegion::O4
    }
}

pub fn classify_point(p: &OmegaPoint) -> OmegaRegion {
    match p {
        OmegaPoint::Generic(c) => classify_omega(c),
        OmegaPoint::Vl(_) => OmegaRegion::VL,
    }
}

/// Which numerator to use on `O4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum O4Variant {
    /// `(j(1/a - sb) + sa) / (alpha - a + jb)`.
    #[default]
    WithSa,
    /// `j(1/a - sb) / (alpha - a + jb)`.
    WithoutSa,
}

fn positive(r: f64, what: &str) -> Result<f64> {
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(TransversalError::Degenerate(format!("{what} evaluates to {r}")))
    }
}

/// Piecewise return time on `Omega`.
pub fn omega_return_time(p: &OmegaPoint) -> Result<f64> {
    omega_return_time_with(p, O4Variant::WithSa)
}

pub fn omega_return_time_with(p: &OmegaPoint, variant: O4Variant) -> Result<f64> {
    let c = match p {
        OmegaPoint::Vl(v) => return positive(v.a / v.alpha, "a/alpha"),
        OmegaPoint::Generic(c) => c,
    };
    let (a, b, s, alpha) = (c.a, c.b, c.s, c.alpha);
    let j = c.j();
    let r = match classify_omega(c) {
        OmegaRegion::O1 => s * a / (alpha - a),
        OmegaRegion::O2 => (j * (1.0 / a - s * b) + s * a) / (alpha - a + j * b),
        OmegaRegion::O3 => (1.0 / a - s * b) / (b + alpha),
        OmegaRegion::O4 => {
            let extra = match variant {
                O4Variant::WithSa => s * a,
                O4Variant::WithoutSa => 0.0,
            };
            (j * (1.0 / a - s * b) + extra) / (alpha - a + j * b)
        }
        OmegaRegion::VL => unreachable!(),
    };
    positive(r, "Omega return time")
}

/// Extended Euclid: `(p, q)` with `m q - n p = 1` for coprime `(m, n)`.
fn complete_basis(m: i64, n: i64) -> (i64, i64) {
    let (mut r0, mut r1) = (m, n);
    let (mut s0, mut s1) = (1_i64, 0_i64);
    let (mut t0, mut t1) = (0_i64, 1_i64);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    // s0 m + t0 n = r0 = +-1
    let sign = r0.signum();
    (-t0 * sign, s0 * sign)
}

/// Lattice vector of the strip lying on or below the horizontal with the largest slope.
fn last_crossing(g: &Mat2) -> Result<(i64, i64, Vec2)> {
    let mut cap = 1.0_f64;
    for _ in 0..80 {
        let w = Window { x_lo: STRIP_TOL, x_hi: 1.0 + STRIP_TOL, y_lo: -cap * (1.0 + STRIP_TOL), y_hi: HORIZONTAL_TOL };
        let best = window_points(g, Vec2::default(), &w)?
            .into_iter()
            .filter(|&(m, n, _)| gcd(m, n) == 1)
            .max_by(|p, q| p.2.slope().total_cmp(&q.2.slope()).then(q.2.x.total_cmp(&p.2.x)));
        if let Some(b) = best {
            if -b.2.slope() <= cap {
                return Ok(b);
            }
        }
        cap *= 2.0;
    }
    Err(TransversalError::NotOnTransversal("no strip lattice vector below the horizontal".into()))
}

/// Coset vector on the horizontal with `x` in `(0, 1]`; smallest `|y|`, then smallest `x`.
fn horizontal_affine(l: &AffineLattice) -> Result<Option<f64>> {
    let w = Window { x_lo: STRIP_TOL, x_hi: 1.0 + STRIP_TOL, y_lo: -HORIZONTAL_TOL, y_hi: HORIZONTAL_TOL };
    let pts = window_points(&l.g, l.v, &w)?;
    let ymin = pts.iter().map(|p| p.2.y.abs()).fold(f64::INFINITY, f64::min);
    Ok(pts
        .iter()
        .filter(|p| p.2.y.abs() <= ymin + 1e-12)
        .map(|p| p.2.x.min(1.0))
        .min_by(f64::total_cmp))
}

/// Shortest vertical lattice vector of length below one. Length exactly one still
/// leaves a strip vector on the horizontal, so that case is treated as generic.
fn short_vertical(g: &Mat2) -> Result<Option<f64>> {
    let w = Window { x_lo: -HORIZONTAL_TOL, x_hi: HORIZONTAL_TOL, y_lo: HORIZONTAL_TOL, y_hi: 1.0 - HORIZONTAL_TOL };
    Ok(window_points(g, Vec2::default(), &w)?
        .into_iter()
        .filter(|&(m, n, _)| gcd(m, n) == 1)
        .map(|p| p.2.y)
        .min_by(f64::total_cmp))
}

fn recoordinatize_vl(l: &AffineLattice, a: f64) -> Result<OmegaPoint> {
    let x = -1.0 / a;
    let w = Window { x_lo: x - HORIZONTAL_TOL, x_hi: x + HORIZONTAL_TOL, y_lo: HORIZONTAL_TOL, y_hi: a + HORIZONTAL_TOL };
    let second = window_points(&l.g, Vec2::default(), &w)?
        .into_iter()
        .map(|p| p.2.y)
        .min_by(f64::total_cmp)
        .ok_or_else(|| TransversalError::NotOnTransversal("vertical lattice without partner vector".into()))?;
    let s = (a * second).min(a * a);
    let alpha = horizontal_affine(l)?
        .ok_or_else(|| TransversalError::NotOnTransversal("no short horizontal affine vector".into()))?;
    Ok(OmegaPoint::Vl(VLCoords::new(a, s, alpha)?))
}

/// Recover `(a, b, s, alpha)` (or vertical-lattice coordinates) of an affine lattice
/// whose coset has a short horizontal vector.
pub fn recoordinatize_omega(l: &AffineLattice) -> Result<OmegaPoint> {
    let l = l.reduced()?;
    if let Some(a) = short_vertical(&l.g)? {
        return recoordinatize_vl(&l, a.min(1.0));
    }
    let alpha = horizontal_affine(&l)?
        .ok_or_else(|| TransversalError::NotOnTransversal("no short horizontal affine vector".into()))?;
    let (a, b, s) = lattice_coords(&l.g)?;
    Ok(OmegaPoint::Generic(OmegaCoords::new(a, b, s, alpha)?))
}

/// `(a, b, s)` with `g Z^2 = h_s p_{a,b} Z^2`, from the most recent horizontal crossing.
fn lattice_coords(g: &Mat2) -> Result<(f64, f64, f64)> {
    let (m0, n0, u) = last_crossing(g)?;
    let a = u.x.min(1.0);
    let s = (-u.y / u.x).max(0.0);
    let (p, q) = complete_basis(m0, n0);
    let w = g.apply(Vec2::new(p as f64, q as f64));
    let wx = w.x;
    let mut k = ((wx - 1.0) / a).ceil();
    let mut b = wx - k * a;
    if b > 1.0 + 1e-12 {
        k += 1.0;
        b = wx - k * a;
    } else if b <= 1.0 - a {
        k -= 1.0;
        b = wx - k * a;
    }
    Ok((a, b.min(1.0), s))
}

/// `T(p) = h_{R(p)} p`, re-expressed in coordinates.
pub fn omega_return_map(p: &OmegaPoint) -> Result<OmegaPoint> {
    let r = omega_return_time(p)?;
    recoordinatize_omega(&p.lattice().horocycle(r))
}

/// Time to the next visit of `W_sl`'s affine vector to the horizontal.
pub fn rho_sl_to_sa(a: f64, b: f64, v1: f64, v2: f64) -> Result<f64> {
    DeltaCoords::new(a, b)?;
    if !(v1 > 0.0) {
        return Err(TransversalError::Degenerate(format!("v1 = {v1} must be positive")));
    }
    if b + v1 <= 1.0 {
        return positive(v2 / v1, "v2/v1");
    }
    let j = floor_j((a + 1.0 - v1) / b);
    positive((v2 + j / a) / (v1 + j * b - a), "rho")
}

/// Point of the doubled slit torus transversal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WPoint {
    Sl { delta: DeltaCoords, v: Vec2 },
    Sa { omega: OmegaCoords },
}

impl WPoint {
    /// Short-lattice point; `v` is reduced into the fundamental parallelogram of `p_{a,b}`.
    pub fn sl(a: f64, b: f64, v1: f64, v2: f64) -> Result<Self> {
        let delta = DeltaCoords::new(a, b)?;
        let v = crate::lattice::reduce_to_fundamental(&delta.matrix(), Vec2::new(v1, v2))?;
        Ok(WPoint::Sl { delta, v })
    }

    pub fn sa(a: f64, b: f64, s: f64, alpha: f64) -> Result<Self> {
        Ok(WPoint::Sa { omega: OmegaCoords::new(a, b, s, alpha)? })
    }

    pub fn surface(&self) -> AffineLattice {
        match self {
            WPoint::Sl { delta, v } => AffineLattice { g: delta.matrix(), v: *v },
            WPoint::Sa { omega } => omega.lattice(),
        }
    }
}

/// Return time to `W` from the closed-form region formulas.
pub fn w_return_time(w: &WPoint) -> Result<f64> {
    match w {
        WPoint::Sl { delta, v } => {
            if delta.b + v.x <= 1.0 {
                if !(v.x > 0.0) {
                    return Err(TransversalError::Degenerate("v1 = 0".into()));
                }
                positive(v.y / v.x, "v2/v1")
            } else {
                positive(bcz_return_time(delta), "1/(ab)")
            }
        }
        WPoint::Sa { omega } => {
            let (a, b, s, alpha) = (omega.a, omega.b, omega.s, omega.alpha);
            let r = match classify_omega(omega) {
                OmegaRegion::O2 | OmegaRegion::O4 => 1.0 / (a * b) - s,
                OmegaRegion::O1 => s * a / (alpha - a),
                OmegaRegion::O3 => (1.0 / a - s * b) / (b + alpha),
                OmegaRegion::VL => unreachable!(),
            };
            positive(r, "W return time")
        }
    }
}

/// Classify a configuration with a short horizontal saddle connection.
pub fn reconstruct_w(l: &AffineLattice) -> Result<WPoint> {
    let l = l.reduced()?;
    let w = Window { x_lo: STRIP_TOL, x_hi: 1.0 + STRIP_TOL, y_lo: -HORIZONTAL_TOL, y_hi: HORIZONTAL_TOL };
    let horizontal = window_points(&l.g, Vec2::default(), &w)?
        .into_iter()
        .filter(|&(m, n, _)| gcd(m, n) == 1)
        .min_by(|p, q| p.2.x.total_cmp(&q.2.x));
    if horizontal.is_some() {
        let (a, b, s) = lattice_coords(&l.g)?;
        let delta = DeltaCoords::new(a, b)?;
        let v = crate::lattice::reduce_to_fundamental(&delta.matrix(), crate::lattice::horocycle_apply(-s, l.v))?;
        return Ok(WPoint::Sl { delta, v });
    }
    for cand in [l, l.negated()] {
        match recoordinatize_omega(&cand) {
            Ok(OmegaPoint::Generic(omega)) => return Ok(WPoint::Sa { omega }),
            Ok(OmegaPoint::Vl(_)) => {
                return Err(TransversalError::Degenerate("vertical-lattice configuration on W".into()))
            }
            Err(TransversalError::NotOnTransversal(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(TransversalError::NotOnTransversal("no short horizontal saddle connection".into()))
}

/// Flow by the formula return time and reclassify.
pub fn w_return_map(w: &WPoint) -> Result<WPoint> {
    let r = w_return_time(w)?;
    reconstruct_w(&w.surface().horocycle(r))
}
