//! Unimodular lattices, affine lattices and enumeration of holonomy vectors.
//!
//! Every enumeration derives its integer coefficient ranges from the window
//! inequalities through the exact inverse of the generator, so no search box
//! is ever guessed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack applied to the strip bounds `0 < x <= 1`, `y > 0`.
pub const STRIP_TOL: f64 = 1e-12;

/// Relative tolerance used to merge coincident slopes.
pub const SLOPE_MERGE_TOL: f64 = 1e-12;

const DET_TOL: f64 = 1e-9;
const MAX_SCAN: i64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("singular generator (det = {0:e})")]
    Singular(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("window needs {0} coefficient rows, refusing to scan")]
    WindowTooLarge(i64),
}

pub type Result<T> = std::result::Result<T, LatticeError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn slope(self) -> f64 {
        self.y / self.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm_max(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// True when the vector lies in the vertical strip `0 < x <= 1, y > 0`.
    pub fn in_strip(self) -> bool {
        self.x > STRIP_TOL && self.x <= 1.0 + STRIP_TOL && self.y > STRIP_TOL
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2::new(self * v.x, self * v.y)
    }
}

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Mat2::new(1.0, 0.0, 0.0, 1.0)
    }

    /// `p_{a,b} = [[a, b], [0, 1/a]]`.
    pub fn p(a: f64, b: f64) -> Self {
        Mat2::new(a, b, 0.0, 1.0 / a)
    }

    /// Horocycle element `h_u = [[1, 0], [-u, 1]]`.
    pub fn horocycle(u: f64) -> Self {
        Mat2::new(1.0, 0.0, -u, 1.0)
    }

    /// Renormalization `gamma_R = diag(1/R, R)`.
    pub fn gamma(r: f64) -> Self {
        Mat2::new(1.0 / r, 0.0, 0.0, r)
    }

    /// Geodesic element `g_t = diag(e^t, e^-t)`.
    pub fn geodesic(t: f64) -> Self {
        Mat2::new(t.exp(), 0.0, 0.0, (-t).exp())
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    pub fn col(&self, j: usize) -> Vec2 {
        Vec2::new(self.0[0][j], self.0[1][j])
    }

    pub fn from_cols(c0: Vec2, c1: Vec2) -> Self {
        Mat2::new(c0.x, c1.x, c0.y, c1.y)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.0;
        Vec2::new(a * v.x + b * v.y, c * v.x + d * v.y)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::from_cols(self.apply(o.col(0)), self.apply(o.col(1)))
    }

    /// Inverse through the adjugate.
    pub fn inverse(&self) -> Result<Mat2> {
        let det = self.det();
        if !(det.abs() >= DET_TOL) {
            return Err(LatticeError::Singular(det));
        }
        let [[a, b], [c, d]] = self.0;
        Ok(Mat2::new(d / det, -b / det, -c / det, a / det))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    pub fn norm_max(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Apply `h_u` to a vector: `(x, y) -> (x, y - u x)`.
pub fn horocycle_apply(u: f64, w: Vec2) -> Vec2 {
    Vec2::new(w.x, w.y - u * w.x)
}

/// The coset `g Z^2 + v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineLattice {
    pub g: Mat2,
    pub v: Vec2,
}

impl AffineLattice {
    pub fn new(g: Mat2, v: Vec2) -> Result<Self> {
        if !g.is_finite() || !v.is_finite() {
            return Err(LatticeError::InvalidInput("non-finite entries".into()));
        }
        let det = g.det();
        if det.abs() < DET_TOL {
            return Err(LatticeError::Singular(det));
        }
        Ok(Self { g, v })
    }

    /// The lattice `g Z^2` itself, with zero translation.
    pub fn lattice(g: Mat2) -> Result<Self> {
        Self::new(g, Vec2::default())
    }

    pub fn point(&self, m: i64, n: i64) -> Vec2 {
        self.g.apply(Vec2::new(m as f64, n as f64)) + self.v
    }

    /// Left action of a matrix on generator and translation.
    pub fn transform(&self, m: &Mat2) -> Self {
        Self { g: m.mul(&self.g), v: m.apply(self.v) }
    }

    pub fn horocycle(&self, u: f64) -> Self {
        self.transform(&Mat2::horocycle(u))
    }

    /// Same coset with the translation negated.
    pub fn negated(&self) -> Self {
        Self { g: self.g, v: -self.v }
    }

    /// Lagrange-reduced basis and fundamental-domain translation, same coset.
    pub fn reduced(&self) -> Result<Self> {
        let g = gauss_reduce(&self.g);
        let v = reduce_to_fundamental(&g, self.v)?;
        Ok(Self { g, v })
    }

    /// Whether `w` belongs to the coset, up to `tol` in coefficient space.
    pub fn contains(&self, w: Vec2, tol: f64) -> Result<bool> {
        let c = self.g.inverse()?.apply(w - self.v);
        Ok((c.x - c.x.round()).abs() <= tol && (c.y - c.y.round()).abs() <= tol)
    }

    /// Whether two affine lattices describe the same coset within `tol`.
    pub fn same_coset(&self, other: &AffineLattice, tol: f64) -> Result<bool> {
        let inv = self.g.inverse()?;
        let basis = inv.mul(&other.g);
        let integral = basis.0.iter().flatten().all(|x| (x - x.round()).abs() <= tol);
        let unimodular = (basis.det().abs() - 1.0).abs() <= tol;
        Ok(integral && unimodular && self.contains(other.v, tol)?)
    }
}

/// Lagrange-Gauss reduction of the column basis.
pub fn gauss_reduce(g: &Mat2) -> Mat2 {
    let mut u = g.col(0);
    let mut w = g.col(1);
    if u.dot(u) > w.dot(w) {
        std::mem::swap(&mut u, &mut w);
    }
    for _ in 0..200 {
        let mu = (u.dot(w) / u.dot(u)).round();
        w = w - mu * u;
        if w.dot(w) >= u.dot(u) {
            break;
        }
        std::mem::swap(&mut u, &mut w);
    }
    if Mat2::from_cols(u, w).det() < 0.0 {
        w = -w;
    }
    Mat2::from_cols(u, w)
}

/// Reduce `v` modulo `g Z^2` so that its coefficients lie in `[0, 1)^2`.
/// Coefficients within `1e-12` below an integer snap to that integer.
pub fn reduce_to_fundamental(g: &Mat2, v: Vec2) -> Result<Vec2> {
    let c = g.inverse()?.apply(v);
    let frac = |t: f64| {
        let f = t - t.floor();
        if f >= 1.0 - 1e-12 {
            0.0
        } else {
            f
        }
    };
    Ok(g.apply(Vec2::new(frac(c.x), frac(c.y))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurfaceMode {
    /// The coset `g Z^2 + v` only.
    AffineOnly,
    /// `g Z^2_prim`, `g Z^2 + v` and `-g Z^2 - v` together.
    DoubledSlit,
}

/// Axis-aligned window `x_lo < x <= x_hi`, `y_lo < y <= y_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Window {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x > self.x_lo && p.x <= self.x_hi && p.y > self.y_lo && p.y <= self.y_hi
    }

    /// The strip window capped at `slope_max`; the slope cut itself is applied separately.
    pub fn strip(slope_max: f64) -> Self {
        Window {
            x_lo: STRIP_TOL,
            x_hi: 1.0 + STRIP_TOL,
            y_lo: STRIP_TOL,
            y_hi: slope_max * (1.0 + STRIP_TOL),
        }
    }
}

fn ceil_pad(t: f64) -> f64 {
    (t - 1e-9 * (1.0 + t.abs())).ceil()
}

fn floor_pad(t: f64) -> f64 {
    (t + 1e-9 * (1.0 + t.abs())).floor()
}

/// Interval of integers `n` with `lo < c0 + c1 n <= hi`, padded outward.
fn solve_linear(c0: f64, c1: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if c1.abs() < 1e-300 {
        return if c0 > lo - 1e-12 && c0 <= hi + 1e-12 {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        };
    }
    let (a, b) = ((lo - c0) / c1, (hi - c0) / c1);
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    Some((ceil_pad(a), floor_pad(b)))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `k u + j w + o` with compensated products and sums, so that cancellation in
/// large coefficients does not cost absolute accuracy.
fn combo(k: f64, u: f64, j: f64, w: f64, o: f64) -> f64 {
    let p1 = k * u;
    let e1 = k.mul_add(u, -p1);
    let p2 = j * w;
    let e2 = j.mul_add(w, -p2);
    let (s1, e3) = two_sum(p1, p2);
    let (s2, e4) = two_sum(s1, o);
    s2 + (e1 + e2 + e3 + e4)
}

/// All coefficient pairs `(m, n)` with `g (m, n) + offset` inside the window.
pub fn window_points(g: &Mat2, offset: Vec2, w: &Window) -> Result<Vec<(i64, i64, Vec2)>> {
    let inv = g.inverse()?;
    let corners = [
        Vec2::new(w.x_lo, w.y_lo),
        Vec2::new(w.x_lo, w.y_hi),
        Vec2::new(w.x_hi, w.y_lo),
        Vec2::new(w.x_hi, w.y_hi),
    ];
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in corners {
        let k = inv.apply(c - offset);
        lo[0] = lo[0].min(k.x);
        lo[1] = lo[1].min(k.y);
        hi[0] = hi[0].max(k.x);
        hi[1] = hi[1].max(k.y);
    }
    let range = [
        (ceil_pad(lo[0]), floor_pad(hi[0])),
        (ceil_pad(lo[1]), floor_pad(hi[1])),
    ];
    let span = |r: (f64, f64)| r.1 - r.0 + 1.0;
    // Loop over the coefficient with the shorter range.
    let outer = if span(range[0]) <= span(range[1]) { 0 } else { 1 };
    let inner = 1 - outer;
    let rows = span(range[outer]);
    if rows <= 0.0 {
        return Ok(Vec::new());
    }
    if rows > MAX_SCAN as f64 {
        return Err(LatticeError::WindowTooLarge(rows as i64));
    }
    let col_o = g.col(outer);
    let col_i = g.col(inner);
    let mut out = Vec::new();
    let mut k = range[outer].0 as i64;
    let k_end = range[outer].1 as i64;
    while k <= k_end {
        let base = (k as f64) * col_o + offset;
        let rx = solve_linear(base.x, col_i.x, w.x_lo, w.x_hi);
        let ry = solve_linear(base.y, col_i.y, w.y_lo, w.y_hi);
        if let (Some(rx), Some(ry)) = (rx, ry) {
            let a = rx.0.max(ry.0).max(range[inner].0);
            let b = rx.1.min(ry.1).min(range[inner].1);
            if a <= b {
                for j in (a as i64)..=(b as i64) {
                    let p = Vec2::new(
                        combo(k as f64, col_o.x, j as f64, col_i.x, offset.x),
                        combo(k as f64, col_o.y, j as f64, col_i.y, offset.y),
                    );
                    if w.contains(p) {
                        let (m, n) = if outer == 0 { (k, j) } else { (j, k) };
                        out.push((m, n, p));
                    }
                }
            }
        }
        k += 1;
    }
    Ok(out)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Unions of pieces of a translation-surface holonomy set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HolonomySet {
    /// `g Z^2_prim`.
    PrimitiveLattice,
    /// `g Z^2 + v`.
    Coset,
    /// `g Z^2_prim` together with `g Z^2 + v`.
    LatticeAndCoset,
    /// `g Z^2_prim`, `g Z^2 + v` and `-g Z^2 - v`.
    Doubled,
}

impl From<SurfaceMode> for HolonomySet {
    fn from(m: SurfaceMode) -> Self {
        match m {
            SurfaceMode::AffineOnly => HolonomySet::Coset,
            SurfaceMode::DoubledSlit => HolonomySet::Doubled,
        }
    }
}

impl HolonomySet {
    fn parts(self) -> (bool, bool, bool) {
        match self {
            HolonomySet::PrimitiveLattice => (true, false, false),
            HolonomySet::Coset => (false, true, false),
            HolonomySet::LatticeAndCoset => (true, true, false),
            HolonomySet::Doubled => (true, true, true),
        }
    }
}

/// Unsorted vectors of `set` inside the window; overlapping pieces may repeat.
pub fn set_window_points(surface: &AffineLattice, set: HolonomySet, w: &Window) -> Result<Vec<Vec2>> {
    let (lat, plus, minus) = set.parts();
    let mut all = Vec::new();
    if lat {
        all.extend(
            window_points(&surface.g, Vec2::default(), w)?
                .into_iter()
                .filter(|&(m, n, _)| gcd(m, n) == 1)
                .map(|t| t.2),
        );
    }
    if plus {
        all.extend(window_points(&surface.g, surface.v, w)?.into_iter().map(|t| t.2));
    }
    if minus {
        all.extend(window_points(&surface.g, -surface.v, w)?.into_iter().map(|t| t.2));
    }
    Ok(all)
}

/// Holonomy vectors of the chosen mode inside a window, sorted by slope and deduplicated.
pub fn enumerate_window(surface: &AffineLattice, mode: SurfaceMode, w: &Window) -> Result<Vec<Vec2>> {
    enumerate_set_window(surface, mode.into(), w)
}

pub fn enumerate_set_window(surface: &AffineLattice, set: HolonomySet, w: &Window) -> Result<Vec<Vec2>> {
    let mut pts = set_window_points(surface, set, w)?;
    sort_dedup(&mut pts);
    Ok(pts)
}

fn sort_dedup(pts: &mut Vec<Vec2>) {
    pts.sort_by(|p, q| {
        let (sp, sq) = (p.y / p.x, q.y / q.x);
        sp.total_cmp(&sq).then(p.x.total_cmp(&q.x))
    });
    pts.dedup_by(|q, p| {
        let scale = 1.0 + p.norm_max();
        (p.x - q.x).abs() <= 1e-12 * scale && (p.y - q.y).abs() <= 1e-12 * scale
    });
}

/// Holonomy vectors `w` of the chosen mode with `w` in the strip and slope at most `slope_max`.
pub fn enumerate_strip(surface: &AffineLattice, mode: SurfaceMode, slope_max: f64) -> Result<Vec<Vec2>> {
    if !(slope_max > 0.0) || !slope_max.is_finite() {
        return Err(LatticeError::InvalidInput(format!("slope_max must be positive, got {slope_max}")));
    }
    let mut pts = enumerate_window(surface, mode, &Window::strip(slope_max))?;
    pts.retain(|p| p.in_strip() && p.y <= slope_max * p.x);
    Ok(pts)
}

/// Strip vectors of the lattice `g Z^2`, optionally restricted to primitive coefficients.
pub fn enumerate_lattice_strip(g: &Mat2, slope_max: f64, primitive: bool) -> Result<Vec<Vec2>> {
    if !(slope_max > 0.0) || !slope_max.is_finite() {
        return Err(LatticeError::InvalidInput(format!("slope_max must be positive, got {slope_max}")));
    }
    let mut pts: Vec<Vec2> = window_points(g, Vec2::default(), &Window::strip(slope_max))?
        .into_iter()
        .filter(|&(m, n, p)| (!primitive || gcd(m, n) == 1) && p.in_strip() && p.y <= slope_max * p.x)
        .map(|t| t.2)
        .collect();
    sort_dedup(&mut pts);
    Ok(pts)
}

/// Ordered distinct slopes and their consecutive differences.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GapSeries {
    pub slopes: Vec<f64>,
    pub gaps: Vec<f64>,
    pub count: usize,
    /// Number of points whose slope merged into an earlier one.
    pub merged: usize,
}

impl GapSeries {
    pub fn from_slopes(mut slopes: Vec<f64>) -> Self {
        slopes.sort_by(f64::total_cmp);
        let before = slopes.len();
        slopes.dedup_by(|s, prev| (*s - *prev).abs() <= SLOPE_MERGE_TOL * prev.abs().max(1.0));
        let gaps = slopes.windows(2).map(|w| w[1] - w[0]).collect();
        GapSeries { count: slopes.len(), merged: before - slopes.len(), slopes, gaps }
    }

    /// Number of slopes at most `s`.
    pub fn counting(&self, s: f64) -> usize {
        self.slopes.partition_point(|&x| x <= s)
    }

    /// Gaps multiplied by `factor`, as used for renormalized statistics.
    pub fn scaled(&self, factor: f64) -> Self {
        GapSeries {
            slopes: self.slopes.iter().map(|s| s * factor).collect(),
            gaps: self.gaps.iter().map(|g| g * factor).collect(),
            count: self.count,
            merged: self.merged,
        }
    }
}

pub fn slopes_and_gaps(points: &[Vec2]) -> GapSeries {
    GapSeries::from_slopes(points.iter().map(|p| p.slope()).collect())
}

/// First-quadrant window `0 < x <= r`, `0 <= y <= r`.
pub fn box_window(r: f64) -> Window {
    Window { x_lo: STRIP_TOL * r, x_hi: r * (1.0 + STRIP_TOL), y_lo: -STRIP_TOL * r, y_hi: r * (1.0 + STRIP_TOL) }
}

/// Slopes of first-quadrant holonomy vectors with max-norm at most `r`, gaps scaled by `r^2`.
pub fn renormalized_box_gaps(surface: &AffineLattice, mode: SurfaceMode, r: f64) -> Result<GapSeries> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(LatticeError::InvalidInput(format!("R must be positive, got {r}")));
    }
    let pts = enumerate_window(surface, mode, &box_window(r))?;
    Ok(slopes_and_gaps(&pts).scaled(r * r))
}

/// Number of first-quadrant holonomy vectors with max-norm at most `r`.
pub fn count_box(surface: &AffineLattice, mode: SurfaceMode, r: f64) -> Result<usize> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(LatticeError::InvalidInput(format!("R must be positive, got {r}")));
    }
    Ok(enumerate_window(surface, mode, &box_window(r))?.len())
}

/// Holonomy of the `d`-symmetric torus cover, which coincides with the doubled slit torus set.
pub fn d_cover_holonomy(d: u32, surface: &AffineLattice, slope_max: f64) -> Result<Vec<Vec2>> {
    if d < 2 {
        return Err(LatticeError::InvalidInput(format!("cover degree must be at least 2, got {d}")));
    }
    enumerate_strip(surface, SurfaceMode::DoubledSlit, slope_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        let v = reduce_to_fundamental(&Mat2::identity(), Vec2::new(2.5, -0.25)).unwrap();
        assert!((v.x - 0.5).abs() < 1e-15 && (v.y - 0.75).abs() < 1e-15);
        let g = Mat2::p(0.6, 0.5);
        let v = reduce_to_fundamental(&g, Vec2::new(0.9, 0.5)).unwrap();
        assert!((v.x - 0.3).abs() < 1e-12 && (v.y - 0.5).abs() < 1e-12);
        assert!(matches!(
            reduce_to_fundamental(&Mat2::new(1.0, 2.0, 2.0, 4.0), Vec2::default()),
            Err(LatticeError::Singular(_))
        ));
    }

    #[test]
    fn strip_examples() {
        let s = AffineLattice::new(Mat2::identity(), Vec2::new(0.5, 0.0)).unwrap();
        let pts = enumerate_strip(&s, SurfaceMode::AffineOnly, 7.0).unwrap();
        assert_eq!(pts, vec![Vec2::new(0.5, 1.0), Vec2::new(0.5, 2.0), Vec2::new(0.5, 3.0)]);
        let prim = enumerate_lattice_strip(&Mat2::identity(), 3.0, true).unwrap();
        assert_eq!(prim, vec![Vec2::new(1.0, 1.0), Vec2::new(1.0, 2.0), Vec2::new(1.0, 3.0)]);
        assert!(enumerate_lattice_strip(&Mat2::identity(), 0.5, true).unwrap().is_empty());
        assert!(enumerate_strip(&s, SurfaceMode::AffineOnly, 0.0).is_err());
    }

    #[test]
    fn gap_examples() {
        let g = slopes_and_gaps(&[Vec2::new(0.5, 1.0), Vec2::new(0.5, 2.0), Vec2::new(0.5, 3.0)]);
        assert_eq!(g.slopes, vec![2.0, 4.0, 6.0]);
        assert_eq!(g.gaps, vec![2.0, 2.0]);
        assert!(slopes_and_gaps(&[Vec2::new(1.0, 1.0)]).gaps.is_empty());
        let prim = enumerate_lattice_strip(&Mat2::identity(), 10.0, true).unwrap();
        let g = slopes_and_gaps(&prim);
        assert_eq!(g.count, 10);
        assert!(g.gaps.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn horocycle_examples() {
        assert_eq!(horocycle_apply(2.0, Vec2::new(1.0, 3.0)), Vec2::new(1.0, 1.0));
        let w = Vec2::new(0.25, 0.1);
        assert!(horocycle_apply(0.4, w).y.abs() < 1e-15);
        assert!(horocycle_apply(w.slope(), w).y.abs() < 1e-15);
    }

    #[test]
    fn box_gaps_at_unit_scale() {
        let z = AffineLattice::lattice(Mat2::identity()).unwrap();
        let pts = enumerate_window(&z, SurfaceMode::DoubledSlit, &box_window(1.0)).unwrap();
        let primitive: Vec<_> = pts.into_iter().filter(|p| p.norm_max() > 0.0).collect();
        let g = slopes_and_gaps(&primitive);
        assert_eq!(g.slopes, vec![0.0, 1.0]);
        assert_eq!(g.gaps, vec![1.0]);
    }

    #[test]
    fn doubled_slit_union() {
        let s = AffineLattice::new(Mat2::identity(), Vec2::new(0.5, 0.0)).unwrap();
        let pts = enumerate_strip(&s, SurfaceMode::DoubledSlit, 3.0).unwrap();
        let g = slopes_and_gaps(&pts);
        assert_eq!(g.slopes, vec![1.0, 2.0, 3.0]);
        assert_eq!(g.gaps, vec![1.0, 1.0]);
    }

    #[test]
    fn d_cover_rejects_small_degree() {
        let s = AffineLattice::new(Mat2::identity(), Vec2::new(0.5, 0.0)).unwrap();
        assert!(d_cover_holonomy(1, &s, 5.0).is_err());
        for d in [2, 3] {
            assert_eq!(
                d_cover_holonomy(d, &s, 5.0).unwrap(),
                enumerate_strip(&s, SurfaceMode::DoubledSlit, 5.0).unwrap()
            );
        }
    }

    #[test]
    fn gauss_reduce_keeps_lattice() {
        let g = Mat2::p(0.3, 0.8).mul(&Mat2::new(5.0, 3.0, 3.0, 2.0));
        let r = gauss_reduce(&g);
        assert!((r.det() - g.det()).abs() < 1e-12);
        let a = AffineLattice::lattice(g).unwrap();
        let b = AffineLattice::lattice(r).unwrap();
        assert!(a.same_coset(&b, 1e-9).unwrap());
    }
}
