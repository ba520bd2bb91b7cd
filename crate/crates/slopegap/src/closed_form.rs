//! Closed-form and quadrature evaluation of the gap-distribution tails.
//!
//! `G(t)` is the unnormalized tail `m_W(R > t)` for the doubled slit torus, with
//! `G(0) = (3 + pi^2)/6`. Quadrature evaluates the region-by-region integral lists
//! with the `s` and `x` integrals done symbolically.

use std::cell::Cell;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("quadrature did not converge (estimated error {achieved:e})")]
    Quadrature { achieved: f64 },
    #[error("t = {t} is within h of the breakpoint {breakpoint}; request one-sided differences")]
    Ambiguous { t: f64, breakpoint: f64 },
    #[error("outside the regime of validity: {0}")]
    OutOfRegime(String),
}

pub type Result<T> = std::result::Result<T, ClosedFormError>;

/// `G(0) = (3 + pi^2)/6`, the total mass of `W`.
pub fn g_zero() -> f64 {
    (3.0 + PI * PI) / 6.0
}

/// `(3 + sqrt 5)/2`.
pub fn phi2() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

/// Interior boundaries of the closed-form pieces.
pub fn breakpoints() -> [f64; 4] {
    [1.0, 2.0, phi2(), 4.0]
}

/// Real dilogarithm `Li_2(x)` for `x <= 1`.
pub fn dilog(x: f64) -> Result<f64> {
    if !(x <= 1.0) {
        return Err(ClosedFormError::Domain(format!("dilog({x}) is not real")));
    }
    Ok(dilog_real(x))
}

fn dilog_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut p = x;
    for k in 1..200 {
        let term = p / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        p *= x;
    }
    sum
}

fn dilog_real(x: f64) -> f64 {
    if x == 1.0 {
        PI * PI / 6.0
    } else if x.abs() <= 0.5 {
        dilog_series(x)
    } else if x > 0.5 {
        PI * PI / 6.0 - x.ln() * (1.0 - x).ln() - dilog_series(1.0 - x)
    } else if x >= -1.0 {
        let l = (1.0 - x).ln();
        -dilog_series(x / (x - 1.0)) - 0.5 * l * l
    } else {
        let l = (-x).ln();
        -PI * PI / 6.0 - 0.5 * l * l - dilog_real(1.0 / x)
    }
}

/// `arccoth x = ln((x + 1)/(x - 1))/2` for `|x| > 1`.
pub fn arccoth(x: f64) -> f64 {
    0.5 * ((x + 1.0) / (x - 1.0)).ln()
}

/// Evaluate closed-form piece `k` (0 to 3) at `t`, regardless of which piece owns `t`.
pub fn g_piece(k: usize, t: f64) -> f64 {
    let ln = f64::ln;
    let l2 = 2f64.ln();
    match k {
        0 => g_zero() - 7.0 * t / 8.0,
        1 => {
            let (lt, lt1) = (ln(t), ln(t - 1.0));
            let d = dilog_real(1.0 / t) - dilog_real((t - 1.0) / t);
            (24.0 * d - 12.0 * lt * lt + 24.0 * lt1 * lt + 12.0 * lt) / 24.0 - 2.5
                + 1.0 / (6.0 * t * t)
                + t * (-24.0 * lt1 + 24.0 * lt - 4.0) / 24.0
                + (24.0 * lt1 + 54.0 * lt + 51.0) / (24.0 * t)
        }
        2 => {
            let (lt, lt1, st) = (ln(t), ln(t - 1.0), t.sqrt());
            let d = dilog_real(1.0 / t) - dilog_real((t - 1.0) / t);
            let lis = ln(1.0 - 1.0 / st);
            (-48.0 * d - 9.0 * lt - 24.0 * lt * lt) / 48.0
                + 1.0 / (2.0 * t * st)
                + (12.0 * lis - 36.0 * lt1 + 48.0 * lt - 12.0 * ln(t - st)) / (48.0 * t * t)
                + (72.0 * arccoth(1.0 - 2.0 * t) - 18.0) / (48.0 * t * t)
                + (24.0 * lis + 24.0 * lt - 36.0) / (48.0 * st)
                + (-12.0 * lis - 3.0 * (7.0 + 8.0 * l2) * ln(4.0 / t)) / 48.0
                + (-63.0 - 45.0 * l2 - 3.0 * l2 * 8.0 * l2) / 24.0
                + t * (-48.0 * lt1 + 48.0 * lt - 16.0) / 48.0
                + (-12.0 * lis + 48.0 * lt1 + 96.0 * lt + 192.0) / (48.0 * t)
                + (48.0 * lt1 * lt + 24.0 * (3.0 + l2) * lt) / 48.0
        }
        3 => {
            let (lt, lt1, st) = (ln(t), ln(t - 1.0), t.sqrt());
            let d = dilog_real(1.0 / t) - dilog_real((t - 1.0) / t);
            let lis = ln(1.0 - 1.0 / st);
            let ls1 = ln(st - 1.0);
            // log(1 - t) and log(-t) share the imaginary part i pi, which cancels.
            (-48.0 * d - 9.0 * lt - 24.0 * lt * lt) / 48.0
                + (-12.0 * lt1 - 24.0 * lt1 + 12.0 * lt + 24.0 * lt) / (48.0 * t * t)
                + (72.0 * arccoth(1.0 - 2.0 * t) - 24.0) / (48.0 * t * t)
                + (-12.0 * lis - 144.0 - 2.0 * 3.0 * l2 * (15.0 + 8.0 * l2)) / 48.0
                + (12.0 * ls1 + 3.0 * (7.0 + 8.0 * l2) * ln(4.0 / t)) / 48.0
                + (24.0 * lis - 24.0 * ls1 + 12.0 * lt) / (48.0 * st)
                + t * (-48.0 * lt1 + 48.0 * lt - 16.0) / 48.0
                + (-12.0 * lis + 12.0 * ls1 + 24.0 * lt1 + 24.0 * ln((t - 1.0) / st)) / (48.0 * t)
                + (114.0 * lt + 198.0) / (48.0 * t)
                + (48.0 * lt1 * lt + 6.0 * (13.0 + 4.0 * l2) * lt) / 48.0
        }
        _ => f64::NAN,
    }
}

/// Index of the closed-form piece owning `t` (`None` beyond 4).
pub fn piece_index(t: f64) -> Option<usize> {
    if t <= 1.0 {
        Some(0)
    } else if t <= 2.0 {
        Some(1)
    } else if t <= phi2() {
        Some(2)
    } else if t <= 4.0 {
        Some(3)
    } else {
        None
    }
}

/// Piecewise closed form of `G` on `[0, 4]`, quadrature beyond.
pub fn w_tail_closed_form(t: f64) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(ClosedFormError::Domain(format!("t = {t} must be a finite nonnegative number")));
    }
    match piece_index(t) {
        Some(k) => Ok(g_piece(k, t)),
        None => w_tail_quadrature(t),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Each nesting level tightens the relative tolerance by this factor.
    pub nesting_factor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-15, max_subdivisions: 400, nesting_factor: 1e-1 }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod 7/15 with global bisection of the worst interval.
/// Returns `(value, error estimate, converged)`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, rel_tol: f64, abs_tol: f64, max_sub: usize) -> (f64, f64, bool) {
    if !(hi > lo) {
        return (0.0, 0.0, true);
    }
    let (v, e) = gk15(f, lo, hi);
    let mut parts = vec![(lo, hi, v, e)];
    let (mut total, mut err) = (v, e);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if parts.len() >= max_sub {
            let roundoff = err <= 1e-14 * total.abs().max(abs_tol);
            return (total, err, roundoff);
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (a, b, v0, e0) = parts.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
    (parts.iter().map(|p| p.2).sum(), err, true)
}

/// Nested quadrature with failure tracking across levels.
pub struct Integrator {
    spec: QuadratureSpec,
    failed: Cell<f64>,
}

impl Integrator {
    pub fn new(spec: QuadratureSpec) -> Self {
        Self { spec, failed: Cell::new(0.0) }
    }

    /// Integral at nesting `level` (0 = outermost).
    pub fn quad<F: Fn(f64) -> f64>(&self, level: i32, f: F, lo: f64, hi: f64) -> f64 {
        let rel = self.spec.rel_tol * self.spec.nesting_factor.powi(level);
        let (v, e, ok) = adaptive(&f, lo, hi, rel.max(1e-14), self.spec.abs_tol, self.spec.max_subdivisions);
        if !ok {
            self.failed.set(self.failed.get().max(e));
        }
        v
    }

    pub fn finish(&self, value: f64) -> Result<f64> {
        let e = self.failed.get();
        if e > 0.0 && e > self.spec.rel_tol * value.abs().max(self.spec.abs_tol) {
            Err(ClosedFormError::Quadrature { achieved: e })
        } else {
            Ok(value)
        }
    }

    fn q2<F: Fn(f64, f64) -> f64>(&self, f: F, b0: f64, b1: f64, lo: impl Fn(f64) -> f64, hi: impl Fn(f64) -> f64) -> f64 {
        self.quad(0, |b| self.quad(1, |a| f(a, b), lo(b), hi(b)), b0, b1)
    }

    #[allow(clippy::too_many_arguments)]
    fn q3<F: Fn(f64, f64, f64) -> f64>(
        &self,
        f: F,
        b0: f64,
        b1: f64,
        lo2: impl Fn(f64) -> f64,
        hi2: impl Fn(f64) -> f64,
        lo3: impl Fn(f64, f64) -> f64,
        hi3: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        self.quad(
            0,
            |b| self.quad(1, |x| self.quad(2, |z| f(z, x, b), lo3(x, b), hi3(x, b)), lo2(b), hi2(b)),
            b0,
            b1,
        )
    }
}

/// Contributions to `G(t)` by region of `W`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WTailBreakdown {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub omega4: f64,
    pub sl_1a: f64,
    pub sl_1b: f64,
    pub sl_2a: f64,
    pub sl_2b: f64,
    pub sl_2c: f64,
}

impl WTailBreakdown {
    pub fn total(&self) -> f64 {
        self.omega1 + self.omega2 + self.omega3 + self.omega4 + self.sl_1a + self.sl_1b + self.sl_2a + self.sl_2b + self.sl_2c
    }
}

struct Regime {
    t: f64,
    it: f64,
    bm: f64,
    bp: f64,
}

impl Regime {
    fn new(t: f64) -> Self {
        let (bm, bp) = if t >= 4.0 {
            let r = (1.0 - 4.0 / t).sqrt();
            ((1.0 - r) / 2.0, (1.0 + r) / 2.0)
        } else {
            (f64::NAN, f64::NAN)
        };
        Regime { t, it: if t > 0.0 { 1.0 / t } else { f64::INFINITY }, bm, bp }
    }

    /// `b`-ranges for the `alpha < 1/(bt)` family, with the upper limit of the middle variable.
    fn hyperbola_ranges(&self) -> Vec<(f64, f64, bool)> {
        let (t, it) = (self.t, self.it);
        if t < 1.0 {
            vec![(0.0, 1.0, false)]
        } else if t < 4.0 {
            vec![(0.0, it, false), (it, 1.0, true)]
        } else {
            vec![(0.0, it, false), (it, self.bm, true), (self.bp, 1.0, true)]
        }
    }
}

fn omega1_part(ig: &Integrator, r: &Regime) -> f64 {
    let t = r.t;
    let f = |a: f64, al: f64, b: f64| (al - a) / a * (1.0 / (b * al) - t);
    r.hyperbola_ranges()
        .into_iter()
        .map(|(b0, b1, cut)| {
            let hi = move |b: f64| if cut { 1.0 / (b * t) } else { 1.0 };
            ig.q3(f, b0, b1, |b| 1.0 - b, hi, |_, b| 1.0 - b, |al, _| al)
        })
        .sum()
}

fn omega2_part(ig: &Integrator, r: &Regime) -> f64 {
    let t = r.t;
    let f = |_a: f64, al: f64, b: f64| 1.0 / (b * al) - t;
    r.hyperbola_ranges()
        .into_iter()
        .map(|(b0, b1, cut)| {
            let hi = move |b: f64| if cut { 1.0 / (b * t) } else { 1.0 };
            ig.q3(f, b0, b1, |b| 1.0 - b, hi, |_, b| 1.0 - b, |al, _| al)
        })
        .sum()
}

fn omega3_part(ig: &Integrator, r: &Regime) -> f64 {
    let (t, it) = (r.t, r.it);
    let f = |a: f64, al: f64, b: f64| (1.0 / a - t * (b + al)) / b;
    if t < 1.0 {
        return ig.q3(f, 0.0, 1.0, |_| 0.0, |b| 1.0 - b, |_, b| 1.0 - b, |_, _| 1.0);
    }
    let ub = move |b: f64| (b * b - b + it) / (1.0 - b);
    let amax = move |al: f64, b: f64| 1.0 / (t * (b + al));
    let mut tot = ig.q3(f, 0.0, it, |_| 0.0, move |b| it - b, |_, b| 1.0 - b, |_, _| 1.0);
    type Lim = Box<dyn Fn(f64) -> f64>;
    let lo_h: fn(f64, f64) -> f64 = |b, it| it - b;
    let ranges: Vec<(f64, f64, Lim, Lim)> = if t < 2.0 {
        vec![
            (0.0, 1.0 - it, Box::new(move |b| lo_h(b, it)), Box::new(ub)),
            (1.0 - it, it, Box::new(move |b| lo_h(b, it)), Box::new(|b| 1.0 - b)),
            (it, 1.0, Box::new(|_| 0.0), Box::new(|b| 1.0 - b)),
        ]
    } else if t < 4.0 {
        vec![
            (0.0, it, Box::new(move |b| lo_h(b, it)), Box::new(ub)),
            (it, 1.0 - it, Box::new(|_| 0.0), Box::new(ub)),
            (1.0 - it, 1.0, Box::new(|_| 0.0), Box::new(|b| 1.0 - b)),
        ]
    } else {
        vec![
            (0.0, it, Box::new(move |b| lo_h(b, it)), Box::new(ub)),
            (it, r.bm, Box::new(|_| 0.0), Box::new(ub)),
            (r.bp, 1.0 - it, Box::new(|_| 0.0), Box::new(ub)),
            (1.0 - it, 1.0, Box::new(|_| 0.0), Box::new(|b| 1.0 - b)),
        ]
    };
    for (b0, b1, lo, hi) in ranges {
        tot += ig.q3(f, b0, b1, lo, hi, |_, b| 1.0 - b, amax);
    }
    tot
}

fn omega4_part(ig: &Integrator, r: &Regime) -> f64 {
    let t = r.t;
    let f = |a: f64, b: f64| (1.0 / (a * b) - t) * (a - (1.0 - b));
    r.hyperbola_ranges()
        .into_iter()
        .map(|(b0, b1, cut)| ig.q2(f, b0, b1, |b| 1.0 - b, move |b| if cut { 1.0 / (b * t) } else { 1.0 }))
        .sum()
}

/// `int_{y0}^{y1} l(y) dy` with `l(y) = (1 - b)/a - (b/a) y`.
fn lint(a: f64, b: f64, y0: f64, y1: f64) -> f64 {
    (1.0 - b) / a * (y1 - y0) - b / a * (y1 * y1 - y0 * y0) / 2.0
}

fn sl_parts(ig: &Integrator, r: &Regime, out: &mut WTailBreakdown) {
    let (t, it) = (r.t, r.it);
    let one = |_: f64| 1.0;
    let h = move |b: f64| if t > 0.0 { 1.0 / (b * t) } else { 1.0 };
    let c1a = |a: f64, b: f64| 1.0 - lint(a, b, 0.0, 1.0);
    let c1b = |a: f64, b: f64| (1.0 / b - 1.0) - lint(a, b, 0.0, 1.0 / b - 1.0) + (2.0 - 1.0 / b);
    // L(1) ys^2 / 2 rewritten to stay finite as t -> 0.
    let tri = move |a: f64, b: f64| (1.0 - b) * (1.0 - b) * t * (1.0 - a * b * t) / 2.0;
    let ys = move |a: f64, b: f64| (1.0 - b) * a * t;
    let c2a = move |a: f64, b: f64| tri(a, b) + lint(a, b, ys(a, b), 1.0 / b - 1.0);
    let c2b = move |a: f64, b: f64| tri(a, b) + lint(a, b, ys(a, b), 1.0);
    let c2c = move |a: f64, b: f64| (1.0 / (a * a * t) - b / a) / 2.0;
    let lo_tri = |b: f64| 1.0 - b;

    type Range = (f64, f64, Box<dyn Fn(f64) -> f64>);
    let r1a: Vec<Range> = if t < 2.0 {
        vec![(0.0, 0.5, Box::new(one))]
    } else if t < 4.0 {
        vec![(0.0, it, Box::new(one)), (it, 0.5, Box::new(h))]
    } else {
        vec![(0.0, it, Box::new(one)), (it, r.bm, Box::new(h))]
    };
    let upper_half = || -> Vec<Range> {
        if t < 1.0 {
            vec![(0.5, 1.0, Box::new(one))]
        } else if t < 2.0 {
            vec![(0.5, it, Box::new(one)), (it, 1.0, Box::new(h))]
        } else if t < 4.0 {
            vec![(0.5, 1.0, Box::new(h))]
        } else {
            vec![(r.bp, 1.0, Box::new(h))]
        }
    };
    out.sl_1a = r1a.into_iter().map(|(b0, b1, hi)| ig.q2(c1a, b0, b1, lo_tri, hi)).sum();
    out.sl_1b = upper_half().into_iter().map(|(b0, b1, hi)| ig.q2(c1b, b0, b1, lo_tri, hi)).sum();
    out.sl_2a = upper_half().into_iter().map(|(b0, b1, hi)| ig.q2(c2a, b0, b1, lo_tri, hi)).sum();

    type Range2 = (f64, f64, Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>);
    let g = move |b: f64| 1.0 / (t * (1.0 - b));
    let rt = if t > 0.0 { 1.0 - 1.0 / t.sqrt() } else { f64::NAN };
    let r2b: Vec<Range2> = if t < 1.0 {
        vec![(0.0, 0.5, Box::new(lo_tri), Box::new(one))]
    } else if t < 2.0 {
        vec![(rt, 1.0 - it, Box::new(lo_tri), Box::new(g)), (1.0 - it, 0.5, Box::new(lo_tri), Box::new(one))]
    } else if t < 4.0 {
        vec![(rt, 0.5, Box::new(lo_tri), Box::new(g))]
    } else {
        vec![]
    };
    out.sl_2b = r2b.into_iter().map(|(b0, b1, lo, hi)| ig.q2(c2b, b0, b1, lo, hi)).sum();

    let r2c: Vec<Range2> = if t < 1.0 {
        vec![]
    } else if t < 2.0 {
        vec![(0.0, rt, Box::new(lo_tri), Box::new(one)), (rt, 1.0 - it, Box::new(g), Box::new(one))]
    } else if t < phi2() {
        vec![
            (0.0, rt, Box::new(lo_tri), Box::new(one)),
            (rt, it, Box::new(g), Box::new(one)),
            (it, 0.5, Box::new(g), Box::new(h)),
        ]
    } else if t < 4.0 {
        vec![
            (0.0, it, Box::new(lo_tri), Box::new(one)),
            (it, rt, Box::new(lo_tri), Box::new(h)),
            (rt, 0.5, Box::new(g), Box::new(h)),
        ]
    } else {
        vec![(0.0, it, Box::new(lo_tri), Box::new(one)), (it, r.bm, Box::new(lo_tri), Box::new(h))]
    };
    out.sl_2c = r2c.into_iter().map(|(b0, b1, lo, hi)| ig.q2(c2c, b0, b1, lo, hi)).sum();
}

/// Region-by-region contributions to `G(t)` by nested quadrature.
pub fn w_tail_breakdown(t: f64, spec: QuadratureSpec) -> Result<WTailBreakdown> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(ClosedFormError::Domain(format!("t = {t} must be a finite nonnegative number")));
    }
    let ig = Integrator::new(spec);
    let r = Regime::new(t);
    let mut out = WTailBreakdown {
        omega1: omega1_part(&ig, &r),
        omega2: omega2_part(&ig, &r),
        omega3: omega3_part(&ig, &r),
        omega4: omega4_part(&ig, &r),
        ..Default::default()
    };
    sl_parts(&ig, &r, &mut out);
    ig.finish(out.total())?;
    Ok(out)
}

/// `G(t)` from the integral lists.
pub fn w_tail_quadrature(t: f64) -> Result<f64> {
    w_tail_quadrature_with(t, QuadratureSpec::default())
}

pub fn w_tail_quadrature_with(t: f64, spec: QuadratureSpec) -> Result<f64> {
    Ok(w_tail_breakdown(t, spec)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSource {
    /// Piecewise closed form on `[0, 4]`, quadrature beyond.
    #[default]
    ClosedForm,
    Quadrature,
}

pub fn w_tail(t: f64, source: TailSource) -> Result<f64> {
    match source {
        TailSource::ClosedForm => w_tail_closed_form(t),
        TailSource::Quadrature => w_tail_quadrature(t),
    }
}

/// `G(t)/G(0)`, the probability that a gap exceeds `t`.
pub fn normalized_tail(t: f64, source: TailSource) -> Result<f64> {
    Ok(w_tail(t, source)? / g_zero())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Value { value: f64 },
    OneSided { left: f64, right: f64 },
}

/// Regime changes of the integral lists, where one-sided densities are reported.
/// `(3 + sqrt 5)/2` only reorders two limits of integration and is not among them.
pub fn density_breakpoints() -> [f64; 3] {
    [1.0, 2.0, 4.0]
}

/// `-dG/dt` by central differences; one-sided pair near a breakpoint when allowed.
pub fn w_density(t: f64, h: f64, source: TailSource, one_sided: bool) -> Result<Density> {
    if !(t > 0.0) || !(h > 0.0) {
        return Err(ClosedFormError::Domain(format!("need t > 0 and h > 0, got t = {t}, h = {h}")));
    }
    let g = |x: f64| w_tail(x, source);
    if let Some(&bp) = density_breakpoints().iter().find(|&&bp| (t - bp).abs() < h) {
        if !one_sided {
            return Err(ClosedFormError::Ambiguous { t, breakpoint: bp });
        }
        let left = -(g(bp)? - g(bp - h)?) / h;
        let right = -(g(bp + h)? - g(bp)?) / h;
        return Ok(Density::OneSided { left, right });
    }
    let lo = (t - h).max(0.0);
    Ok(Density::Value { value: -(g(t + h)? - g(lo)?) / (t + h - lo) })
}

/// Lower and upper bounds for `m_Omega(R > t)` in unit-density normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaBounds {
    pub lower: f64,
    pub upper: f64,
    pub omega1: f64,
    pub omega3: f64,
    pub omega2_lower: f64,
    pub omega2_upper: f64,
    pub omega4_lower: f64,
    pub omega4_upper: f64,
}

/// Root `b_k` (`k` = 1 near 1, `k` = 2 near 0) of `t b (1 - b)^2 = 2`; needs `t >= 27/2`.
pub fn cubic_root(t: f64, k: u32) -> Result<f64> {
    if !(t >= 13.5) {
        return Err(ClosedFormError::OutOfRegime(format!("b_k is complex for t = {t} < 27/2")));
    }
    if !(k == 1 || k == 2) {
        return Err(ClosedFormError::Domain(format!("k = {k} must be 1 or 2")));
    }
    let theta = (27.0 / t - 1.0).clamp(-1.0, 1.0).acos();
    Ok(2.0 / 3.0 * ((theta / 3.0 - 2.0 * PI * k as f64 / 3.0).cos() + 1.0))
}

pub fn omega_tail_bounds(t: f64) -> Result<OmegaBounds> {
    omega_tail_bounds_with(t, QuadratureSpec::default())
}

pub fn omega_tail_bounds_with(t: f64, spec: QuadratureSpec) -> Result<OmegaBounds> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(ClosedFormError::Domain(format!("t = {t} must be positive")));
    }
    let ig = Integrator::new(spec);
    let r = Regime::new(t);
    let omega1 = omega1_part(&ig, &r);
    let omega3 = omega3_part(&ig, &r);

    // U = 2/(ab(1-b)) > t  iff  a < 2/(t b (1 - b)).
    let mut cuts = vec![0.0, 1.0];
    if t >= 8.0 {
        let d = (1.0 - 8.0 / t).sqrt();
        cuts.extend([(1.0 - d) / 2.0, (1.0 + d) / 2.0]);
    }
    if t >= 13.5 {
        cuts.extend([cubic_root(t, 1)?, cubic_root(t, 2)?]);
    }
    cuts.sort_by(f64::total_cmp);
    let a_hi = move |b: f64| (2.0 / (t * b * (1.0 - b))).min(1.0);
    let (mut o2u, mut o4u) = (0.0, 0.0);
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            o2u += ig.q2(|a, b| -a.ln() / b, w[0], w[1], |b| 1.0 - b, a_hi);
            o4u += ig.q2(|a, b| (a - 1.0 + b) / (a * b), w[0], w[1], |b| 1.0 - b, a_hi);
        }
    }

    // L = (alpha - a)/(b alpha) > t  iff  a < alpha (1 - b t); empty for t >= 1.
    let o2l = if t < 1.0 {
        ig.q2(
            |al, b| (al * (1.0 - b * t) - (1.0 - b)) / (b * al),
            0.0,
            1.0,
            move |b| ((1.0 - b) / (1.0 - b * t)).min(1.0),
            |_| 1.0,
        )
    } else {
        0.0
    };
    // {s a > t} on Omega_4: b < 1/t, alpha in (1 - b, 1), a in (alpha, 1), s-length (1/b - t)/a.
    let o4l = ig.q2(
        |al, b| (1.0 / b - t) * (-al.ln()),
        0.0,
        (1.0 / t).min(1.0),
        |b| 1.0 - b,
        |_| 1.0,
    );
    let lower = omega1 + omega3 + o2l + o4l;
    let upper = omega1 + omega3 + o2u + o4u;
    ig.finish(upper)?;
    Ok(OmegaBounds {
        lower,
        upper,
        omega1,
        omega3,
        omega2_lower: o2l,
        omega2_upper: o2u,
        omega4_lower: o4l,
        omega4_upper: o4u,
    })
}

/// Measure of `{b in (lo, hi] : b < 1/(at) + (a - alpha)/j(b)}` with `j(b) = floor(c/b)`.
fn torsion_c2_length(a: f64, t: f64, q: f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let alpha = a / q;
    let c = 1.0 + a - alpha;
    let h0 = 1.0 / (a * t);
    // Below 1/(at) the condition holds for every j.
    let mut len = (hi.min(h0) - lo).max(0.0);
    let start = lo.max(h0);
    if hi <= start || a - alpha <= 0.0 {
        return len;
    }
    let j_lo = (c / hi).floor().max(1.0) as i64;
    let j_hi = (c / start).floor() as i64;
    for j in j_lo..=j_hi {
        let (b0, b1) = ((c / (j + 1) as f64).max(start), (c / j as f64).min(hi));
        let bound = h0 + (a - alpha) / j as f64;
        len += (b1.min(bound) - b0).max(0.0);
    }
    len
}

/// Contributions of `C_1 = {b + a/q < 1}` and `C_2` to `m_q(R > t)` as probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionTail {
    pub c1: f64,
    pub c2: f64,
    pub total: f64,
}

pub fn torsion_tail(q: u32, t: f64) -> Result<TorsionTail> {
    if q == 0 {
        return Err(ClosedFormError::Domain("q must be >= 1".into()));
    }
    let qf = q as f64;
    let disc = 1.0 - 4.0 / t * (1.0 - 1.0 / qf);
    if !(t > qf) || !(disc > 0.0) {
        return Err(ClosedFormError::OutOfRegime(format!("t = {t} needs t > q = {q} and a positive discriminant")));
    }
    let ig = Integrator::new(QuadratureSpec::default());
    // C_1: b in (1 - a, 1 - a/q), R > t iff b < 1/(at) - a/q.
    let c1_len = |a: f64| {
        let hi = (1.0 - a / qf).min(1.0 / (a * t) - a / qf);
        (hi - (1.0 - a)).max(0.0)
    };
    // C_2: b in [1 - a/q, 1].
    let c2_len = |a: f64| torsion_c2_length(a, t, qf, (1.0 - a / qf).max(1.0 - a), 1.0);
    let mut cuts = vec![0.0, 1.0 / t, 1.0];
    let r = (1.0 - 4.0 / t).max(0.0).sqrt();
    cuts.extend([(1.0 - r) / 2.0, (1.0 + r) / 2.0]);
    if q > 1 {
        cuts.push((1.0 - disc.sqrt()) / (2.0 * (1.0 - 1.0 / qf)));
    }
    cuts.retain(|x| (0.0..=1.0).contains(x));
    cuts.sort_by(f64::total_cmp);
    let (mut c1, mut c2) = (0.0, 0.0);
    for w in cuts.windows(2) {
        c1 += ig.quad(0, c1_len, w[0], w[1]);
        c2 += ig.quad(0, c2_len, w[0], w[1]);
    }
    // Normalize by the area of Delta.
    let (c1, c2) = (2.0 * c1, 2.0 * c2);
    ig.finish(c1 + c2)?;
    Ok(TorsionTail { c1, c2, total: c1 + c2 })
}

/// `C_1` contribution from the two-term integral list, as a probability.
pub fn torsion_c1_list(q: u32, t: f64) -> Result<f64> {
    if q <= 1 {
        return Ok(0.0);
    }
    let qf = q as f64;
    let k = 1.0 - 1.0 / qf;
    let disc = 1.0 - 4.0 / t * k;
    if !(t > qf) || !(disc > 0.0) {
        return Err(ClosedFormError::OutOfRegime(format!("t = {t} needs t > q = {q} and a positive discriminant")));
    }
    let a_root = (1.0 - disc.sqrt()) / (2.0 * k);
    let ig = Integrator::new(QuadratureSpec::default());
    let first = ig.quad(0, |a| (1.0 - a / qf) - (1.0 - a), 0.0, 1.0 / t);
    let second = ig.quad(0, |a| 1.0 / (a * t) - a / qf - (1.0 - a), 1.0 / t, a_root);
    ig.finish(2.0 * (first + second))
}

/// Least-squares slope of `ln value` against `ln t`.
pub fn fit_decay_exponent(ts: &[f64], values: &[f64]) -> Result<f64> {
    if ts.len() != values.len() || ts.len() < 5 {
        return Err(ClosedFormError::Domain("need at least 5 paired points".into()));
    }
    if ts.iter().chain(values).any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(ClosedFormError::Domain("grid and values must be positive".into()));
    }
    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Geometric grid of `n` points from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Largest closed-form versus quadrature difference on one piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PieceMismatch {
    pub piece: usize,
    pub lo: f64,
    pub hi: f64,
    pub max_abs_diff: f64,
    pub at: f64,
}

/// Compare each closed-form piece with quadrature at `points` interior points.
pub fn piece_mismatch(points: usize) -> Result<Vec<PieceMismatch>> {
    let edges = [0.0, 1.0, 2.0, phi2(), 4.0];
    let mut out = Vec::new();
    for k in 0..4 {
        let (lo, hi) = (edges[k], edges[k + 1]);
        let mut worst = PieceMismatch { piece: k, lo, hi, max_abs_diff: 0.0, at: lo };
        for i in 0..points {
            let t = lo + (hi - lo) * (i as f64 + 0.5) / points as f64;
            let d = (g_piece(k, t) - w_tail_quadrature(t)?).abs();
            if d > worst.max_abs_diff {
                worst.max_abs_diff = d;
                worst.at = t;
            }
        }
        out.push(worst);
    }
    Ok(out)
}

/// Jump of the closed form across each interior breakpoint, from pieces evaluated on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuity {
    pub at: f64,
    pub left: f64,
    pub right: f64,
}

impl Continuity {
    pub fn jump(&self) -> f64 {
        (self.right - self.left).abs()
    }
}

pub fn continuity_report() -> Result<Vec<Continuity>> {
    let eps = 1e-9;
    let mut out = Vec::new();
    for (k, &bp) in breakpoints().iter().enumerate() {
        let left = g_piece(k, bp);
        let right = if k + 1 < 4 { g_piece(k + 1, bp + eps) } else { w_tail_quadrature(bp + eps)? };
        out.push(Continuity { at: bp, left, right });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilog_values() {
        assert_eq!(dilog(0.0).unwrap(), 0.0);
        assert!((dilog(1.0).unwrap() - PI * PI / 6.0).abs() < 1e-15);
        let half = PI * PI / 12.0 - 2f64.ln().powi(2) / 2.0;
        assert!((dilog(0.5).unwrap() - half).abs() < 1e-14);
        assert!((dilog(-1.0).unwrap() + PI * PI / 12.0).abs() < 1e-14);
        assert!(dilog(1.5).is_err());
    }

    #[test]
    fn gk_integrates_polynomials_exactly() {
        let (v, _, ok) = adaptive(&|x: f64| x.powi(5) - 3.0 * x, 0.0, 2.0, 1e-12, 1e-15, 50);
        assert!(ok);
        assert!((v - (64.0 / 6.0 - 6.0)).abs() < 1e-12);
    }

    #[test]
    fn anchors() {
        assert!((w_tail_closed_form(0.0).unwrap() - 2.144_934_066_848_226).abs() < 1e-12);
        assert!((w_tail_closed_form(1.0).unwrap() - (g_zero() - 0.875)).abs() < 1e-12);
        assert!(w_tail_closed_form(-1.0).is_err());
    }

    #[test]
    fn cubic_roots() {
        let b2 = cubic_root(100.0, 2).unwrap();
        assert!((100.0 * b2 * (1.0 - b2).powi(2) - 2.0).abs() < 1e-9);
        let b1 = cubic_root(100.0, 1).unwrap();
        assert!(b1 > 0.8 && b1 < 1.0);
        assert!(cubic_root(10.0, 1).is_err());
    }

    #[test]
    fn decay_fit() {
        let ts = geometric_grid(8.0, 128.0, 9);
        let v: Vec<f64> = ts.iter().map(|t| 3.0 / (t * t)).collect();
        assert!((fit_decay_exponent(&ts, &v).unwrap() + 2.0).abs() < 1e-9);
        let v: Vec<f64> = ts.iter().map(|t| 0.5 / t).collect();
        assert!((fit_decay_exponent(&ts, &v).unwrap() + 1.0).abs() < 1e-9);
        assert!(fit_decay_exponent(&ts[..3], &v[..3]).is_err());
    }

    #[test]
    fn torsion_q1_has_no_c1() {
        let tt = torsion_tail(1, 16.0).unwrap();
        assert_eq!(tt.c1, 0.0);
        assert_eq!(torsion_c1_list(1, 16.0).unwrap(), 0.0);
    }

    #[test]
    fn density_near_breakpoint() {
        assert!(matches!(
            w_density(1.0, 1e-5, TailSource::ClosedForm, false),
            Err(ClosedFormError::Ambiguous { .. })
        ));
        let Density::Value { value } = w_density(0.5, 1e-5, TailSource::ClosedForm, false).unwrap() else { panic!() };
        assert!((value - 0.875).abs() < 1e-8);
    }
}
