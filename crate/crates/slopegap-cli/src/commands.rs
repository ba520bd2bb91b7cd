use crate::report::{self, envelope, num, opt, Format, RunConfig, Table};
use crate::{ClosedFormArgs, CliError, Common, DifftestArgs, GapsArgs, McTailArgs, OrbitArgs, StartArgs};
use serde_json::{json, Value};
use slopegap::closed_form::{self as cf, ClosedFormError, Density, TailSource};
use slopegap::lattice::{self, AffineLattice, LatticeError, SurfaceMode};
use slopegap::measures::{self, MeasureError, MeasureSpec, SamplePoint};
use slopegap::oracle::{self, DiffRegion, Engine, VDomain};
use slopegap::transversal::{self, OmegaCoords, OmegaPoint, TransversalError, VLCoords, WPoint};
use std::path::Path;

type Result<T> = std::result::Result<T, CliError>;

/// Smallest sample count accepted by `mc-tail`.
pub const MIN_SAMPLES: usize = 1000;

const MAX_GRID: usize = 1_000_000;

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        CliError::State(e.to_string())
    }
}

impl From<TransversalError> for CliError {
    fn from(e: TransversalError) -> Self {
        CliError::State(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::InvalidSpec(_) | MeasureError::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::State(e.to_string()),
        }
    }
}

impl From<ClosedFormError> for CliError {
    fn from(e: ClosedFormError) -> Self {
        match e {
            ClosedFormError::Domain(_) | ClosedFormError::OutOfRegime(_) => CliError::Usage(e.to_string()),
            _ => CliError::State(e.to_string()),
        }
    }
}

fn io_err(path: Option<&Path>, e: std::io::Error) -> CliError {
    let what = path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    CliError::Usage(format!("cannot write {what}: {e}"))
}

pub fn parse_coords(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(CliError::Usage(format!("--{what} expects {n} comma-separated numbers, got '{s}'"))),
    }
}

/// `lo:hi:step` (inclusive), `x,y,z`, or a single value.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = |m: &str| CliError::Usage(format!("invalid grid '{s}': {m}"));
    let num = |x: &str| x.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, step] = parts[..] else { return Err(bad("expected lo:hi:step")) };
        let (lo, hi, step) = match (num(lo), num(hi), num(step)) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(bad("non-numeric bound")),
        };
        if !(step > 0.0) || hi < lo {
            return Err(bad("need step > 0 and hi >= lo"));
        }
        let k = ((hi - lo) / step + 1e-9).floor();
        if k >= MAX_GRID as f64 {
            return Err(bad("too many points"));
        }
        (0..=k as usize).map(|i| lo + step * i as f64).collect()
    } else {
        s.split(',').map(|x| num(x).ok_or_else(|| bad("non-numeric value"))).collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty"));
    }
    if grid.iter().any(|&t| t < 0.0) {
        return Err(bad("negative t"));
    }
    Ok(grid)
}

fn parse_engine(s: &str) -> Result<Engine> {
    s.parse().map_err(CliError::Usage)
}

fn load_surface(path: &Path) -> Result<AffineLattice> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read surface {}: {e}", path.display())))?;
    let l: AffineLattice = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("malformed surface {}: {e}", path.display())))?;
    Ok(AffineLattice::new(l.g, l.v)?)
}

fn start_label(s: &StartArgs) -> String {
    if let Some(x) = &s.omega {
        format!("omega:{x}")
    } else if let Some(x) = &s.vl {
        format!("vl:{x}")
    } else if let Some(x) = &s.sl {
        format!("sl:{x}")
    } else if let Some(x) = &s.sa {
        format!("sa:{x}")
    } else {
        format!("surface:{}", s.surface.as_ref().map(|p| p.display().to_string()).unwrap_or_default())
    }
}

enum Start {
    Point(SamplePoint),
    Surface(AffineLattice),
}

fn parse_start(s: &StartArgs) -> Result<Start> {
    if let Some(x) = &s.omega {
        let c = parse_coords(x, 4, "omega")?;
        let p = OmegaCoords::new(c[0], c[1], c[2], c[3])?;
        return Ok(Start::Point(SamplePoint::Omega { point: OmegaPoint::Generic(p) }));
    }
    if let Some(x) = &s.vl {
        let c = parse_coords(x, 3, "vl")?;
        let p = VLCoords::new(c[0], c[1], c[2])?;
        return Ok(Start::Point(SamplePoint::Omega { point: OmegaPoint::Vl(p) }));
    }
    if let Some(x) = &s.sl {
        let c = parse_coords(x, 4, "sl")?;
        return Ok(Start::Point(SamplePoint::W { point: WPoint::sl(c[0], c[1], c[2], c[3])? }));
    }
    if let Some(x) = &s.sa {
        let c = parse_coords(x, 4, "sa")?;
        return Ok(Start::Point(SamplePoint::W { point: WPoint::sa(c[0], c[1], c[2], c[3])? }));
    }
    match &s.surface {
        Some(p) => Ok(Start::Surface(load_surface(p)?)),
        None => Err(CliError::Usage("no start given".into())),
    }
}

fn point_surface(p: &SamplePoint) -> AffineLattice {
    match p {
        SamplePoint::Omega { point } => point.lattice(),
        SamplePoint::W { point } => point.surface(),
    }
}

fn config(command: &str, common: &Common, format: Format) -> RunConfig {
    RunConfig {
        command: command.into(),
        target: None,
        engine: None,
        mode: None,
        grid: None,
        n: None,
        seed: common.seed,
        workers: common.workers(),
        out: common.out.clone(),
        format,
        extra: Default::default(),
    }
}

fn mode_name(m: SurfaceMode) -> &'static str {
    match m {
        SurfaceMode::AffineOnly => "affine",
        SurfaceMode::DoubledSlit => "doubled",
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Formula => "formula",
        Engine::OracleAffineOnly => "oracle-affine",
        Engine::OracleDoubledSlit => "oracle-doubled",
    }
}

fn write_table(cfg: &RunConfig, table: &Table, results: &impl serde::Serialize) -> Result<()> {
    let out = cfg.out.as_deref();
    let text = match cfg.format {
        Format::Csv => table.to_csv(),
        Format::Json => report::pretty(&envelope(cfg, results, json!([]))),
    };
    report::emit(out, &text).map_err(|e| io_err(out, e))
}

fn write_plot(cfg: &RunConfig, plot: bool, header: &[&str], title: &str) -> Result<()> {
    if !plot {
        return Ok(());
    }
    let Some(out) = cfg.out.as_deref() else {
        return Err(CliError::Usage("--plot needs --out".into()));
    };
    if cfg.format != Format::Csv {
        return Err(CliError::Usage("--plot needs --format csv".into()));
    }
    let gp = out.with_extension("gp");
    std::fs::write(&gp, report::gnuplot_script(out, header, title)).map_err(|e| io_err(Some(&gp), e))
}

/// Largest number of doublings of the slope cap when collecting `--count` slopes.
const MAX_DOUBLINGS: u32 = 40;

pub fn gaps(a: &GapsArgs) -> Result<()> {
    let mode: SurfaceMode = a.mode.into();
    let surface = match parse_start(&a.start)? {
        Start::Point(p) => point_surface(&p),
        Start::Surface(l) => l,
    };
    let series = match (a.slope_max, a.count) {
        (Some(m), _) => {
            if !(m > 0.0) || !m.is_finite() {
                return Err(CliError::Usage(format!("--slope-max must be positive, got {m}")));
            }
            lattice::slopes_and_gaps(&lattice::enumerate_strip(&surface, mode, m)?)
        }
        (None, Some(n)) => {
            let mut cap = 1.0;
            let mut doublings = 0;
            loop {
                let s = lattice::slopes_and_gaps(&lattice::enumerate_strip(&surface, mode, cap)?);
                if s.count >= n {
                    break lattice::GapSeries::from_slopes(s.slopes[..n].to_vec());
                }
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(CliError::State(format!("only {} slopes below {cap}", s.count)));
                }
                cap *= 2.0;
            }
        }
        (None, None) => return Err(CliError::Usage("give --slope-max or --count".into())),
    };
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut cfg = config("gaps", &a.common, format);
    cfg.target = Some(start_label(&a.start));
    cfg.mode = Some(mode_name(mode).into());
    cfg.n = a.count;
    if let Some(m) = a.slope_max {
        cfg.extra.insert("slope_max".into(), json!(m));
    }
    let mut t = Table::new(&["index", "slope", "gap"]);
    for (i, s) in series.slopes.iter().enumerate() {
        t.push(vec![i.to_string(), num(*s), opt(series.gaps.get(i).copied())]);
    }
    write_table(&cfg, &t, &series)
}

fn orbit_row(step: usize, engine: Engine, r: f64, p: &SamplePoint) -> Vec<String> {
    let e = engine_name(engine).to_string();
    let blank = String::new;
    match p {
        SamplePoint::Omega { point: OmegaPoint::Generic(c) } => {
            vec![step.to_string(), e, num(r), "omega".into(), num(c.a), num(c.b), num(c.s), num(c.alpha), blank(), blank()]
        }
        SamplePoint::Omega { point: OmegaPoint::Vl(c) } => {
            vec![step.to_string(), e, num(r), "vl".into(), num(c.a), blank(), num(c.s), num(c.alpha), blank(), blank()]
        }
        SamplePoint::W { point: WPoint::Sl { delta, v } } => {
            vec![step.to_string(), e, num(r), "sl".into(), num(delta.a), num(delta.b), blank(), blank(), num(v.x), num(v.y)]
        }
        SamplePoint::W { point: WPoint::Sa { omega: c } } => {
            vec![step.to_string(), e, num(r), "sa".into(), num(c.a), num(c.b), num(c.s), num(c.alpha), blank(), blank()]
        }
    }
}

pub const ORBIT_HEADER: [&str; 10] = ["step", "engine", "return_time", "system", "a", "b", "s", "alpha", "v1", "v2"];

pub fn orbit(a: &OrbitArgs) -> Result<()> {
    let engine = parse_engine(&a.engine)?;
    let start = match parse_start(&a.start)? {
        Start::Point(p) => p,
        Start::Surface(l) => match engine {
            Engine::OracleDoubledSlit => SamplePoint::W { point: transversal::reconstruct_w(&l)? },
            _ => SamplePoint::Omega { point: transversal::recoordinatize_omega(&l)? },
        },
    };
    let mut t = Table::new(&ORBIT_HEADER);
    let mut p = start;
    let mut times = Vec::with_capacity(a.iters);
    for step in 0..a.iters {
        let (r, next) = measures::advance(&p, engine)
            .map_err(|e| CliError::State(format!("step {step}: {e}")))?;
        t.push(orbit_row(step, engine, r, &p));
        times.push(r);
        p = next;
    }
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut cfg = config("orbit", &a.common, format);
    cfg.target = Some(start_label(&a.start));
    cfg.engine = Some(engine_name(engine).into());
    cfg.n = Some(a.iters);
    write_table(&cfg, &t, &json!({ "start": start, "return_times": times }))
}

pub fn mc_tail(a: &McTailArgs) -> Result<()> {
    let measure: MeasureSpec = a.measure.parse()?;
    let engine = parse_engine(&a.engine)?;
    let grid = parse_grid(&a.t_grid)?;
    if a.samples < MIN_SAMPLES {
        return Err(CliError::Usage(format!("--samples must be at least {MIN_SAMPLES}")));
    }
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut cfg = config("mc-tail", &a.common, format);
    cfg.target = Some(measure.label());
    cfg.engine = Some(engine_name(engine).into());
    cfg.grid = Some(grid.clone());
    cfg.n = Some(a.samples);
    let est = measures::mc_tail(&measure, engine, &grid, a.samples, a.common.seed, cfg.workers)?;
    let header = ["t", "survival", "ci_halfwidth"];
    let mut t = Table::new(&header);
    for ((&x, &s), &c) in grid.iter().zip(&est.survival).zip(&est.ci_halfwidth) {
        t.push(vec![num(x), num(s), num(c)]);
    }
    write_table(&cfg, &t, &est)?;
    if let (Format::Csv, Some(out)) = (format, cfg.out.as_deref()) {
        let side = report::sidecar_path(out);
        let text = report::pretty(&envelope(&cfg, &est, json!([])));
        std::fs::write(&side, text).map_err(|e| io_err(Some(&side), e))?;
    }
    write_plot(&cfg, a.plot, &header, &format!("P(R > t), {}", measure.label()))
}

fn parse_source(s: &str) -> Result<TailSource> {
    match s {
        "closed-form" => Ok(TailSource::ClosedForm),
        "quadrature" => Ok(TailSource::Quadrature),
        _ => Err(CliError::Usage(format!("unknown source '{s}' (closed-form, quadrature)"))),
    }
}

fn require_grid(a: &ClosedFormArgs) -> Result<Vec<f64>> {
    match &a.t_grid {
        Some(g) => parse_grid(g),
        None => Err(CliError::Usage(format!("--t-grid is required for component '{}'", a.component))),
    }
}

/// Grid plus every density breakpoint strictly inside its range.
fn with_breakpoints(grid: &[f64]) -> Vec<f64> {
    let (lo, hi) = (grid.iter().cloned().fold(f64::INFINITY, f64::min), grid.iter().cloned().fold(0.0, f64::max));
    let mut g = grid.to_vec();
    for bp in cf::density_breakpoints() {
        if bp > lo && bp < hi && !g.iter().any(|&t| (t - bp).abs() < 1e-12) {
            g.push(bp);
        }
    }
    g.sort_by(f64::total_cmp);
    g
}

pub fn closed_form(a: &ClosedFormArgs) -> Result<()> {
    let source = parse_source(&a.source)?;
    let scale = if a.normalized { 1.0 / cf::g_zero() } else { 1.0 };
    let format = a.common.format.unwrap_or(Format::Csv);
    let mut cfg = config("closed-form", &a.common, format);
    cfg.target = Some(a.component.clone());
    cfg.extra.insert("source".into(), json!(a.source));
    cfg.extra.insert("normalized".into(), json!(a.normalized));
    let (table, results): (Table, Value) = match a.component.as_str() {
        "tail" | "cdf" => {
            let grid = require_grid(a)?;
            let cdf = a.component == "cdf";
            let mut t = Table::new(if cdf { &["t", "cdf"] } else { &["t", "tail", "normalized"] });
            let mut rows = Vec::new();
            for &x in &grid {
                let g = cf::w_tail(x, source)?;
                let n = g / cf::g_zero();
                if cdf {
                    t.push(vec![num(x), num(1.0 - n)]);
                } else {
                    t.push(vec![num(x), num(g * scale), num(n)]);
                }
                rows.push(json!({ "t": x, "tail": g, "normalized": n }));
            }
            cfg.grid = Some(grid);
            (t, json!(rows))
        }
        "density" => {
            let grid = with_breakpoints(&require_grid(a)?);
            if !(a.h > 0.0) {
                return Err(CliError::Usage("--h must be positive".into()));
            }
            cfg.extra.insert("h".into(), json!(a.h));
            let mut t = Table::new(&["t", "density", "left", "right"]);
            let mut rows = Vec::new();
            for &x in &grid {
                let d = if x == 0.0 {
                    let right = -(cf::w_tail(a.h, source)? - cf::w_tail(0.0, source)?) / a.h;
                    Density::OneSided { left: f64::NAN, right }
                } else {
                    cf::w_density(x, a.h, source, true)?
                };
                match d {
                    Density::Value { value } => t.push(vec![num(x), num(value * scale), String::new(), String::new()]),
                    Density::OneSided { left, right } => {
                        let l = if left.is_nan() { String::new() } else { num(left * scale) };
                        t.push(vec![num(x), String::new(), l, num(right * scale)])
                    }
                }
                rows.push(json!({ "t": x, "density": d }));
            }
            cfg.grid = Some(grid);
            (t, json!(rows))
        }
        "bounds" => {
            let grid = require_grid(a)?;
            let mut t = Table::new(&["t", "lower", "upper"]);
            let mut rows = Vec::new();
            for &x in &grid {
                let b = cf::omega_tail_bounds(x)?;
                t.push(vec![num(x), num(b.lower), num(b.upper)]);
                rows.push(json!({ "t": x, "bounds": b }));
            }
            cfg.grid = Some(grid);
            (t, json!(rows))
        }
        "mismatch" => {
            let m = cf::piece_mismatch(a.points)?;
            let mut t = Table::new(&["piece", "lo", "hi", "max_abs_diff", "at"]);
            for p in &m {
                t.push(vec![p.piece.to_string(), num(p.lo), num(p.hi), num(p.max_abs_diff), num(p.at)]);
            }
            cfg.n = Some(a.points);
            (t, json!(m))
        }
        "continuity" => {
            let c = cf::continuity_report()?;
            let mut t = Table::new(&["at", "left", "right", "jump"]);
            for p in &c {
                t.push(vec![num(p.at), num(p.left), num(p.right), num(p.jump())]);
            }
            (t, json!(c))
        }
        other => match other.strip_prefix("torsion:").map(str::parse::<u32>) {
            Some(Ok(q)) => {
                let grid = require_grid(a)?;
                let mut t = Table::new(&["t", "c1", "c2", "total"]);
                let mut rows = Vec::new();
                for &x in &grid {
                    let r = cf::torsion_tail(q, x)?;
                    t.push(vec![num(x), num(r.c1), num(r.c2), num(r.total)]);
                    rows.push(json!({ "t": x, "torsion": r }));
                }
                cfg.grid = Some(grid);
                (t, json!(rows))
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown component '{other}' (tail, cdf, density, bounds, torsion:q, mismatch, continuity)"
                )))
            }
        },
    };
    write_table(&cfg, &table, &results)?;
    write_plot(&cfg, a.plot, &table.header, &a.component)
}

/// Regions whose formulas are expected to hold; counterexamples there are regressions.
pub fn is_verified(region: DiffRegion) -> bool {
    matches!(region, DiffRegion::DeltaR | DiffRegion::OmegaR)
}

pub fn difftest(a: &DifftestArgs) -> Result<()> {
    let name = a
        .region
        .as_deref()
        .or(a.region_flag.as_deref())
        .ok_or_else(|| CliError::Usage("give a region (DeltaR, OmegaR, WslRho, WReturn)".into()))?;
    let region: DiffRegion = name.parse().map_err(CliError::Usage)?;
    let domain = match a.v_domain.as_str() {
        "parallelogram" => VDomain::Parallelogram,
        "rect" => VDomain::Rect,
        d => return Err(CliError::Usage(format!("unknown v-domain '{d}' (parallelogram, rect)"))),
    };
    let mode: SurfaceMode = a.mode.into();
    let format = a.common.format.unwrap_or(Format::Json);
    let mut cfg = config("difftest", &a.common, format);
    cfg.target = Some(name.into());
    cfg.mode = Some(mode_name(mode).into());
    cfg.n = Some(a.samples);
    cfg.extra.insert("v_domain".into(), json!(a.v_domain));
    let rep = oracle::diff_test(region, a.samples, a.common.seed, mode, cfg.workers, domain);
    let out = cfg.out.as_deref();
    let text = match format {
        Format::Json => {
            let ce = serde_json::to_value(&rep.counterexamples).expect("counterexamples serialize");
            report::pretty(&envelope(&cfg, &rep, ce))
        }
        Format::Csv => {
            let mut t = Table::new(&["kind", "stratum", "anchor", "coords", "formula", "oracle", "rel_err"]);
            for c in &rep.counterexamples {
                let coords: Vec<String> = c.coords.iter().map(|x| num(*x)).collect();
                t.push(vec![
                    c.kind.clone(),
                    c.stratum.clone(),
                    c.anchor.to_string(),
                    coords.join(" "),
                    num(c.formula),
                    num(c.oracle),
                    num(c.rel_err),
                ]);
            }
            t.to_csv()
        }
    };
    report::emit(out, &text).map_err(|e| io_err(out, e))?;
    eprintln!(
        "{name}: {} inputs ({} anchors), {} counterexamples, {} failures, max rel err {:.3e}",
        rep.samples, rep.anchors, rep.counterexample_count, rep.failures, rep.max_rel_err
    );
    if is_verified(region) && rep.counterexample_count > 0 {
        return Err(CliError::Regression(format!(
            "{} counterexamples in verified region {name}",
            rep.counterexample_count
        )));
    }
    Ok(())
}
