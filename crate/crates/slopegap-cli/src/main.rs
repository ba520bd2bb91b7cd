//! `slopegap`: batch driver for strip gaps, return-map orbits, Monte Carlo tails,
//! closed-form tails and formula-versus-oracle differential tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use report::Format;
use slopegap::lattice::SurfaceMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "slopegap", version, about = "Slope gaps of translation surfaces via horocycle return maps")]
#[command(after_help = "Any flag may also be given as `key = value` in a file passed with --config; flags win.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slopes and consecutive gaps of holonomy vectors in the vertical strip.
    #[command(args_override_self = true)]
    Gaps(GapsArgs),
    /// Iterate a return map and record return times and coordinates.
    #[command(args_override_self = true)]
    Orbit(OrbitArgs),
    /// Monte Carlo survival function of the return time under a measure.
    #[command(name = "mc-tail", args_override_self = true)]
    McTail(McTailArgs),
    /// Closed-form and quadrature tails, densities, bounds and torsion tails.
    #[command(name = "closed-form", args_override_self = true)]
    ClosedForm(ClosedFormArgs),
    /// Compare return-time formulas against the brute-force oracle.
    #[command(args_override_self = true)]
    Difftest(DifftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on this value.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    pub fn workers(&self) -> usize {
        self.workers
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Affine,
    Doubled,
}

impl From<Mode> for SurfaceMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Affine => SurfaceMode::AffineOnly,
            Mode::Doubled => SurfaceMode::DoubledSlit,
        }
    }
}

/// Exactly one way of naming a surface or transversal point.
#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct StartArgs {
    /// Omega coordinates `a,b,s,alpha`.
    #[arg(long)]
    pub omega: Option<String>,
    /// Vertical-lattice coordinates `a,s,alpha`.
    #[arg(long)]
    pub vl: Option<String>,
    /// Short-lattice W coordinates `a,b,v1,v2`.
    #[arg(long)]
    pub sl: Option<String>,
    /// Short-affine W coordinates `a,b,s,alpha`.
    #[arg(long)]
    pub sa: Option<String>,
    /// JSON file `{"g": [[g11, g12], [g21, g22]], "v": {"x": .., "y": ..}}`.
    #[arg(long)]
    pub surface: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GapsArgs {
    #[command(flatten)]
    pub start: StartArgs,
    #[arg(long, value_enum, default_value_t = Mode::Affine)]
    pub mode: Mode,
    /// Largest slope kept.
    #[arg(long, conflicts_with = "count")]
    pub slope_max: Option<f64>,
    /// Number of smallest slopes kept.
    #[arg(long)]
    pub count: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub start: StartArgs,
    /// formula, oracle-affine or oracle-doubled.
    #[arg(long, default_value = "formula")]
    pub engine: String,
    #[arg(long, default_value_t = 10)]
    pub iters: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct McTailArgs {
    /// haar-omega, haar-w, torsion:q, periodic:a,alpha or periodic-point.
    #[arg(long)]
    pub measure: String,
    #[arg(long, default_value = "formula")]
    pub engine: String,
    /// `lo:hi:step`, a comma list, or a single value.
    #[arg(long)]
    pub t_grid: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub plot: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct ClosedFormArgs {
    /// `lo:hi:step`, a comma list, or a single value.
    #[arg(long)]
    pub t_grid: Option<String>,
    /// tail, cdf, density, bounds, torsion:q, mismatch or continuity.
    #[arg(long, default_value = "tail")]
    pub component: String,
    /// closed-form (pieces on [0, 4]) or quadrature.
    #[arg(long, default_value = "closed-form")]
    pub source: String,
    /// Divide tails and densities by G(0).
    #[arg(long)]
    pub normalized: bool,
    /// Finite-difference step for densities.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Interior points per piece for `mismatch`.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long)]
    pub plot: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct DifftestArgs {
    /// DeltaR, OmegaR, WslRho or WReturn.
    #[arg(long = "region")]
    pub region_flag: Option<String>,
    #[arg(conflicts_with = "region_flag")]
    pub region: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, value_enum, default_value_t = Mode::Affine)]
    pub mode: Mode,
    /// parallelogram or rect: sampling domain of `v` for WslRho.
    #[arg(long, default_value = "parallelogram")]
    pub v_domain: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs, malformed values.
    Usage(String),
    /// Inputs that parse but describe no valid state, or a failed computation.
    State(String),
    /// Counterexamples in a region whose formula is expected to hold.
    Regression(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::State(_) => 3,
            CliError::Regression(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::State(m) | CliError::Regression(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let res = match cli.command {
        Command::Gaps(a) => commands::gaps(&a),
        Command::Orbit(a) => commands::orbit(&a),
        Command::McTail(a) => commands::mc_tail(&a),
        Command::ClosedForm(a) => commands::closed_form(&a),
        Command::Difftest(a) => commands::difftest(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
