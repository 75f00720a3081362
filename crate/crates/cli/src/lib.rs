//! Command-line front end: reads map specs, runs an analysis, writes a JSON report.
//!
//! Exit codes: 0 success, 2 invalid input, 1 internal failure (including failed checks).

mod check;
mod commands;
mod input;

use std::ffi::OsString;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use prunedjulia::external::ExternalError;
use prunedjulia::invariants::InvariantError;
use prunedjulia::koenigs::KoenigsError;
use prunedjulia::orbits::{OrbitError, DEFAULT_HORIZON};
use prunedjulia::prunedtree::PruneError;
use prunedjulia::tolerances::{ToleranceError, Tolerances};
use prunedjulia::PolyMapError;
use thiserror::Error;

pub use check::{CheckLine, Outcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
    #[error("{0} invariant(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) | CliError::CheckFailed(_) => 1,
        }
    }
}

impl From<PolyMapError> for CliError {
    fn from(e: PolyMapError) -> Self {
        match e {
            PolyMapError::OverflowEscape(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::Unresolved(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<InvariantError> for CliError {
    fn from(e: InvariantError) -> Self {
        match e {
            InvariantError::Koenigs(_) | InvariantError::SuperAttractingBasin(_) => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<KoenigsError> for CliError {
    fn from(e: KoenigsError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::BranchAmbiguity(_) | PruneError::ArcLimit => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ExternalError> for CliError {
    fn from(e: ExternalError) -> Self {
        match e {
            ExternalError::NoConvergence => CliError::Internal(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ToleranceError> for CliError {
    fn from(e: ToleranceError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Library tolerances plus the few that only the front end uses.
#[derive(Debug, Clone)]
pub struct CliTolerances {
    pub core: Tolerances,
    /// Successive-iterate change ending the semi-conjugacy iteration.
    pub semiconj: f64,
    /// Floor of the relative error between analytic and finite-difference dΨ.
    pub fd_floor: f64,
}

impl Default for CliTolerances {
    fn default() -> Self {
        CliTolerances {
            core: Tolerances::default(),
            semiconj: 1e-10,
            fd_floor: 1e-3,
        }
    }
}

impl CliTolerances {
    fn set(&mut self, name: &str, value: f64) -> Result<(), CliError> {
        match name {
            "semiconj" | "fd_floor" if !(value.is_finite() && value > 0.0) => Err(CliError::Validation(format!(
                "tolerance `{name}` must be positive and finite, got {value}"
            ))),
            "semiconj" => {
                self.semiconj = value;
                Ok(())
            }
            "fd_floor" => {
                self.fd_floor = value;
                Ok(())
            }
            _ => Ok(self.core.set(name, value)?),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "prunedjulia",
    version,
    about = "Pruned Julia sets, external circle maps and conjugacy invariants",
    after_help = "Tolerances: --tol.<name> <value> for boundary, derivative, periodic, parabolic, orbit_hit, \
                  basin, koenigs, barycentric, semiconj, fd_floor.\nPRUNE_SEED seeds random sampling (default 0)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Io {
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct Source {
    /// Map spec (JSON).
    #[arg(long)]
    map: Option<PathBuf>,
    #[command(flatten)]
    io: Io,
}

#[derive(Debug, Args)]
struct OrbitArgs {
    #[command(flatten)]
    src: Source,
    /// Iteration horizon for critical orbits.
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: usize,
    /// Longest period searched for periodic orbits.
    #[arg(long, default_value_t = 6)]
    max_period: usize,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[command(flatten)]
    src: Source,
    /// Pruning intervals "lo,hi;lo,hi" (overrides the map file).
    #[arg(long = "J", allow_hyphen_values = true)]
    j: Option<String>,
    /// Tree depth (overrides the map file).
    #[arg(long)]
    depth: Option<usize>,
    /// Write the tree (or lift graph) as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    orbit: OrbitArgs,
    /// Pruning intervals "lo,hi;lo,hi" (overrides the map file).
    #[arg(long = "J", allow_hyphen_values = true)]
    j: Option<String>,
    /// Tree depth (overrides the map file).
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical points, periodic orbits and the critical-orbit classification.
    Classify(OrbitArgs),
    /// Ψ_H and Ψ_T at the map.
    Psi(OrbitArgs),
    /// Analytic dΨ_H along v = (x²−1)·q against central finite differences.
    Dpsi {
        #[command(flatten)]
        orbit: OrbitArgs,
        /// Coefficients of q, ascending.
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        field: String,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
    },
    /// Grow the pruned tree K_n and check its invariants.
    Prune(TreeArgs),
    /// Write the pruned tree (interval map) or lift graph (circle map) as SVG.
    Render(TreeArgs),
    /// Validate a circle map and summarize its lift.
    Circle {
        #[command(flatten)]
        src: Source,
        /// Write the lift graph as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Markov structure from removed arcs Ŷ and basin arcs B̂₀.
    Markov {
        #[command(flatten)]
        src: Source,
        /// Removed arcs "lo,hi;lo,hi" (overrides the map file).
        #[arg(long, allow_hyphen_values = true)]
        yhat: Option<String>,
        /// Basin arcs "lo,hi;lo,hi" (overrides the map file).
        #[arg(long, allow_hyphen_values = true)]
        b0: Option<String>,
        /// Depth N of Λ'_N (overrides the map file).
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Semi-conjugacy to the linear model and the pruning set Q.
    Semiconj {
        #[command(flatten)]
        src: Source,
        /// Half-width of the windows filled around each jump.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Douady–Earle extension of t ↦ t + Σ a·sin(2πkt) (+ rotation).
    Barycentric {
        #[command(flatten)]
        io: Io,
        /// Sine terms of h, e.g. "0.05*sin(1)".
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        h: String,
        /// Rotation added to h, in turns.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        rotate: f64,
        /// Points "re,im;re,im".
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        z: String,
        /// Quadrature points on the circle.
        #[arg(long, default_value_t = prunedjulia::external::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Run the invariant suite on a map spec.
    Check(CheckArgs),
}

impl Command {
    fn io(&self) -> &Io {
        match self {
            Command::Classify(o) | Command::Psi(o) | Command::Dpsi { orbit: o, .. } => &o.src.io,
            Command::Circle { src, .. } | Command::Markov { src, .. } | Command::Semiconj { src, .. } => &src.io,
            Command::Prune(t) | Command::Render(t) => &t.src.io,
            Command::Barycentric { io, .. } => io,
            Command::Check(c) => &c.orbit.src.io,
        }
    }
}

/// Pulls `--tol.<name> v` / `--tol.<name>=v` out of argv, since clap cannot declare them.
fn split_tolerances(args: Vec<OsString>) -> Result<(Vec<OsString>, CliTolerances), CliError> {
    let mut tol = CliTolerances::default();
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(s) = arg.to_str().and_then(|s| s.strip_prefix("--tol.")) else {
            rest.push(arg);
            continue;
        };
        let (name, value) = match s.split_once('=') {
            Some((n, v)) => (n.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .and_then(|v| v.into_string().ok())
                    .ok_or_else(|| CliError::Validation(format!("--tol.{s} needs a value")))?;
                (s.to_string(), v)
            }
        };
        let value = value
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("--tol.{name}: not a number: {value:?}")))?;
        tol.set(&name, value)?;
    }
    Ok((rest, tol))
}

pub(crate) fn seed() -> Result<u64, CliError> {
    match std::env::var("PRUNE_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("PRUNE_SEED must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(0),
    }
}

fn write_report(io: &Io, report: &serde_json::Value, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    match &io.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Internal(e.to_string())),
    }
}

struct Output {
    report: serde_json::Value,
    lines: Vec<CheckLine>,
}

fn compute(cmd: &Command, tol: &CliTolerances) -> Result<Output, CliError> {
    let (name, body) = match cmd {
        Command::Classify(o) => (
            "classify",
            commands::classify(o.src.map.as_deref(), o.horizon, o.max_period, tol)?,
        ),
        Command::Psi(o) => (
            "psi",
            commands::psi(o.src.map.as_deref(), o.horizon, o.max_period, tol)?,
        ),
        Command::Dpsi { orbit: o, field, step } => (
            "dpsi",
            commands::dpsi(o.src.map.as_deref(), o.horizon, o.max_period, field, *step, tol)?,
        ),
        Command::Prune(t) => (
            "prune",
            commands::prune(t.src.map.as_deref(), t.j.as_deref(), t.depth, t.svg.as_deref(), tol)?,
        ),
        Command::Render(t) => (
            "render",
            commands::render(t.src.map.as_deref(), t.j.as_deref(), t.depth, t.svg.as_deref(), tol)?,
        ),
        Command::Circle { src, svg } => ("circle", commands::circle(src.map.as_deref(), svg.as_deref())?),
        Command::Markov { src, yhat, b0, depth } => (
            "markov",
            commands::markov(src.map.as_deref(), yhat.as_deref(), b0.as_deref(), *depth)?,
        ),
        Command::Semiconj { src, radius } => ("semiconj", commands::semiconj(src.map.as_deref(), *radius, tol)?),
        Command::Barycentric {
            h, rotate, z, samples, ..
        } => ("barycentric", commands::barycentric(h, *rotate, z, *samples)?),
        Command::Check(c) => {
            let o = &c.orbit;
            let (body, lines) = check::run(
                o.src.map.as_deref(),
                c.j.as_deref(),
                c.depth,
                o.horizon,
                o.max_period,
                tol,
            )?;
            return Ok(Output {
                report: envelope("check", body),
                lines,
            });
        }
    };
    Ok(Output {
        report: envelope(name, body),
        lines: Vec::new(),
    })
}

/// The check lines go to stderr so that stdout carries only the report.
fn emit(io: &Io, out: &Output, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    for line in &out.lines {
        let _ = writeln!(stderr, "{line}");
    }
    write_report(io, &out.report, stdout)?;
    let failed = out.lines.iter().filter(|l| l.outcome == Outcome::Fail).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed))
    }
}

fn envelope(command: &str, body: serde_json::Value) -> serde_json::Value {
    let mut report = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
    });
    if let (Some(r), serde_json::Value::Object(b)) = (report.as_object_mut(), body) {
        r.extend(b);
    }
    report
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let (args, tol) = match split_tolerances(args) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    2
                }
            };
        }
    };
    let threads = cli.command.io().threads;
    if threads == 0 {
        let _ = writeln!(stderr, "error: --threads must be at least 1");
        return 2;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: thread pool: {e}");
            return 1;
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| pool.install(|| compute(&cli.command, &tol))));
    let result = result.map(|r| r.and_then(|out| emit(cli.command.io(), &out, stdout, stderr)));
    match result {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
        Err(_) => {
            let _ = writeln!(stderr, "error: internal failure");
            1
        }
    }
}
