//! Command-line front end: builds the shifted example and runs the batch
//! experiments, writing JSON reports.
//!
//! Exit codes: 0 success, 1 usage error, 2 model or guard failure,
//! 3 invariant breach.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use nchull::exec::Exec;
use nchull::extreme::escape_experiment;
use nchull::hull::converge_experiment;
use nchull::model::{build_shifted_example, default_example, CompactTupleModel, ExampleOptions, Sequence};
use nchull::pencil::{affine_experiment, ucp_experiment, AffineOptions};
use nchull::tol::Tolerances;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Model(#[from] nchull::error::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("invariant breach: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Model(_) | CliError::Io { .. } => EXIT_MODEL,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "nchull",
    version,
    about = "Noncommutative convex hulls of compact self-adjoint tuples"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the shifted diagonal/weighted-shift example and write it as JSON.
    BuildExample(BuildArgs),
    /// Sample hull points and try to refute absolute extremeness.
    Escape(EscapeArgs),
    /// Truncation sweeps of hull points against the tail bound.
    Converge(ConvergeArgs),
    /// Matrix-affine identity of random pencils and pencil reconstruction.
    Affine(AffineArgs),
    /// Block decomposition of pencils evaluated on padded corners.
    Ucp(UcpArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model JSON written by build-example (default: the built-in example).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Override a tolerance, e.g. --tol probe=1e-7 (repeatable).
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the timestamp header line.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Run rows on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Diagonal sequence: `geometric:FIRST,RATIO` or an explicit list.
    #[arg(long, default_value = "geometric:1,-0.5", allow_hyphen_values = true)]
    pub lambda: String,
    /// Shift weights: `geometric:FIRST,RATIO` or an explicit list.
    #[arg(long, default_value = "geometric:0.5,0.5", allow_hyphen_values = true)]
    pub w: String,
    /// Largest truncation level (capped at the length of explicit lists).
    #[arg(long, default_value_t = 16)]
    pub max_level: usize,
    /// Number of scan angles to try.
    #[arg(long, default_value_t = 64)]
    pub scan_steps: usize,
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EscapeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "3..11:2", value_parser = parse_levels)]
    pub levels: Levels,
    #[arg(long, default_value = "1,2,3,4,5", value_parser = parse_seeds)]
    pub seeds: Seeds,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Levels to sweep; the largest is the reference level.
    #[arg(long, default_value = "2..12", value_parser = parse_levels)]
    pub levels: Levels,
    #[arg(long, default_value = "1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20", value_parser = parse_seeds)]
    pub seeds: Seeds,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
}

#[derive(Debug, Args)]
pub struct AffineArgs {
    #[command(flatten)]
    pub common: Common,
    /// Level of the hull points combined in each partition.
    #[arg(long, default_value_t = 4)]
    pub level: usize,
    /// Pencil size.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 20)]
    pub partitions: usize,
    #[arg(long, default_value = "1..100", value_parser = parse_seeds)]
    pub seeds: Seeds,
    /// Test hook: replace the pencil by the non-affine map Y -> Y_1^2.
    #[arg(long, hide = true)]
    pub inject_nonaffine: bool,
}

#[derive(Debug, Args)]
pub struct UcpArgs {
    #[command(flatten)]
    pub common: Common,
    /// Candidate reference levels L.
    #[arg(long, default_value = "4..12", value_parser = parse_levels)]
    pub levels: Levels,
    /// Largest pencil size.
    #[arg(long, default_value_t = 3)]
    pub d_max: usize,
    #[arg(long, default_value = "1..100", value_parser = parse_seeds)]
    pub seeds: Seeds,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Levels(pub Vec<usize>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

/// `a..b` or `a..b:step` (both ends inclusive), or a single level.
pub fn parse_levels(s: &str) -> Result<Levels, String> {
    let s = s.trim();
    let Some((a, rest)) = s.split_once("..") else {
        let l: usize = s.parse().map_err(|_| format!("invalid level `{s}`"))?;
        return if l == 0 {
            Err("levels start at 1".into())
        } else {
            Ok(Levels(vec![l]))
        };
    };
    let (b, step) = match rest.split_once(':') {
        Some((b, step)) => (b, step.parse::<usize>().map_err(|_| format!("invalid step `{step}`"))?),
        None => (rest, 1),
    };
    let a: usize = a.parse().map_err(|_| format!("invalid range start `{a}`"))?;
    let b: usize = b.parse().map_err(|_| format!("invalid range end `{b}`"))?;
    if a == 0 || step == 0 || a > b {
        return Err(format!("range `{s}` must satisfy 1 <= a <= b and step >= 1"));
    }
    Ok(Levels((a..=b).step_by(step).collect()))
}

/// Comma-separated seeds or inclusive ranges `a..b`; empty means none.
pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.parse().map_err(|_| format!("invalid seed `{a}`"))?;
            let b: u64 = b.parse().map_err(|_| format!("invalid seed `{b}`"))?;
            if a > b {
                return Err(format!("empty seed range `{part}`"));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| format!("invalid seed `{part}`"))?);
        }
    }
    Ok(Seeds(seeds))
}

pub fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let mut probe = Tolerances::default();
    probe.apply_assignment(s).map_err(|e| e.to_string())?;
    let (name, value) = s.split_once('=').expect("checked by apply_assignment");
    Ok((
        name.trim().to_string(),
        value.trim().parse().expect("checked by apply_assignment"),
    ))
}

pub fn parse_sequence(s: &str) -> Result<Sequence, String> {
    let numbers = |body: &str| -> Result<Vec<f64>, String> {
        body.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("invalid number `{x}`")))
            .collect()
    };
    if let Some(body) = s.strip_prefix("geometric:") {
        match numbers(body)?.as_slice() {
            [first, ratio] => Ok(Sequence::geometric(*first, *ratio)),
            _ => Err(format!("`{s}`: geometric needs FIRST,RATIO")),
        }
    } else {
        Ok(Sequence::Explicit(numbers(s)?))
    }
}

fn tolerances(overrides: &[(String, f64)]) -> CliResult<Tolerances> {
    let mut tol = Tolerances::default();
    for (name, value) in overrides {
        tol.set(name, *value).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(tol)
}

pub fn load_model(path: Option<&Path>, tol: &Tolerances) -> CliResult<CompactTupleModel> {
    let Some(path) = path else {
        return Ok(default_example(&ExampleOptions::default())?.model);
    };
    let io_err = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let model: CompactTupleModel = serde_json::from_str(&text).map_err(nchull::error::Error::from)?;
    if let Some(w) = model.witness() {
        w.verify(&model, tol.witness)?;
    }
    Ok(model)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

#[derive(Serialize)]
struct Header<'a> {
    command: &'a str,
    timestamp: u64,
}

#[derive(Serialize)]
struct SummaryLine<'a, S> {
    summary: &'a S,
}

fn write_line<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> nchull::error::Result<()> {
    nchull::json::to_writer(&mut *out, value)?;
    out.write_all(b"\n").map_err(|e| serde_json::Error::io(e).into())
}

/// JSON-lines report: optional header, one line per row, then the summary.
fn write_report<R: Serialize, S: Serialize>(common: &Common, command: &str, rows: &[R], summary: &S) -> CliResult<()> {
    let mut out = open_output(common.out.as_deref())?;
    if !common.no_timestamp {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        write_line(&mut out, &Header { command, timestamp })?;
    }
    for row in rows {
        write_line(&mut out, row)?;
    }
    write_line(&mut out, &SummaryLine { summary })?;
    out.flush().map_err(|source| CliError::Io {
        path: common
            .out
            .as_ref()
            .map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    })
}

fn exec(common: &Common) -> Exec {
    if common.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn cmd_build_example(args: &BuildArgs, diag: &mut dyn Write) -> CliResult<()> {
    let tol = tolerances(&args.tol)?;
    let lambda = parse_sequence(&args.lambda).map_err(CliError::Usage)?;
    let w = parse_sequence(&args.w).map_err(CliError::Usage)?;
    let mut max_level = args.max_level;
    for seq in [&lambda, &w] {
        if let Sequence::Explicit(v) = seq {
            max_level = max_level.min(v.len());
        }
    }
    let opts = ExampleOptions {
        max_level,
        scan_steps: args.scan_steps,
        dist_tol: tol.dist,
    };
    let ex = build_shifted_example(lambda, w, &opts)?;
    let residual = ex.witness.verify(&ex.model, tol.witness)?;

    let mut out = open_output(args.out.as_deref())?;
    write_line(&mut out, &ex.model)?;
    out.flush().map_err(|source| CliError::Io {
        path: args.out.as_ref().map_or("<stdout>".into(), |p| p.display().to_string()),
        source,
    })?;

    let rejected = ex.scan.iter().filter(|s| !s.accepted).count();
    let _ = writeln!(
        diag,
        "t = {:.6} (pi/{:.4}) after {rejected} rejected angles; alpha1 = {:.16}, alpha2 = {:.16}; witness residual {:.3e}",
        ex.t,
        std::f64::consts::PI / ex.t,
        ex.alpha1,
        ex.alpha2,
        residual
    );
    Ok(())
}

fn cmd_escape(args: &EscapeArgs, diag: &mut dyn Write) -> CliResult<()> {
    let tol = tolerances(&args.common.tol)?;
    let model = load_model(args.common.model.as_deref(), &tol)?;
    let report = escape_experiment(
        &model,
        args.n,
        &args.levels.0,
        args.m,
        &args.seeds.0,
        &tol,
        exec(&args.common),
    )?;
    write_report(&args.common, "escape", &report.rows, &report.summary)?;
    let s = &report.summary;
    let _ = writeln!(
        diag,
        "escape: {} rows, {} refuted, {} inconclusive",
        s.rows, s.refuted, s.inconclusive
    );
    if !s.contract_holds {
        return Err(CliError::Invariant(s.breaches.join("; ")));
    }
    Ok(())
}

fn cmd_converge(args: &ConvergeArgs, diag: &mut dyn Write) -> CliResult<()> {
    let tol = tolerances(&args.common.tol)?;
    let model = load_model(args.common.model.as_deref(), &tol)?;
    let report = converge_experiment(
        &model,
        args.n,
        args.m,
        &args.levels.0,
        &args.seeds.0,
        &tol,
        exec(&args.common),
    )?;
    write_report(&args.common, "converge", &report.rows, &report.summary)?;
    let s = &report.summary;
    let _ = writeln!(
        diag,
        "converge: {} rows, {} within 2x tail bound, {} monotone",
        s.rows, s.within_bound, s.monotone
    );
    if !s.passed {
        return Err(CliError::Invariant(format!(
            "{} of {} sweeps exceed the bound, {} are not monotone",
            s.rows - s.within_bound,
            s.rows,
            s.rows - s.monotone
        )));
    }
    Ok(())
}

fn cmd_affine(args: &AffineArgs, diag: &mut dyn Write) -> CliResult<()> {
    let tol = tolerances(&args.common.tol)?;
    let model = load_model(args.common.model.as_deref(), &tol)?;
    let opts = AffineOptions {
        level: args.level,
        d: args.d,
        partitions: args.partitions,
        inject_nonaffine: args.inject_nonaffine,
        ..AffineOptions::default()
    };
    let report = affine_experiment(&model, &opts, &args.seeds.0, &tol, exec(&args.common))?;
    write_report(&args.common, "affine", &report.rows, &report.summary)?;
    let s = &report.summary;
    let _ = writeln!(
        diag,
        "affine: {} rows, max residual {:.3e}, max reconstruction error {:.3e}, control detected {}/{}",
        s.rows, s.max_residual, s.max_reconstruction_error, s.control_detected, s.rows
    );
    if !s.passed {
        return Err(CliError::Invariant("matrix-affine sweep failed".into()));
    }
    Ok(())
}

fn cmd_ucp(args: &UcpArgs, diag: &mut dyn Write) -> CliResult<()> {
    let tol = tolerances(&args.common.tol)?;
    let model = load_model(args.common.model.as_deref(), &tol)?;
    let report = ucp_experiment(
        &model,
        &args.levels.0,
        args.d_max,
        &args.seeds.0,
        &tol,
        exec(&args.common),
    )?;
    write_report(&args.common, "ucp", &report.rows, &report.summary)?;
    let s = &report.summary;
    let _ = writeln!(diag, "ucp: {} rows, max residual {:.3e}", s.rows, s.max_residual);
    if !s.passed {
        return Err(CliError::Invariant(format!(
            "decomposition residual {:.3e}",
            s.max_residual
        )));
    }
    Ok(())
}

pub fn execute(cli: &Cli, diag: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::BuildExample(a) => cmd_build_example(a, diag),
        Command::Escape(a) => cmd_escape(a, diag),
        Command::Converge(a) => cmd_converge(a, diag),
        Command::Affine(a) => cmd_affine(a, diag),
        Command::Ucp(a) => cmd_ucp(a, diag),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Messages go to `diag`; returns the process exit code.
pub fn run<I, T>(args: I, diag: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(diag, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli, diag) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(diag, "error: {e}");
            e.exit_code()
        }
    }
}
