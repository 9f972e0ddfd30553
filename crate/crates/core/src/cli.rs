//! Command-line front end: `sequence`, `verify` and `dump-mesh`.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::fem::{build_dof_map, BasisOrder, ProblemKind};
use crate::report::SequenceReport;
use crate::reuse::{solve_sequence, verify_solution_consistency, SequenceConfig, SequenceRun, SolveMode};
use crate::verify::verify_sequence;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFICATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const MAX_LEVELS: usize = 64;
/// Budget for the oracle's dense global matrix.
pub const ORACLE_MEMORY_BUDGET: u64 = 4 << 30;

#[derive(Debug, Parser)]
#[command(name = "hfront", version, about = "Frontal solver with factor reuse for h-refined grid sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve grids 1..=levels and write one report row per grid and mode.
    Sequence(RunArgs),
    /// Run the invariant suite on grids 1..=min(levels, 6).
    Verify(RunArgs),
    /// Print the mesh after `levels` refinements as JSON.
    DumpMesh(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Reuse,
    Noreuse,
    Oracle,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<SolveMode> {
        match self {
            ModeArg::Reuse => vec![SolveMode::Reuse],
            ModeArg::Noreuse => vec![SolveMode::NoReuse],
            ModeArg::Oracle => vec![SolveMode::Oracle],
            ModeArg::All => SolveMode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// radical1, radical2 or lshape.
    #[arg(long, default_value = "radical1")]
    problem: String,
    /// Polynomial order, 1..=10.
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Number of grids L (refinements for dump-mesh).
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    /// Exponent of the manufactured radical solution.
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidOrder(_) | Error::SingularityOutsideDomain { .. } => EXIT_USAGE,
        Error::CacheInvalid { .. } | Error::Irregular { .. } | Error::NotRefinementOf { .. } => EXIT_VERIFICATION,
        _ => EXIT_NUMERICAL,
    }
}

struct Checked {
    kind: ProblemKind,
    config: SequenceConfig,
}

fn check_args(a: &RunArgs, levels: usize) -> Result<Checked, Error> {
    let kind: ProblemKind = a.problem.parse()?;
    if !(1..=MAX_LEVELS).contains(&levels) {
        return Err(Error::InvalidConfig(format!("levels must be in 1..={MAX_LEVELS}, got {levels}")));
    }
    if !a.alpha.is_finite() || a.alpha <= 0.0 {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", a.alpha)));
    }
    let config = SequenceConfig::for_problem(kind, a.p, levels, a.alpha)?;
    Ok(Checked { kind, config })
}

/// Extrapolates N_L from the first three grids; N grows linearly in l.
pub fn estimate_unknowns(kind: ProblemKind, p: usize, levels: usize) -> Result<u64, Error> {
    let order = BasisOrder::new(p)?;
    let problem = kind.model(0.6);
    let mut mesh = kind.initial_mesh();
    let mut n = Vec::new();
    for _ in 0..levels.min(3) {
        mesh = mesh.refine_towards_singularities();
        n.push(build_dof_map(&mesh, order, problem.as_ref())?.n_dofs() as u64);
    }
    Ok(match n.len() {
        3 => n[2] + (levels as u64 - 3) * (n[2] - n[1]),
        _ => *n.last().expect("levels >= 1"),
    })
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::InvalidConfig(format!("cannot write output: {e}"))),
    }
}

fn cmd_sequence(a: &RunArgs, stdout: &mut dyn Write) -> Result<i32, Error> {
    let Checked { kind, config } = check_args(a, a.levels.unwrap_or(8))?;
    let modes = a.mode.modes();
    if modes.contains(&SolveMode::Oracle) {
        let n = estimate_unknowns(kind, a.p, config.levels)?;
        if 8 * n * n > ORACLE_MEMORY_BUDGET {
            return Err(Error::InvalidConfig(format!(
                "oracle would need a dense {n}x{n} matrix; lower --levels or --p, or skip the oracle mode"
            )));
        }
    }

    let results: Vec<Result<SequenceRun, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = modes.iter().map(|&m| s.spawn({
            let config = &config;
            move || solve_sequence(config, m)
        })).collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let runs: Vec<SequenceRun> = results.into_iter().collect::<Result<_, _>>()?;

    let consistency = (runs.len() == 3).then(|| verify_solution_consistency(&runs[0], &runs[1], &runs[2]));
    let verdict = consistency.as_ref().map_or(true, |c| c.consistent);
    let report = SequenceReport::new(kind, a.p, config.levels, a.alpha, &runs, consistency);
    let text = match a.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    emit(&text, &a.out, stdout)?;
    Ok(if verdict { EXIT_OK } else { EXIT_VERIFICATION })
}

fn cmd_verify(a: &RunArgs, stdout: &mut dyn Write) -> Result<i32, Error> {
    let Checked { kind, config } = check_args(a, a.levels.unwrap_or(6))?;
    let report = verify_sequence(&config)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => {
            let mut t = format!("# verify problem={kind} p={} levels={}\n", a.p, report.levels);
            for c in &report.checks {
                t += &format!("{} {} {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            t
        }
    };
    emit(&text, &a.out, stdout)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFICATION })
}

fn cmd_dump_mesh(a: &RunArgs, stdout: &mut dyn Write) -> Result<i32, Error> {
    let kind: ProblemKind = a.problem.parse()?;
    let levels = a.levels.unwrap_or(1);
    if levels > MAX_LEVELS {
        return Err(Error::InvalidConfig(format!("levels must be at most {MAX_LEVELS}")));
    }
    let mut mesh = kind.initial_mesh();
    for _ in 0..levels {
        mesh = mesh.refine_towards_singularities();
    }
    let text = serde_json::to_string_pretty(&mesh.to_document()).expect("mesh serializes") + "\n";
    emit(&text, &a.out, stdout)?;
    Ok(EXIT_OK)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Sequence(a) => cmd_sequence(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
        Command::DumpMesh(a) => cmd_dump_mesh(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
