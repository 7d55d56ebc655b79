//! `qep`: solve and verify problems given as TOML files or catalog names.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qep_core::catalog::{self, AnyInstance};
use qep_core::problem::load_spec_file;
use qep_core::report::{csv_string, to_json, verify_instance, VerifyReport};
use qep_core::{Grid, ProblemInstance, ProblemKind, Scalar, SolveReport, SolverConfig};

const EXIT_BAD_INPUT: u8 = 2;
const EXIT_ANOMALY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qep",
    version,
    about = "Grid solvers and hypothesis falsifiers for quasi-equilibrium problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem in a spec file (QEP, EP, QOpt or QVI by payload).
    Solve {
        spec: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run the hypothesis checkers and the theorem-instance verification.
    Verify {
        spec: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Built-in instances.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// List the catalog entries.
    List,
    /// Solve a catalog instance.
    Run {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Verify a catalog instance, as `verify` does for spec files.
    Verify {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Grid points per axis.
    #[arg(long, value_name = "M")]
    grid: Option<usize>,
    #[arg(long, value_name = "E")]
    eps: Option<f64>,
    #[arg(long, value_name = "D")]
    delta: Option<f64>,
    /// Generator seed for seeded catalog entries; checker seed otherwise.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}

fn run(cli: Cli) -> qep_core::Result<ExitCode> {
    match cli.command {
        Command::Solve { spec, opts } => {
            let mut inst = load_spec_file(&spec)?;
            if let Some(seed) = opts.seed {
                inst.checks.seed = seed;
            }
            solve(&inst, &opts)
        }
        Command::Verify { spec, opts } => {
            let mut inst = load_spec_file(&spec)?;
            if let Some(seed) = opts.seed {
                inst.checks.seed = seed;
            }
            verify(&inst, &opts)
        }
        Command::Catalog { command } => match command {
            CatalogCommand::List => {
                let mut out = String::new();
                for e in catalog::ENTRIES {
                    let seeded = if e.seeded { " [--seed]" } else { "" };
                    out.push_str(&format!("{:<20} {}{}\n", e.name, e.summary, seeded));
                }
                print!("{out}");
                Ok(ExitCode::SUCCESS)
            }
            CatalogCommand::Run { name, opts } => match catalog::lookup(&name, opts.seed)? {
                AnyInstance::Real(inst) => solve(&inst, &opts),
                AnyInstance::Exact(inst) => solve(&inst, &opts),
            },
            CatalogCommand::Verify { name, opts } => match catalog::lookup(&name, opts.seed)? {
                AnyInstance::Real(inst) => verify(&inst, &opts),
                AnyInstance::Exact(inst) => verify(&inst, &opts),
            },
        },
    }
}

fn config<S: Scalar>(inst: &ProblemInstance<S>, opts: &RunOpts) -> qep_core::Result<SolverConfig> {
    let base = inst.solver_config()?;
    let grid = match opts.grid {
        Some(m) => Grid::uniform(&inst.domain, m)?,
        None => base.grid.clone(),
    };
    let cfg = SolverConfig::new(grid, opts.eps.unwrap_or(base.eps), opts.delta.unwrap_or(base.delta))?;
    Ok(match opts.workers {
        Some(n) => cfg.with_workers(n),
        None => cfg,
    })
}

fn solve<S: Scalar>(inst: &ProblemInstance<S>, opts: &RunOpts) -> qep_core::Result<ExitCode> {
    let cfg = config(inst, opts)?;
    let report = inst.solve(&cfg)?;
    let text = match opts.format.unwrap_or(Format::Csv) {
        Format::Csv => csv_string(&report, inst.dim())?,
        Format::Json => to_json(&report)?,
    };
    emit(&text, opts.out.as_deref())?;
    summarize(&report);
    Ok(ExitCode::SUCCESS)
}

fn summarize(report: &SolveReport) {
    eprintln!("problem: {}", report.problem_kind);
    eprintln!("solutions: {}", report.solution_count());
    eprintln!("fixed points: {}", report.fixed_point_count);
    let flagged = report.flagged().count();
    if flagged > 0 {
        eprintln!("degenerate images: {flagged}");
    }
    if report.problem_kind == ProblemKind::Qopt {
        match report.min_gap_over_fixed_points {
            Some(g) => eprintln!("min_gap_over_fixed_points: {g}"),
            None => eprintln!("min_gap_over_fixed_points: none"),
        }
    }
}

fn verify<S: Scalar>(inst: &ProblemInstance<S>, opts: &RunOpts) -> qep_core::Result<ExitCode> {
    let cfg = config(inst, opts)?;
    let report = verify_instance(inst, &cfg)?;
    let text = match opts.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => verdict_csv(&report),
    };
    emit(&text, opts.out.as_deref())?;
    for (name, verdict) in &report.verdicts {
        eprintln!("{name}: {verdict}");
    }
    eprintln!("solutions: {}", report.theorem.solve.solution_count());
    if report.anomaly() {
        eprintln!("ANOMALY: every check passed but no grid point solves the problem");
        return Ok(ExitCode::from(EXIT_ANOMALY));
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict_csv<S: Scalar>(report: &VerifyReport<S>) -> String {
    let mut out = String::from("check,verdict\n");
    for (name, verdict) in &report.verdicts {
        out.push_str(&format!("{name},{verdict}\n"));
    }
    out
}

fn emit(text: &str, out: Option<&Path>) -> qep_core::Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
