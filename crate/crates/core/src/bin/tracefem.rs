use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use tracefem::solver::{SolverKind, DEFAULT_TOLERANCE};
use tracefem::study::{run_study, StudyConfig, StudyReport, TestCase};

#[derive(Parser)]
#[command(name = "tracefem", version, about = "TraceFEM C0 interior penalty solver for the surface biharmonic equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mesh refinement study on the unit sphere.
    Study(StudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Paper,
    Harmonic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Cholesky,
    Pcg,
}

#[derive(clap::Args)]
struct StudyArgs {
    #[arg(long, value_enum, default_value = "paper")]
    case: Case,
    /// Stabilization variant (0, 1 or 2).
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    variant: u8,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Cells per axis on level 0; doubled per level.
    #[arg(long, default_value_t = 8)]
    cells0: usize,
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    beta: f64,
    /// Half width of the background box [-A, A]^3.
    #[arg(long = "box", default_value_t = 1.2)]
    box_half_width: f64,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, value_enum, default_value = "cholesky")]
    solver: Solver,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the finest discrete surface as `K tet n x y z ...` lines.
    #[arg(long)]
    export_surface: Option<PathBuf>,
    /// Write the finest system matrix as `i j value` lines.
    #[arg(long)]
    export_matrix: Option<PathBuf>,
    /// Single-threaded run.
    #[arg(long)]
    reference_mode: bool,
}

fn render(report: &StudyReport, format: Format) -> String {
    match format {
        Format::Csv => report.to_csv(),
        Format::Md => report.to_markdown(),
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn study(args: StudyArgs) -> anyhow::Result<ExitCode> {
    if args.reference_mode {
        rayon::ThreadPoolBuilder::new().num_threads(1).build_global().context("configuring thread pool")?;
    }
    let config = StudyConfig {
        case: match args.case {
            Case::Paper => TestCase::Paper,
            Case::Harmonic => TestCase::Harmonic,
        },
        variant: args.variant,
        levels: args.levels,
        cells0: args.cells0,
        sigma: args.sigma,
        gamma: args.gamma,
        beta: args.beta,
        box_half_width: args.box_half_width,
        tol: args.tol,
        solver: match args.solver {
            Solver::Cholesky => SolverKind::Cholesky,
            Solver::Pcg => SolverKind::JacobiCg,
        },
        export_surface: args.export_surface,
        export_matrix: args.export_matrix,
    };
    match run_study(&config) {
        Ok(report) => {
            emit(&render(&report, args.format), &args.out)?;
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            // Keep the completed levels.
            emit(&render(&failure.partial, args.format), &args.out)?;
            eprintln!("error: {failure}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Study(args) => study(args),
    }
}
