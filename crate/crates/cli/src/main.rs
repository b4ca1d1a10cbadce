//! `hahnvar`: solve, audit and sweep quantum variational problems.

mod commands;
mod error;
mod grid_csv;
mod json;
mod problem_file;
mod setup;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hahn_varcalc::varcalc::Sense;
use hahn_varcalc::HahnParams;

use crate::commands::{parse_vary, CheckArgs, Output};
use crate::error::CliError;
use crate::json::Json;
use crate::setup::{parse_assignment, Overrides, Setup};

#[derive(Parser)]
#[command(
    name = "hahnvar",
    version,
    about = "Hahn quantum calculus and quantum variational problems with free end-points",
    after_help = "Defaults: depth 60, tail_tol 1e-13, solver tol 1e-10, max_iter 100, sense min.\n\
                  Exit codes: 0 success, 1 input error, 2 solver did not converge.",
    allow_negative_numbers = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Min,
    Max,
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file, or a catalog name: example1, example2, adjustment.
    problem: String,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    /// Truncation depth, clamped near omega0 [default: 60].
    #[arg(long)]
    depth: Option<usize>,
    /// Solver tolerance on the scaled residual [default: 1e-10].
    #[arg(long)]
    tol: Option<f64>,
    /// Newton iteration cap [default: 100].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Parameter override, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// Extremum sought [default: min].
    #[arg(long, value_enum)]
    sense: Option<SenseArg>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and report the extremal.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Also write the grid as CSV (t, y, Dy, orbit, k).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Audit a candidate grid without solving.
    Check {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Candidate grid in the CSV layout written by `solve --csv`.
        #[arg(long)]
        candidate: PathBuf,
        /// Multiplier for the residuals of L - lambda F (constrained problems).
        #[arg(long)]
        lambda: Option<f64>,
        /// Convexity probe sample count.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Convexity probe seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Convexity probe box side, LO:HI, applied to every argument.
        #[arg(long = "box", value_name = "LO:HI", default_value = "-10:10")]
        bounds: String,
    },
    /// Solve once per value of the varied settings.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// NAMES=start:stop:count[:log] or NAMES=v1,v2,...; NAMES may join
        /// several names with commas. Repeat for a product grid.
        #[arg(long, required = true)]
        vary: Vec<String>,
        /// Write one grid CSV per point, suffixed -<index>.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the Hahn derivative of an expression in t.
    Derive {
        expr: String,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        omega: f64,
        #[arg(long)]
        t: f64,
        /// Central-difference half-width used at omega0.
        #[arg(long)]
        step: Option<f64>,
    },
    /// Print the Jackson-Norlund integral of an expression in t over [a, b],
    /// then the term count and tail estimate.
    Integrate {
        expr: String,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 1e-13)]
        tail_tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_terms: usize,
    },
}

fn load(args: &ProblemArgs) -> Result<Setup, CliError> {
    let mut setup = Setup::load(&args.problem)?;
    let overrides = Overrides {
        q: args.q,
        omega: args.omega,
        depth: args.depth,
        tol: args.tol,
        max_iter: args.max_iter,
        sense: args.sense.map(|s| match s {
            SenseArg::Min => Sense::Min,
            SenseArg::Max => Sense::Max,
        }),
        params: args
            .params
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<Result<_, _>>()?,
    };
    setup.apply(&overrides)?;
    Ok(setup)
}

fn parse_box(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::input(format!("--box `{s}` must be LO:HI"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ))
}

fn emit(json: &Json, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = json.to_pretty();
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::input(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (output, out): (Output, Option<&PathBuf>) = match &cli.command {
        Command::Solve { problem, csv } => (
            commands::solve(&load(problem)?, csv.as_deref())?,
            problem.out.as_ref(),
        ),
        Command::Check {
            problem,
            candidate,
            lambda,
            samples,
            seed,
            bounds,
        } => {
            let args = CheckArgs {
                candidate,
                lambda: *lambda,
                samples: *samples,
                seed: *seed,
                bounds: parse_box(bounds)?,
            };
            (
                commands::check(&load(problem)?, &args)?,
                problem.out.as_ref(),
            )
        }
        Command::Sweep { problem, vary, csv } => {
            let varies = vary
                .iter()
                .map(|v| parse_vary(v))
                .collect::<Result<Vec<_>, _>>()?;
            (
                commands::sweep(&load(problem)?, &varies, csv.as_deref())?,
                problem.out.as_ref(),
            )
        }
        Command::Derive {
            expr,
            q,
            omega,
            t,
            step,
        } => {
            let d = commands::derive(expr, HahnParams::new(*q, *omega)?, *t, *step)?;
            println!("{d}");
            return Ok(0);
        }
        Command::Integrate {
            expr,
            a,
            b,
            q,
            omega,
            tail_tol,
            max_terms,
        } => {
            let r = commands::integrate(
                expr,
                HahnParams::new(*q, *omega)?,
                *a,
                *b,
                *tail_tol,
                *max_terms,
            )?;
            println!(
                "{}\nterms {}\ntail_estimate {:e}",
                r.value, r.terms, r.tail_estimate
            );
            return Ok(0);
        }
    };
    emit(&output.json, out)?;
    Ok(output.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
