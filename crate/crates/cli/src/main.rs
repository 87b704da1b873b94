use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use pgcs_core::backward_error::backward_error_bounds;
use pgcs_core::conditioning::{condition_numbers_with, NormOptions};
use pgcs_core::estimators::{pce_condition_numbers, sce_condition_numbers, PceOptions, WallisMode};
use pgcs_core::experiments::{
    example1_problem, run_ratio_benchmark, run_table1_grid, substitute_exponents, write_ratio_csv, write_table1_csv,
    RatioConfig,
};
use pgcs_core::io::{self, BackwardErrorDoc, PerturbationDoc, ResidualDoc, SolutionDoc};
use pgcs_core::model::{default_tolerances, residual};
use pgcs_core::perturbation::{componentwise_bounds, normwise_bounds};
use pgcs_core::solver::PgcsSystem;
use pgcs_core::{dense_cap_from_env, PgcsError, PgcsProblem, PgcsSolution, ToleranceSet};

#[derive(Parser, Debug)]
#[command(name = "pgcs", version, about = "Periodic generalized coupled Sylvester solver and conditioning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the equation and write the solution JSON.
    Solve(IoArgs),
    /// Residual of a candidate solution.
    Residual {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        candidate: PathBuf,
    },
    /// Backward error bracket of a candidate solution.
    BackwardError {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        candidate: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Rigorous and first-order perturbation bounds.
    Bounds {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        perturbation: PathBuf,
        /// Solution to expand around; solved from the input when omitted.
        #[arg(long)]
        candidate: Option<PathBuf>,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Exact condition numbers.
    Cond {
        /// Problem JSON; the built-in three-period bundle when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<i32>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<i32>,
        /// Defaults to `unit` with --tau/--t, `default` otherwise.
        #[arg(long)]
        tolerances: Option<String>,
    },
    /// Randomized condition estimates.
    Estimate {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = Estimator::Pce)]
        estimator: Estimator,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        pce: PceArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Condition numbers over the (tau, t) grid, as CSV.
    BenchTable1 {
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimated-to-exact ratio study, as CSV.
    BenchRatios {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        pce: PceArgs,
    },
}

#[derive(Args, Debug)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    /// Destination file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TolArgs {
    /// `default`, `unit`, or a tolerance JSON file.
    #[arg(long, default_value = "default")]
    tolerances: String,
}

#[derive(Args, Debug)]
struct PceArgs {
    #[arg(long, default_value_t = 0.001)]
    eps_prob: f64,
    #[arg(long, default_value_t = 0.01)]
    delta_gap: f64,
}

impl PceArgs {
    fn options(&self) -> PceOptions {
        PceOptions {
            eps_prob: self.eps_prob,
            delta_gap: self.delta_gap,
            ..PceOptions::default()
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Estimator {
    Pce,
    Sce,
    Exact,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<PgcsError> for CliError {
    fn from(e: PgcsError) -> Self {
        match e {
            PgcsError::InvalidArgument { .. } => CliError::Usage(e.to_string()),
            e if e.is_numerical() => CliError::Numerical(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn read_problem(path: &Path) -> CliResult<PgcsProblem> {
    Ok(io::parse_problem(&read_text(path)?)?)
}

fn read_solution(path: &Path) -> CliResult<PgcsSolution> {
    Ok(io::parse_solution(&read_text(path)?)?)
}

fn tolerances(spec: &str, problem: &PgcsProblem) -> CliResult<ToleranceSet> {
    let tol = match spec {
        "default" => default_tolerances(problem)?,
        "unit" => ToleranceSet::unit(problem.p),
        path => io::parse_tolerances(&read_text(Path::new(path))?)?,
    };
    tol.validate(problem.p)?;
    Ok(tol)
}

fn emit_bytes(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Data(format!("cannot write to stdout: {e}"))),
    }
}

fn emit_json<T: Serialize>(output: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = io::to_json(value)?;
    text.push('\n');
    emit_bytes(output, text.as_bytes())
}

/// CSV goes to `output` with the summary on stdout, or CSV to stdout with the summary on stderr.
fn emit_bench<T: Serialize>(output: Option<&Path>, csv: Vec<u8>, summary: &T) -> CliResult<()> {
    emit_bytes(output, &csv)?;
    let text = io::to_json(summary)?;
    if output.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}

fn solve(problem: &PgcsProblem) -> CliResult<(PgcsSystem, PgcsSolution)> {
    let system = PgcsSystem::new(problem, dense_cap_from_env())?;
    let solution = system.solve_vector(&problem.rhs_vector())?;
    Ok((system, solution))
}

fn run(cli: Cli) -> CliResult<()> {
    let cap = dense_cap_from_env();
    match cli.command {
        Command::Solve(io) => {
            let problem = read_problem(&io.input)?;
            let (_, solution) = solve(&problem)?;
            emit_json(io.output.as_deref(), &SolutionDoc::from(&solution))
        }
        Command::Residual { io, candidate } => {
            let problem = read_problem(&io.input)?;
            let candidate = read_solution(&candidate)?;
            let r = residual(&problem, &candidate)?;
            emit_json(io.output.as_deref(), &ResidualDoc::from(&r))
        }
        Command::BackwardError { io, candidate, tol } => {
            let problem = read_problem(&io.input)?;
            let candidate = read_solution(&candidate)?;
            let tol = tolerances(&tol.tolerances, &problem)?;
            let report = backward_error_bounds(&problem, &candidate, &tol, cap)?;
            emit_json(io.output.as_deref(), &BackwardErrorDoc::from(&report))
        }
        Command::Bounds {
            io,
            perturbation,
            candidate,
            tol,
        } => {
            let problem = read_problem(&io.input)?;
            let delta = io::parse_perturbation(&read_text(&perturbation)?)?;
            let tol = tolerances(&tol.tolerances, &problem)?;
            let (system, solved) = solve(&problem)?;
            let solution = match candidate {
                Some(path) => read_solution(&path)?,
                None => solved,
            };
            let opts = NormOptions {
                svd_cap: cap,
                ..NormOptions::default()
            };
            let normwise = normwise_bounds(&system, &problem, &solution, &delta, &tol, &opts)?;
            let componentwise = componentwise_bounds(&system, &problem, &solution, &delta, &tol)?;
            emit_json(
                io.output.as_deref(),
                &json!({ "normwise": normwise, "componentwise": componentwise, "perturbation": PerturbationDoc::from(&delta) }),
            )
        }
        Command::Cond {
            input,
            output,
            tau,
            t,
            tolerances: tol_spec,
        } => {
            let mut problem = match &input {
                Some(path) => read_problem(path)?,
                None => example1_problem(1, 1),
            };
            let substituted = match (tau, t) {
                (Some(tau), Some(t)) => {
                    substitute_exponents(&mut problem, tau, t)?;
                    true
                }
                (None, None) => false,
                _ => return Err(CliError::Usage("--tau and --t must be given together".into())),
            };
            let spec = tol_spec.unwrap_or_else(|| if substituted { "unit".into() } else { "default".into() });
            let tol = tolerances(&spec, &problem)?;
            let (system, solution) = solve(&problem)?;
            let opts = NormOptions {
                svd_cap: cap,
                ..NormOptions::default()
            };
            let report = condition_numbers_with(&system, &problem, &solution, &tol, &opts)?;
            emit_json(output.as_deref(), &report)
        }
        Command::Estimate {
            io,
            estimator,
            samples,
            seed,
            pce,
            tol,
        } => {
            let problem = read_problem(&io.input)?;
            let tol = tolerances(&tol.tolerances, &problem)?;
            let (system, solution) = solve(&problem)?;
            match estimator {
                Estimator::Pce => {
                    let r = pce_condition_numbers(&system, &problem, &solution, &tol, &pce.options(), seed, 0)?;
                    emit_json(io.output.as_deref(), &r)
                }
                Estimator::Sce => {
                    let r = sce_condition_numbers(&system, &problem, &solution, samples, seed, WallisMode::Exact)?;
                    emit_json(io.output.as_deref(), &r)
                }
                Estimator::Exact => {
                    let opts = NormOptions {
                        svd_cap: cap,
                        pce: pce.options(),
                        seed,
                    };
                    let r = condition_numbers_with(&system, &problem, &solution, &tol, &opts)?;
                    emit_json(io.output.as_deref(), &r)
                }
            }
        }
        Command::BenchTable1 { output } => {
            let rows = run_table1_grid()?;
            let mut csv = Vec::new();
            write_table1_csv(&rows, &mut csv).map_err(|e| CliError::Data(e.to_string()))?;
            let worst = rows.iter().flat_map(|r| r.relative_error).fold(0.0f64, f64::max);
            let summary = json!({ "rows": rows.len(), "max_relative_error": worst });
            emit_bench(output.as_deref(), csv, &summary)
        }
        Command::BenchRatios {
            output,
            trials,
            samples,
            seed,
            pce,
        } => {
            let cfg = RatioConfig {
                trials,
                samples,
                seed,
                pce: pce.options(),
                ..RatioConfig::default()
            };
            let stats = run_ratio_benchmark(&cfg)?;
            let mut csv = Vec::new();
            write_ratio_csv(&stats, &mut csv).map_err(|e| CliError::Data(e.to_string()))?;
            emit_bench(output.as_deref(), csv, &stats.summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
