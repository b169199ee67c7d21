//! `rkl`: predict, run and measure GMRES(1) / rAA(1) convergence factors.
//!
//! Exit codes: 0 success, 1 a counterexample did not violate the bound,
//! 2 usage or input error, 3 numeric failure.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rkl", version, about = "GMRES(1) and rAA(1) convergence factors", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the worst-case factors of a matrix.
    Predict(PredictArgs),
    /// Run one solver and optionally write its trace.
    Solve(SolveArgs),
    /// Run a seeded ensemble described by a config file.
    Measure(MeasureArgs),
    /// Construct and verify a nonlinear eigenpair.
    Eigpair(EigpairArgs),
    /// Check the rAA(1) counterexamples in exact arithmetic.
    Counterexample(CounterexampleArgs),
    /// Reproduce a figure as CSV and SVG.
    Figure(FigureArgs),
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Builtin name (A1..A4, CA1..CA3) or matrix file.
    #[arg(long)]
    pub matrix: String,
    /// 1-based distinct-eigenvalue indices (symmetric) or block indices (skew M).
    #[arg(long, value_delimiter = ',')]
    pub restrict: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[arg(long)]
    pub matrix: String,
    /// `zeros`, `rand:<seed>` or a vector file.
    #[arg(long, default_value = "rand:0")]
    pub x0: String,
    /// `zeros` or a vector file.
    #[arg(long, default_value = "zeros")]
    pub b: String,
    /// gmres1, raa1 or stationary.
    #[arg(long, default_value = "gmres1")]
    pub method: String,
    #[arg(long, default_value_t = 1e-30)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// CSV file for the iteration trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    /// Flat `key = value` ensemble config.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EigpairArgs {
    #[arg(long)]
    pub matrix: String,
    /// i2, pi, psi or upsilon.
    #[arg(long)]
    pub map: String,
    /// 1-based distinct-eigenvalue indices `i,j`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub pair: Vec<usize>,
    /// A number or `auto`.
    #[arg(long, default_value = "auto")]
    pub eps: String,
    /// Spread the vector over whole eigenspaces.
    #[arg(long)]
    pub spread: bool,
    /// Seed for `--spread`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    /// 1, 2, 3 or all.
    #[arg(long, default_value = "all")]
    pub case: String,
    /// Print every intermediate as an exact fraction.
    #[arg(long)]
    pub exact_print: bool,
    /// Custom diagonal matrix file (with `--vector`), instead of `--case`.
    #[arg(long, requires = "vector")]
    pub matrix: Option<String>,
    #[arg(long, requires = "matrix")]
    pub vector: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FigureArgs {
    /// fig1, fig2, fig3 or fig4.
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
