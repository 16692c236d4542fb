//! `qmark`: command-line front end for the question-mark measure library.
//!
//! Exit status: 0 on success, 1 when a verification fails or a tolerance
//! cannot be reached, 2 on configuration errors.

mod commands;
mod numfmt;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::Signed;

/// Exact Stern-Brocot partitions, regularity certificates and spectral
/// diagnostics for Minkowski's question mark measure.
#[derive(Debug, Parser)]
#[command(name = "qmark", version)]
pub struct Cli {
    /// Worker threads for parallel sweeps (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format; `table` is only available for `verify`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Table => "table",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ?(x) for a rational x in [0, 1] (exact) or a float (with --real).
    Eval {
        /// P/Q or a decimal, read exactly.
        #[arg(long)]
        x: String,
        /// Treat x as a binary float and sum the series to --eps.
        #[arg(long)]
        real: bool,
        #[arg(long, default_value_t = 1e-15)]
        eps: f64,
    },
    /// The rational x with ?(x) = y, for a dyadic y.
    Invert {
        /// m/2^k, or P/Q with Q a power of two.
        #[arg(long)]
        y: String,
    },
    /// Every interval I_σ of level n.
    Partition {
        #[arg(long)]
        level: usize,
    },
    /// The large intervals L^n(α): λ(I_σ) ≥ α/n.
    Census {
        #[arg(long = "n")]
        n: usize,
        #[arg(long, value_parser = parse_alpha)]
        alpha: BigRational,
    },
    /// Constructive bound l(α) on #L^n(α) and the levels it holds from.
    Pipeline {
        #[arg(long, value_parser = parse_alpha)]
        alpha: BigRational,
    },
    /// Exact lower bound for the measure of Λ^n(α) and its bound chain.
    LambdaStar {
        #[arg(long = "n")]
        n: usize,
        #[arg(long, value_parser = parse_alpha)]
        alpha: BigRational,
    },
    /// Kinney dimension of the measure with a certified error bound.
    Dimension {
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
        /// Interval budget (default: QMARK_MAX_INTERVALS or 2^33).
        #[arg(long)]
        max_intervals: Option<u64>,
    },
    /// Recurrence coefficients of a discretised measure and the geometric
    /// mean diagnostic.
    Jacobi {
        /// Uniform discretisation at this level (refined against level + 2).
        #[arg(long, default_value_t = 18)]
        level: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Use adaptive atoms with cell length below this width instead
        /// (refined against width / 3).
        #[arg(long)]
        adaptive: Option<f64>,
        /// Agreement required between discretisation and refinement.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Report all requested coefficients, resolved or not.
        #[arg(long)]
        no_truncate: bool,
    },
    /// Run the exact invariant suite; exits 1 on any violation.
    Verify {
        #[arg(long, default_value_t = 12)]
        max_level: usize,
    },
}

fn parse_alpha(s: &str) -> Result<BigRational, String> {
    let a = numfmt::parse_rational(s)?;
    if !a.is_positive() {
        return Err(format!("alpha must be positive, got {s}"));
    }
    Ok(a)
}

#[derive(Debug)]
pub enum Failure {
    /// Bad configuration: exit 2.
    Config(String),
    /// Verification failed or tolerance unreachable: exit 1.
    Unmet(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let status = run(cli);
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unmet(msg)) => {
            eprintln!("qmark: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("qmark: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("qmark: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let format = commands::resolve_format(&cli.command, cli.format)?;
    let mut out: Box<dyn Write> = match &cli.output {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::Config(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let result = commands::dispatch(&cli.command, format, &mut out);
    out.flush()?;
    result
}
