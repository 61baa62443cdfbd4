//! `abp` — command-line front end for balanced bilinear model analysis.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abp_core::{Error, Tolerances};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "abp", version, about = "Analyze balanced bilinear epidemic models and reaction networks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random draw (initial conditions, sampling).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Input format; inferred from the extension (`.rxn` = reactions) when omitted.
    #[arg(long, global = true, value_enum)]
    pub input_kind: Option<InputKind>,
    #[arg(long, global = true, value_parser = positive)]
    pub tol_hurwitz: Option<f64>,
    #[arg(long, global = true, value_parser = positive)]
    pub tol_stochastic: Option<f64>,
    #[arg(long, global = true, value_parser = positive)]
    pub tol_rank: Option<f64>,
    #[arg(long, global = true, value_parser = positive)]
    pub tol_threshold: Option<f64>,
    #[arg(long, global = true, value_parser = positive)]
    pub tol_residual: Option<f64>,
    #[arg(long, global = true, value_parser = positive)]
    pub tol_lyapunov: Option<f64>,
}

impl Global {
    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            hurwitz: self.tol_hurwitz.unwrap_or(d.hurwitz),
            stochastic: self.tol_stochastic.unwrap_or(d.stochastic),
            rank: self.tol_rank.unwrap_or(d.rank),
            threshold: self.tol_threshold.unwrap_or(d.threshold),
            residual: self.tol_residual.unwrap_or(d.residual),
            lyapunov: self.tol_lyapunov.unwrap_or(d.lyapunov),
        }
    }

    pub fn input_kind(&self, path: &Path) -> InputKind {
        self.input_kind.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some("rxn") => InputKind::Reactions,
            _ => InputKind::Model,
        })
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// JSON matrix bundle.
    Model,
    /// Reaction list.
    Reactions,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Dfe,
    Ee,
    Transversal,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validation, rank class, R0, Perron data, equilibria, determinant law.
    Analyze { input: PathBuf },
    /// Build a Lyapunov function and check its decrease along trajectories.
    Lyapunov {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: CertificateKind,
        #[arg(long, default_value_t = 20)]
        trajectories: usize,
        #[arg(long, default_value_t = 100.0, value_parser = positive)]
        horizon: f64,
    },
    /// Sweep one model entry and count endemic roots at each grid point.
    Scan {
        input: PathBuf,
        /// Entry to vary: `B[i,j]`, `C[i,j]`, `A[i,j]`, `A_S[i,j]`, `P[i,j]` or `Lambda[i]`.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of grid points, endpoints included.
        #[arg(long)]
        steps: usize,
    },
    /// Minimal siphons, criticality and face Jacobians of a reaction network.
    Siphons { input: PathBuf },
    /// Integrate a model or network and write the trajectory as CSV.
    Simulate {
        input: PathBuf,
        #[arg(long, default_value_t = 100.0, value_parser = positive)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01, value_parser = positive)]
        h: f64,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Comma-separated initial state; a seeded random positive state otherwise.
        #[arg(long)]
        x0: Option<String>,
    },
}

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Io(String),
    Validation(String),
    Convergence(String),
    Hypothesis(String),
    Verdict(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Io(_) => 1,
            Self::Validation(_) => 2,
            Self::Convergence(_) => 3,
            Self::Hypothesis(_) => 4,
            Self::Verdict(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Io(m) | Self::Validation(m) | Self::Convergence(m) | Self::Hypothesis(m) | Self::Verdict(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Parse { .. } | Error::NegativeRate(_) | Error::UnknownSpecies { .. } | Error::DimensionMismatch(_) => {
                Self::Io(msg)
            }
            Error::InvalidModel(_) => Self::Validation(msg),
            Error::NoConvergence(_)
            | Error::NoBracket(_)
            | Error::SingularMatrix(_)
            | Error::RankTestFailure(_)
            | Error::StepUnderflow(_)
            | Error::PositivityViolation { .. } => Self::Convergence(msg),
            _ => Self::Hypothesis(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    std::fs::create_dir_all(&cli.global.out)?;
    let g = &cli.global;
    match cli.command {
        Command::Analyze { input } => commands::analyze(g, &input),
        Command::Lyapunov { input, kind, trajectories, horizon } => {
            commands::lyapunov(g, &input, kind, trajectories, horizon)
        }
        Command::Scan { input, param, from, to, steps } => commands::scan(g, &input, &param, from, to, steps),
        Command::Siphons { input } => commands::siphons(g, &input),
        Command::Simulate { input, horizon, h, stride, x0 } => {
            commands::simulate(g, &input, horizon, h, stride, x0.as_deref())
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1; clap's own code 2 is reserved for validation.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
