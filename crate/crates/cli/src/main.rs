use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Truncation bounds, changing-dimension and optimal algorithms in weighted
/// tensor-product spaces with weights d^{-|u|}.
#[derive(Debug, Parser)]
#[command(name = "actvar", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// wiener, korobov:R or custom:FILE (JSON spectrum document, JSON array or plain numbers)
    #[arg(long, global = true, default_value = "korobov:1")]
    pub kernel: String,
    #[arg(long, global = true, value_enum, default_value_t = C0sqArg::Exact)]
    pub c0sq_mode: C0sqArg,
    /// Number of univariate eigenvalues kept for analytic kernels
    #[arg(long, global = true, default_value_t = actvar::spectrum::DEFAULT_TRUNCATION)]
    pub truncation: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum C0sqArg {
    Exact,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// m1, M and m2 over an (eps, d) grid
    Bounds {
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8,1e-9,1e-10")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,100,1000")]
        d: Vec<usize>,
        /// Orthogonality constant C used for m2
        #[arg(long, default_value_t = 1.0)]
        c_const: f64,
    },
    /// Univariate eigenvalues and power sums L(tau)
    Spectrum {
        /// Number of eigenvalues to list
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
    },
    /// Plan, price and optionally run the changing-dimension algorithm
    Cda {
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "2,5,10,50")]
        d: Vec<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// constant, poly:q, exp:q, dexp:q or linear:c
        #[arg(long, default_value = "exp:1")]
        cost: String,
        /// Random unit-norm functions per configuration
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        sparsity: usize,
        #[arg(long, default_value_t = 3)]
        max_card: usize,
    },
    /// Eigenvalue count and active variables of the optimal algorithm
    Optimal {
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        d: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        c_const: f64,
        /// Also list this many leading eigenvalues of W_d for the first d
        #[arg(long, default_value_t = 0)]
        list: usize,
    },
    /// Complexity grid with exponent fits and tractability labels
    Complexity {
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
        d: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value = "exp:1")]
        cost: String,
        #[arg(long, default_value_t = 1.0)]
        c_const: f64,
        /// JSON summary destination; defaults to OUT.summary.json or stderr
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// The ceil(M(10^-q)) table at C0^2 = 1/2
    Table,
    /// Monte Carlo check of exact errors of the changing-dimension algorithm
    McCheck {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = actvar::harness::DEFAULT_MC_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        sparsity: usize,
        #[arg(long, default_value_t = 3)]
        max_card: usize,
        /// Required fraction of trials whose exact error lies inside 3 sigma
        #[arg(long, default_value_t = 0.94)]
        min_coverage: f64,
    },
}

/// Outcome of a subcommand that ran to completion.
pub enum Status {
    Ok,
    Mismatch(String),
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
    match commands::run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Mismatch(msg)) => {
            eprintln!("mismatch: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
