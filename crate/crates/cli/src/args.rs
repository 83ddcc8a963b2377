use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "avf", version, about = "Energy-preserving Runge-Kutta methods: construction and verification")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Working precision in decimal digits.
    #[arg(long, global = true, default_value_t = 50)]
    pub precision: u32,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Accept quadrature nodes outside [0, 1].
    #[arg(long, global = true)]
    pub allow_exterior: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Stage count(s) and ζ value(s); lists are only accepted with `--sweep`.
#[derive(Args, Debug, Clone)]
pub struct RuleArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub s: Vec<usize>,
    /// Exact rational: `0.5`, `-1`, `1/3`, `5e9`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub zeta: Vec<String>,
    /// Run every (s, ζ) combination in parallel.
    #[arg(long)]
    pub sweep: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Quadrature nodes and weights on the zeros of P_s - ζ P_{s-1}.
    Quad(RuleArgs),
    /// The AVF tableau A = c b^T.
    Tableau(RuleArgs),
    /// Energy-preservation residuals of a tableau (AVF by default).
    Conditions {
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long)]
        m: usize,
        /// JSON file with `a`, `b`, `c` (numbers or decimal/fraction strings).
        #[arg(long)]
        tableau: Option<PathBuf>,
    },
    /// Rank and kernel of the double-bush operator M.
    Rank {
        #[command(flatten)]
        rule: RuleArgs,
        /// Highest condition order; 2s or 2s-1 (default 2s-1).
        #[arg(long)]
        m: Option<usize>,
    },
    /// β-sweep along the zero row-sum kernel direction.
    Uniqueness {
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        betas: Option<Vec<String>>,
    },
    /// Time-step a polynomial Hamiltonian system.
    Integrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, allow_hyphen_values = true)]
        h: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Observed convergence order against a fine reference run.
    Order {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        t_end: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        h: Vec<f64>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Hamiltonian JSON: {"half_dim": d, "terms": [{"exponents": [...], "coeff": "p/q"}]}.
    #[arg(long)]
    pub hamiltonian: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodKind::Avf)]
    pub method: MethodKind,
    /// Initial state (q_1..q_d, p_1..p_d).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub y0: Vec<f64>,
    /// Quadrature for `--method quad`.
    #[arg(long, default_value_t = 2)]
    pub s: usize,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub zeta: String,
    /// Tableau JSON for `--method tableau`.
    #[arg(long)]
    pub tableau: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    /// Exact line average of the vector field.
    Avf,
    /// AVF discretized by the (s, ζ) quadrature rule.
    Quad,
    Midpoint,
    Euler,
    /// Runge-Kutta tableau read from `--tableau`.
    Tableau,
}
