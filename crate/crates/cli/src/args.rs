use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ehrhard", version, about = "Experiments with the Borell-Ehrhard game and Gaussian inequalities")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Plain `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then EHRHARD_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report destination; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Gauss-Hermite order.
    #[arg(long, global = true, conflicts_with = "composite")]
    pub order: Option<usize>,
    /// Composite Gauss-Legendre rule with this many panels on [-10, 10].
    #[arg(long, global = true)]
    pub composite: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Value function v(0, 0) and the PDE residual on a (t, x) grid.
    Value {
        #[arg(long)]
        f: Option<String>,
        /// Residual threshold for the verdict.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Optimal strategy against the per-step responder.
    Game {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Strategy constant; defaults to the smallest admissible one.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Lower-bound gap against block responders of length delta.
    Convergence {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Comma-separated, strictly decreasing block lengths.
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Ehrhard inequality for f, g with weights lam, 1 - lam.
    Ehrhard {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        /// Candidate h; the smallest admissible h is built when absent.
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        lam: Option<f64>,
    },
    /// Borell's inequality with coefficients lam, mu.
    Borell {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        lam: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Gaussian Brascamp-Lieb type inequality on a projection frame.
    Gbl {
        /// Frame file: `k n`, then per factor `n_i lambda_i` and its rows.
        #[arg(long)]
        frame: Option<PathBuf>,
        /// One field per factor, in frame order.
        #[arg(long, num_args = 1..)]
        fields: Vec<String>,
        /// Comma-separated values of c in (0, 1).
        #[arg(long)]
        c: Option<String>,
    },
    /// Rescaled Phi_c inverse against log as c goes to 0.
    Limits {
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        c: Option<String>,
    },
    /// Generalized mean by quadrature and by its control representation.
    Gm {
        #[arg(long)]
        f: Option<String>,
        /// exp, power:p, xexp:c, gauss_tail or phi.
        #[arg(long)]
        mean: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Random audit of the Hamiltonian saddle point.
    Saddle {
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        c: Option<f64>,
        /// Number of random draws.
        #[arg(long)]
        paths: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Value { .. } => "value",
            Command::Game { .. } => "game",
            Command::Convergence { .. } => "convergence",
            Command::Ehrhard { .. } => "ehrhard",
            Command::Borell { .. } => "borell",
            Command::Gbl { .. } => "gbl",
            Command::Limits { .. } => "limits",
            Command::Gm { .. } => "gm",
            Command::Saddle { .. } => "saddle",
        }
    }
}
