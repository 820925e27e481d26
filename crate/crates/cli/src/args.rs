use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "etdb",
    version,
    about = "Detailed balance checks for quantum channels"
)]
pub struct Cli {
    /// Pass/fail threshold for the balance checks (Frobenius norm).
    #[arg(long, global = true, value_parser = positive_f64)]
    pub tol: Option<f64>,

    /// Seed for the random generators.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// JSON file `{"basis": matrix}` with an eigenbasis of the state to use
    /// instead of the canonical one.
    #[arg(long, global = true)]
    pub basis: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a balance check; exit 0 pass, 1 fail, 2 not evaluable, 3 input error.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Compute a dual channel and write it as JSON.
    Dual {
        #[arg(value_enum)]
        kind: DualKind,
        #[command(flatten)]
        inputs: Inputs,
        /// Parity on the output system, when it differs from `--parity`.
        #[arg(long)]
        parity_out: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the elementary transitions of a channel and their reverses.
    Decompose {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Write a named example to a directory.
    Generate {
        /// cycle3, depolarizing2, shift-clock:M, classical-db3, random-etdb:M or random-etdb-p:M
        example: String,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the quantum channel of a classical chain.
    Embed {
        #[arg(long)]
        chain: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the diagonal state of the chain's distribution here.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Write the reverse of a classical chain.
    Reverse {
        #[arg(long)]
        chain: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Inputs {
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Parity operation (`"kind": "parity"`).
    #[arg(long)]
    pub parity: Option<PathBuf>,
    /// Reversing operation (`"kind": "reversing"`).
    #[arg(long)]
    pub theta: Option<PathBuf>,
    /// Classical chain; replaces `--channel` and `--state` by its embedding.
    #[arg(long)]
    pub chain: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Etdb,
    Sqdb,
    EtdbP,
    SqdbTheta,
    Classical,
    ClassicalP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DualKind {
    Prime,
    Ac,
    Kms,
    Parity,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(_) => Err("tolerance must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}
