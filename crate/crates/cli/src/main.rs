//! `migp`: operator tool for building, serving and querying a similarity-aware
//! breach-checking service, plus the offline analyses around it.

mod commands;
mod config;
mod secrets;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "migp", version, about = "Compromised-credential checking with similarity")]
struct Cli {
    /// Log filter (e.g. `info`, `migp_core=debug`); overrides the config.
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a raw `username<TAB>password` breach file.
    Clean(CleanArgs),
    /// Mine ranked transformation rules from password pairs.
    Mine(MineArgs),
    /// Build the bucket store from a cleaned corpus.
    Build(BuildArgs),
    /// Serve a store over HTTP.
    Serve(ServeArgs),
    /// Check one credential against a server.
    Query(QueryArgs),
    /// Run the greedy extraction attack over a parameter grid.
    Attack(AttackArgs),
    /// Generate synthetic distributions, pair corpora and credential corpora.
    Synth(SynthArgs),
    /// Re-key a store under a fresh PRF key.
    Rotate(RotateArgs),
    /// Measure local cost and pick rate-limiting parameters.
    Calibrate(CalibrateArgs),
    /// Split a rule pool between server-side and client-side variants.
    Split(SplitArgs),
}

#[derive(Args)]
pub struct CleanArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the per-reason counts here instead of stderr.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct MineArgs {
    /// `password1<TAB>password2` lines.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub max_rules: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "mined")]
    pub name: String,
}

#[derive(Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Seed for generating missing key material; random when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the blocklist, one password per line.
    #[arg(long)]
    pub blocklist_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `listen` from the config.
    #[arg(long)]
    pub listen: Option<std::net::SocketAddr>,
}

#[derive(Args)]
pub struct QueryArgs {
    /// Server base URL, e.g. `http://127.0.0.1:8080`.
    #[arg(long)]
    pub endpoint: String,
    #[arg(long)]
    pub username: String,
    /// The password; `-` reads one line from stdin.
    #[arg(long)]
    pub password: String,
    /// Client-side variants to check alongside the password.
    #[arg(short, long, default_value_t = 10)]
    pub m: usize,
    /// Client rule set: `das-r` or a rule-set file.
    #[arg(long, default_value = "das-r")]
    pub rules: String,
    #[arg(long)]
    pub token: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(Args)]
pub struct AttackArgs {
    /// `probability<TAB>password` lines; a synthetic distribution when absent.
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long, default_value_t = 2024)]
    pub synth_seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub synth_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub synth_s: f64,
    /// Variant rules: `das-r` or a rule-set file.
    #[arg(long, default_value = "das-r")]
    pub rules: String,
    #[arg(long, value_delimiter = ',', default_value = "0,10")]
    pub n_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub beta_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub q_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub m_grid: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub targets: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restrict the attacker to the k most probable passwords.
    #[arg(long)]
    pub candidate_k: Option<usize>,
    /// Count success only on a match answer, not on the final guess.
    #[arg(long)]
    pub no_final_guess: bool,
    /// Draw targets only among non-blocklisted passwords.
    #[arg(long)]
    pub exclude_blocked_targets: bool,
    /// Also write the rows as tab-separated values.
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub size: usize,
    /// Zipf exponent over popularity ranks.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Distribution output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also emit same-user password pairs with a planted tweak.
    #[arg(long)]
    pub pairs_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub pairs_count: usize,
    /// Planted transformation path, e.g. `ins:7:-1`.
    #[arg(long, default_value = "ins:7:-1")]
    pub plant: String,
    #[arg(long, default_value_t = 0.4)]
    pub plant_rate: f64,
    /// Also emit a credential corpus sampled from the distribution.
    #[arg(long)]
    pub corpus_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub corpus_size: usize,
}

#[derive(Args)]
pub struct RotateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Seed for the new key; random when absent.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Backend {
    Timelock,
    Slow,
    Salted,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub backend: Backend,
    #[arg(long, default_value_t = 100)]
    pub target_ms: u64,
    /// Time-lock modulus size used for the measurement.
    #[arg(long, default_value_t = 2048)]
    pub bits: usize,
    /// Write the chosen parameter into this config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct SplitArgs {
    /// Vulnerable `leaked<TAB>target` pairs.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Candidate rules: `das-r` or a rule-set file.
    #[arg(long, default_value = "das-r")]
    pub pool: String,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long)]
    pub server_out: Option<PathBuf>,
    #[arg(long)]
    pub client_out: Option<PathBuf>,
}

pub(crate) fn init_logging(level: Option<&str>, default: &str) {
    let filter = match level {
        Some(l) => EnvFilter::new(l),
        None => EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default)),
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = cli.log_level.as_deref();
    let result = match cli.command {
        Command::Clean(a) => {
            init_logging(level, "warn");
            commands::data::clean(&a)
        }
        Command::Mine(a) => {
            init_logging(level, "warn");
            commands::data::mine(&a)
        }
        Command::Build(a) => commands::store::build(&a, level),
        Command::Serve(a) => commands::net::serve(&a, level),
        Command::Query(a) => {
            init_logging(level, "warn");
            commands::net::query(&a)
        }
        Command::Attack(a) => {
            init_logging(level, "warn");
            commands::lab::attack(&a)
        }
        Command::Synth(a) => {
            init_logging(level, "warn");
            commands::data::synth(&a)
        }
        Command::Rotate(a) => commands::store::rotate(&a, level),
        Command::Calibrate(a) => {
            init_logging(level, "warn");
            commands::lab::calibrate(&a)
        }
        Command::Split(a) => {
            init_logging(level, "warn");
            commands::data::split(&a)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
