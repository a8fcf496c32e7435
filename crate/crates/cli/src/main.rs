//! `active-eval`: label-efficient estimation of a model's pool risk.

mod commands;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use active_eval::allocate::{AllocRule, DEFAULT_DELTA};
use active_eval::parse::ParserKind;
use active_eval::stratify::{StratifyMethod, DEFAULT_STRATA};
use active_eval_genclient::{GenError, RequestMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "active-eval",
    version,
    about = "Stratified active testing of LLM evaluations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand. Each subcommand reads the ones it needs.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pool file (JSONL). Without it the built-in synthetic reference pool is used.
    #[arg(long, global = true)]
    pub pool: Option<PathBuf>,
    /// Label budget M.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Comma-separated label budgets for `run`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    /// Monte Carlo trials per (method, budget) cell.
    #[arg(long, global = true, default_value_t = active_eval::harness::DEFAULT_TRIALS)]
    pub trials: usize,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Requested number of strata H.
    #[arg(long = "strata", global = true, default_value_t = DEFAULT_STRATA)]
    pub strata: usize,
    /// Proxy-Neyman smoothing offset.
    #[arg(long, global = true, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, global = true, default_value = "adaptive_se", value_parser = parse_enum::<StratifyMethod>)]
    pub stratify_method: StratifyMethod,
    /// Allocation rule, or `uniform` for unstratified sampling. `run` sweeps
    /// every rule when this is not given.
    #[arg(long, global = true, value_parser = parse_method)]
    pub alloc_rule: Option<MethodArg>,
    /// Answer parser for raw generations.
    #[arg(long, global = true, default_value = "mc_letter", value_parser = parse_enum::<ParserKind>)]
    pub parser: ParserKind,
    /// How target losses are obtained from pool records.
    #[arg(long, global = true, value_enum, default_value_t = LossRuleArg::ExactMatch)]
    pub loss_rule: LossRuleArg,
    /// Output file, or output directory for `run`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Uniform,
    Rule(AllocRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossRuleArg {
    /// 0/1 loss of the parsed target generation against the gold answer,
    /// falling back to `target_loss`.
    ExactMatch,
    /// Always use `target_loss`.
    Provided,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print semantic entropy and self-consistency per instance.
    Signals,
    /// Print the stratification of the pool.
    Stratify,
    /// Print the per-stratum allocation of a budget.
    Allocate,
    /// One estimation run: sample, reveal labels, print the estimate.
    Estimate,
    /// Monte Carlo sweep over methods and budgets.
    Run,
    /// Write a synthetic pool.
    Synth(commands::SynthArgs),
    /// Render a saved report.json as a table, CSV or JSON.
    Report(commands::ReportArgs),
    /// Query a chat-completions endpoint for k generations per input.
    Generate(commands::GenerateArgs),
}

pub fn parse_enum<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

fn parse_method(s: &str) -> Result<MethodArg, String> {
    if s == "uniform" {
        Ok(MethodArg::Uniform)
    } else {
        parse_enum(s).map(MethodArg::Rule)
    }
}

/// Failures split by exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    /// The reader of stdout went away; not an error.
    BrokenPipe,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::BrokenPipe => 0,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::BrokenPipe => f.write_str("broken pipe"),
        }
    }
}

impl From<active_eval::Error> for CliError {
    fn from(e: active_eval::Error) -> Self {
        match e {
            active_eval::Error::Config(m) => CliError::Config(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Config(m) => CliError::Config(m),
            GenError::Pool(p) => p.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ModeArg {
    /// One request with n = k.
    #[default]
    Batched,
    /// k requests with n = 1.
    Independent,
}

impl From<ModeArg> for RequestMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Batched => RequestMode::Batched,
            ModeArg::Independent => RequestMode::Independent,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match &cli.command {
        Command::Signals => commands::signals(c),
        Command::Stratify => commands::stratify(c),
        Command::Allocate => commands::allocate(c),
        Command::Estimate => commands::estimate(c),
        Command::Run => commands::run(c),
        Command::Synth(a) => commands::synth(c, a),
        Command::Report(a) => commands::report(c, a),
        Command::Generate(a) => commands::generate(c, a),
    };
    match result {
        Ok(()) | Err(CliError::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("active-eval: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
