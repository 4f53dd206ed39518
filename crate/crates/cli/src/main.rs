//! `ctgame`: runs the guessing game, best-response construction, eps sweeps
//! and invariant suites from the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use ctgame::engine::catalog::reference_catalog;
use ctgame::engine::strategy::Player;
use ctgame::harness::{
    self, cmd_ctmp, cmd_guess, cmd_sweep, cmd_verify, parse_eps_list, parse_model, parse_strategy, Command,
    ExperimentConfig, Format, Meta, Mode, Report, VerifyOptions,
};
use ctgame::random_function::{constant_sections, generate_dyadic_uniform, generate_piecewise};
use ctgame::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PARSE: u8 = 3;

#[derive(Parser)]
#[command(name = "ctgame", version, about = "Random-function guessing and continuous-time matching pennies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Play α_ε against a random-function model for each eps.
    Guess(RunArgs),
    /// Build and verify the response guaranteeing 1 - eps against a mixed strategy.
    Ctmp(RunArgs),
    /// Expected payoff of α_ε as eps shrinks (at least three values).
    Sweep(RunArgs),
    /// Run every invariant suite; exits 1 if any fails.
    Verify(VerifyArgs),
    /// Write a model or strategy file to stdout.
    Generate {
        #[command(subcommand)]
        what: Generate,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
            FormatArg::Both => Format::Both,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for report files; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct RunArgs {
    /// Random-function model (guess, sweep).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Opponent mixed strategy (ctmp).
    #[arg(long)]
    strategy: Option<PathBuf>,
    /// Comma-separated eps values, as decimals or p/q.
    #[arg(long, default_value = "")]
    eps: String,
    /// Discount rate (ctmp).
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Sample count for --mode mc.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefix pairs per strategy in the non-anticipativity suite.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Replace honest responders with fixtures that read unrevealed play.
    #[arg(long)]
    inject_cheater: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Subcommand)]
enum Generate {
    /// Uniform model over level-n dyadic sections.
    Dyadic {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded model with rational breakpoints.
    Piecewise {
        #[arg(long)]
        max_pieces: usize,
        #[arg(long)]
        atoms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The two constant sections, equally likely.
    ConstantSections,
    /// A reference mixed strategy by label.
    Catalog {
        /// pure-constant, constant-mixture, grid-switcher, delayed-copier or alternating-segment.
        name: String,
        #[arg(long, value_enum, default_value = "aqua")]
        player: PlayerArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlayerArg {
    Aqua,
    Bard,
}

/// Writes to stdout, ignoring a closed pipe.
fn out(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, Error> {
    path.as_ref().ok_or_else(|| Error::Usage(format!("missing {flag}")))
}

fn config(command: Command, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mode = match args.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Mc => Mode::Mc { samples: args.samples },
    };
    Ok(ExperimentConfig {
        command,
        model: args.model.as_ref().map(|p| p.display().to_string()),
        strategy: args.strategy.as_ref().map(|p| p.display().to_string()),
        eps: parse_eps_list(&args.eps).map_err(|e| Error::Usage(e.to_string()))?,
        r: args.r,
        seed: args.seed,
        mode,
    })
}

fn emit<C: serde::Serialize>(
    report: &Report<C>,
    csv: String,
    output: &OutputArgs,
    started: Instant,
) -> Result<bool, Error> {
    let meta = Meta {
        version: harness::VERSION,
        command: report.config.command,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let format = Format::from(output.format);
    match &output.out {
        Some(dir) => {
            let stem = format!("{:?}", report.config.command).to_lowercase();
            for path in harness::write_outputs(dir, &stem, report, &csv, &meta, format)? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            if matches!(format, Format::Json | Format::Both) {
                out(&(serde_json::to_string_pretty(report).expect("reports serialize") + "\n"));
            }
            if matches!(format, Format::Csv | Format::Both) {
                out(&csv);
            }
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(report.pass)
}

fn run(cli: Cli) -> Result<bool, Error> {
    let started = Instant::now();
    match cli.command {
        Cmd::Guess(args) => {
            let model = parse_model(&read(required(&args.model, "--model")?)?)?;
            let report = cmd_guess(&config(Command::Guess, &args)?, &model)?;
            emit(&report, harness::guess_csv(&report)?, &args.output, started)
        }
        Cmd::Sweep(args) => {
            let model = parse_model(&read(required(&args.model, "--model")?)?)?;
            let report = cmd_sweep(&config(Command::Sweep, &args)?, &model)?;
            emit(&report, harness::sweep_csv(&report)?, &args.output, started)
        }
        Cmd::Ctmp(args) => {
            let spec = parse_strategy(&read(required(&args.strategy, "--strategy")?)?)?;
            let report = cmd_ctmp(&config(Command::Ctmp, &args)?, &spec)?;
            emit(&report, harness::ctmp_csv(&report)?, &args.output, started)
        }
        Cmd::Verify(args) => {
            let config = ExperimentConfig { seed: args.seed, ..ExperimentConfig::new(Command::Verify) };
            let options = VerifyOptions { inject_cheater: args.inject_cheater, samples: args.samples };
            let report = cmd_verify(&config, &options)?;
            for s in &report.cases {
                eprintln!("{} {}: {}", if s.passed { "PASS" } else { "FAIL" }, s.name, s.detail);
            }
            emit(&report, harness::verify_csv(&report)?, &args.output, started)
        }
        Cmd::Generate { what } => {
            let json = match what {
                Generate::Dyadic { n, seed } => serde_json::to_value(generate_dyadic_uniform(n, seed)?),
                Generate::Piecewise { max_pieces, atoms, seed } => {
                    serde_json::to_value(generate_piecewise(max_pieces, atoms, seed)?)
                }
                Generate::ConstantSections => serde_json::to_value(constant_sections()),
                Generate::Catalog { name, player } => {
                    let player = match player {
                        PlayerArg::Aqua => Player::Aqua,
                        PlayerArg::Bard => Player::Bard,
                    };
                    let spec = reference_catalog(player)
                        .into_iter()
                        .find(|s| s.label == name)
                        .ok_or_else(|| Error::Config(format!("no catalog strategy named {name:?}")))?;
                    serde_json::to_value(spec)
                }
            };
            let json: Value = json.expect("models serialize");
            out(&(serde_json::to_string_pretty(&json).expect("values serialize") + "\n"));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Parse(_) => EXIT_PARSE,
                Error::Usage(_) | Error::Config(_) | Error::Domain(_) => EXIT_USAGE,
                Error::Protocol(_) | Error::Inconsistency(_) => EXIT_VIOLATION,
            })
        }
    }
}
