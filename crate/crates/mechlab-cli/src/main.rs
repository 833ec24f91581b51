use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mechlab::simcli::{self, Command, Format, Overrides, ScenarioConfig};
use mechlab::Error;

/// Exit code for malformed arguments and configuration.
const CONFIG_ERROR: u8 = 4;

/// Grid solver, IC auditor and payment synthesizer for dynamic mechanisms with agent exit.
#[derive(Debug, Parser)]
#[command(name = "mechlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check the environment and mechanism assumptions.
    Validate(Common),
    /// Solve the agent's stopping problem and write value tables.
    Solve(Common),
    /// Audit one-shot misreports.
    VerifyIc(Common),
    /// Build payments from the allocation rule and audit them.
    Synthesize(Common),
    /// Optimize the allocation over a parametric family.
    Optimize(Common),
    /// Monte Carlo cross-check of payoffs and exit times.
    Simulate(Common),
    /// Value, potential, threshold and gap tables for plotting.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file; a bare bundled name such as seller_buyer_T2.json also works.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory [default: the scenario's, else ./out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid nodes per period.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed for simulation and optimizer starts.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit thresholds: comma-separated per period, ';' between sweep points.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    /// Literal discounting of the continuation and terminal potentials.
    #[arg(long)]
    strict_literal: bool,
    /// Table format.
    #[arg(long, value_enum)]
    format: Option<TableFormat>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

impl From<TableFormat> for Format {
    fn from(f: TableFormat) -> Self {
        match f {
            TableFormat::Csv => Format::Csv,
            TableFormat::Json => Format::Json,
        }
    }
}

impl Cmd {
    fn split(self) -> (Command, Common) {
        match self {
            Self::Validate(c) => (Command::Validate, c),
            Self::Solve(c) => (Command::Solve, c),
            Self::VerifyIc(c) => (Command::VerifyIc, c),
            Self::Synthesize(c) => (Command::Synthesize, c),
            Self::Optimize(c) => (Command::Optimize, c),
            Self::Simulate(c) => (Command::Simulate, c),
            Self::Report(c) => (Command::Report, c),
        }
    }
}

fn execute(command: Command, args: Common) -> Result<u8, Error> {
    let mut cfg = ScenarioConfig::locate(&args.scenario)?;
    let overrides = Overrides {
        grid: args.grid,
        seed: args.seed,
        eta: args.eta.as_deref().map(simcli::parse_eta_list).transpose()?,
        strict_literal: args.strict_literal,
        format: args.format.map(Format::from),
    };
    overrides.apply(&mut cfg);
    let out = args.out.or_else(|| cfg.output.directory.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = simcli::run(command, &cfg, &out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", outcome.files.len(), out.display());
    Ok(outcome.status.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let (command, args) = cli.command.split();
    match execute(command, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mechlab: {e}");
            ExitCode::from(simcli::error_code(&e) as u8)
        }
    }
}
