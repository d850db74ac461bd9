//! Command-line front end for the capital structure library.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use capstruct::FluctuationContext;
use clap::{Parser, Subcommand};

use commands::Env;
use output::{Manifest, Output};
use scenario::{Case, Overrides, Rate, Scenario};

#[derive(Parser, Debug)]
#[command(name = "capstruct", version, about = "Leland-Toft capital structure under Poisson observation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON with optional `model`, `market` and `run` blocks.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    #[arg(long, value_enum, global = true)]
    case: Option<Case>,

    /// Observation rate; `inf` for continuous observation.
    #[arg(long, global = true)]
    lambda: Option<Rate>,

    /// Target leverage, as a fraction or a percentage.
    #[arg(long, global = true)]
    leverage: Option<f64>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Points per grid.
    #[arg(long, global = true)]
    grid: Option<usize>,

    /// Relative barrier shift for `value`, e.g. -0.3.
    #[arg(long, global = true, allow_hyphen_values = true)]
    vb_offset: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Debt, firm and equity values over an asset grid.
    Value,
    /// Optimal barrier and its observation-rate sweep.
    Barrier,
    /// Distributions of the bankruptcy time and the asset value at bankruptcy.
    Dist,
    /// Firm value as a function of the face value of debt.
    TwoStage,
    /// Leverage calibration and par-spread term structures.
    Spreads,
    /// Monte Carlo oracle run.
    Simulate,
    /// Calibration table over the observation-rate sweep.
    Table1,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Value => "value",
            Command::Barrier => "barrier",
            Command::Dist => "dist",
            Command::TwoStage => "two-stage",
            Command::Spreads => "spreads",
            Command::Simulate => "simulate",
            Command::Table1 => "table1",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut scn = match &cli.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    scn.apply(&Overrides {
        case: cli.case,
        lambda: cli.lambda,
        leverage: cli.leverage,
        seed: cli.seed,
        grid: cli.grid,
        vb_offset: cli.vb_offset,
    });
    scn.validate_run()?;
    let mkt = scn.market()?;
    let model = scn.model()?;
    let env = Env { scn: &scn, ctx: FluctuationContext::new(model), mkt };

    let mut out = Output::new(&cli.out_dir)?;
    out.json("resolved_scenario.json", &scn)?;
    let summary = match cli.command {
        Command::Value => commands::value(&env, &mut out),
        Command::Barrier => commands::barrier(&env, &mut out),
        Command::Dist => commands::dist(&env, &mut out),
        Command::TwoStage => commands::two_stage(&env, &mut out),
        Command::Spreads => commands::spreads(&env, &mut out),
        Command::Simulate => commands::simulate(&env, &mut out),
        Command::Table1 => commands::table1(&env, &mut out),
    }
    .with_context(|| format!("command `{}`", cli.command.name()))?;
    let manifest = Manifest {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        scenario: "resolved_scenario.json",
        outputs: out.written().to_vec(),
        summary,
    };
    out.json("run_manifest.json", &manifest)?;
    log::info!("wrote {} files to {}", out.written().len(), cli.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
