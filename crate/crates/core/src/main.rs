use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isac_secure::config::ExperimentConfig;
use isac_secure::experiments::{run_fig_a, run_fig_b, run_fig_c, run_sweep, Table};
use isac_secure::stochastic::AveragingMode;
use isac_secure::validation::run_validate;
use isac_secure::{Error, Result};

/// Sensing and secrecy analysis of an artificial-noise-aided ISAC downlink.
#[derive(Parser, Debug)]
#[command(name = "isac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (`key = value` lines); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials for the figure columns.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Output CSV file (figures, sweep) or directory (validate).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Normalisation of truncated angle averages.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<AveragingMode>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Ergodic user, eavesdropper and secrecy rates against tau.
    FigA,
    /// Ergodic CRBs against tau.
    FigB,
    /// CCDFs of the angle CRBs at ccdf_tau.
    FigC,
    /// Headline quantities against `sweep_var` over `sweep_grid`.
    Sweep,
    /// Run the invariant and oracle suite.
    Validate,
}

fn parse_mode(s: &str) -> std::result::Result<AveragingMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(table: &Table, out: Option<&PathBuf>) -> Result<()> {
    let csv = table.to_csv();
    match out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(csv.as_bytes()).ok();
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(cli)?;
    let table = match cli.command {
        Command::FigA => run_fig_a(&cfg)?,
        Command::FigB => run_fig_b(&cfg)?,
        Command::FigC => run_fig_c(&cfg)?,
        Command::Sweep => run_sweep(&cfg)?,
        Command::Validate => {
            let outcome = run_validate(&cfg)?;
            print!("{}", outcome.report);
            if let Some(dir) = &cli.out {
                outcome.write_to(dir)?;
            }
            return Ok(outcome.passed());
        }
    };
    emit(&table, cli.out.as_ref())?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
