use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtraj_cli::{load_config, run_scenario, SCENARIOS};

#[derive(Parser)]
#[command(
    name = "qtraj",
    version,
    about = "Thermodynamics of imperfectly monitored quantum-jump trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `scenario` in the config.
        #[arg(long)]
        scenario: Option<String>,
        /// Overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sets both `samples` and `trajectories`.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Parse and validate a config file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List registered scenarios.
    ListScenarios,
}

fn run(cli: Cli) -> Result<bool, qtraj_cli::CliError> {
    match cli.command {
        Command::Run {
            config,
            scenario,
            out,
            seed,
            samples,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = scenario {
                cfg.scenario = Some(s);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = samples {
                cfg.samples = n;
                cfg.trajectories = n;
            }
            if let Some(o) = out {
                cfg.output = Some(o.display().to_string());
            }
            cfg.validate()?;
            let dir = PathBuf::from(cfg.output.clone().unwrap_or_else(|| "out".into()));
            let result = run_scenario(&cfg)?;
            for path in result.write(&dir)? {
                eprintln!("wrote {}", path.display());
            }
            print!("{}", result.summary());
            Ok(result.passed())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}", cfg.echo());
            Ok(true)
        }
        Command::ListScenarios => {
            for (name, about) in SCENARIOS {
                println!("{name:<16} {about}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
