use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use groupoid_ricci_cli::{emit_report, preset, run_scenario, CliError, Format, RunOptions, ScenarioConfig, PRESET_NAMES};
use log::error;

#[derive(Parser)]
#[command(name = "groupoid-ricci", version, about = "Run reduced groupoid Ricci flow scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file or a built-in preset.
    Run {
        /// TOML scenario file.
        config: Option<PathBuf>,
        /// Use a built-in preset instead of a file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Directory for CSV and JSON artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// json, csv or human.
        #[arg(long, default_value = "human")]
        format: String,
        /// Seed for randomized perturbations.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// List the built-in presets, or print one as TOML.
    Presets {
        #[arg(long)]
        dump: Option<String>,
    },
    /// Validate a config file without running it.
    Check { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml(&text)
}

fn named(name: &str) -> Result<ScenarioConfig, CliError> {
    preset(name).ok_or_else(|| {
        CliError::Usage(format!("unknown preset `{name}` (known: {})", PRESET_NAMES.join(", ")))
    })
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run {
            config,
            preset,
            out_dir,
            format,
            seed,
            tolerance_scale,
        } => {
            let format: Format = format.parse()?;
            let config = match (config, preset) {
                (Some(path), None) => load(&path)?,
                (None, Some(name)) => named(&name)?,
                _ => return Err(CliError::Usage("give either a config path or --preset".into())),
            };
            let opts = RunOptions {
                out_dir,
                seed,
                tolerance_scale,
            };
            let report = run_scenario(&config, &opts)?;
            std::io::stdout()
                .write_all(&emit_report(&report, format))
                .map_err(|source| CliError::Io {
                    path: "stdout".into(),
                    source,
                })?;
            Ok(report.passed)
        }
        Command::Presets { dump: Some(name) } => {
            print!("{}", named(&name)?.to_toml());
            Ok(true)
        }
        Command::Presets { dump: None } => {
            for name in PRESET_NAMES {
                let c = named(name)?;
                let suites: Vec<&str> = c.suites.iter().map(|s| s.name()).collect();
                println!("{name:<22} n={:<4} t_end={:<6} suites: {}", c.grid.n_nodes, c.flow.t_end, suites.join(", "));
            }
            Ok(true)
        }
        Command::Check { config } => {
            let c = load(&config)?;
            println!("{}: ok ({} suites)", c.name, c.suites.len());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
