use std::path::PathBuf;
use std::process::ExitCode;

use aht_harness::sweep::{parse_values, workers_from_env};
use aht_harness::{build_report, exit, preset, run_experiment, run_sweep, ExperimentConfig, HarnessError, RunStatus, SweepParam, PRESET_NAMES};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aht", version, about = "Transport-flow experiments on the periodic torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Config file, flat `key = value` or JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Named scenario.
    #[arg(long)]
    preset: Option<String>,
    /// Override a key, e.g. `--set sim.t_end=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (same as `--set output=DIR`).
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Source {
    fn resolve(&self) -> Result<ExperimentConfig, HarnessError> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => unreachable!("clap requires one source"),
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        if let Some(dir) = &self.output {
            cfg.output = dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Simulate {
        #[command(flatten)]
        source: Source,
    },
    /// Run one experiment per value of a parameter.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// amplitude, n, theta0_scale or epsilon.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Aggregate every diagnostics.json under a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Print a resolved configuration.
    Show {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        json: bool,
    },
    /// List the available presets.
    Presets,
}

fn simulate(source: &Source) -> Result<u8, HarnessError> {
    let cfg = source.resolve()?;
    let summary = run_experiment(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(match summary.status {
        RunStatus::Completed => exit::OK,
        RunStatus::Blowup => {
            eprintln!("blow-up detected; last finite time {}", summary.t_final);
            exit::BLOWUP
        }
    })
}

fn sweep(source: &Source, param: &str, values: &str) -> Result<u8, HarnessError> {
    let cfg = source.resolve()?;
    let param: SweepParam = param.parse()?;
    let values = parse_values(values)?;
    let rows = run_sweep(&cfg, param, &values, workers_from_env()?)?;
    print!("{}", std::fs::read_to_string(cfg.output.join(aht_harness::sweep::SUMMARY_FILE)).unwrap_or_default());
    let failed = rows.iter().filter(|r| r.status == "error").count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", rows.len());
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { source } => simulate(source),
        Command::Sweep { source, param, values } => sweep(source, param, values),
        Command::Report { dir } => build_report(dir).map(|rows| {
            println!("{} runs aggregated into {}", rows.len(), dir.join(aht_harness::report::REPORT_FILE).display());
            exit::OK
        }),
        Command::Show { source, json } => source.resolve().map(|cfg| {
            print!("{}", if *json { cfg.to_json() + "\n" } else { cfg.to_flat() });
            exit::OK
        }),
        Command::Presets => {
            PRESET_NAMES.iter().for_each(|n| println!("{n}"));
            Ok(exit::OK)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
