use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tdeuler_lab::config::{self, ScenarioConfig};
use tdeuler_lab::sweep::{self, Axis, RunStatus};
use tdeuler_lab::{io, presets, run_scenario, RayonMap, Result};

/// Numerical lab for damped compressible Euler flow.
///
/// Exit status: 0 when every verdict passes, 1 when any fails, 2 on error.
#[derive(Parser)]
#[command(name = "tdeuler", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario from a TOML file or a preset name.
    Run {
        config: String,
        /// Override a field, e.g. `--set damping.lambda=0.8`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Root directory for run output (default: `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of one or more parameter axes.
    Sweep {
        config: String,
        /// `name=v1,v2,...` with name one of lambda, mu, eps, N, delta, gamma
        /// or a dotted config path.
        #[arg(long = "axis", value_name = "NAME=VALUES", required = true)]
        axis: Vec<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the built-in presets.
    ListPresets,
    /// Print a preset as TOML.
    ShowPreset { name: String },
    /// Re-render `summary.txt` of a finished run and print it.
    Report { dir: PathBuf },
}

fn overrides(set: &[String]) -> Result<Vec<(String, toml::Value)>> {
    set.iter().map(|s| config::parse_override(s)).collect()
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, set, out } => {
            let cfg = ScenarioConfig::load(&config, &overrides(&set)?)?;
            let root = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
            let mut outcome = run_scenario(&cfg, &RayonMap)?;
            let dir = io::persist(&root, &mut outcome)?;
            print!("{}", outcome.report.summary());
            println!("written to {}", dir.display());
            Ok(outcome.report.passed())
        }
        Command::Sweep { config, axis, set, out, jobs } => {
            let base = overrides(&set)?;
            let axes = axis.iter().map(|a| Axis::parse(a)).collect::<Result<Vec<_>>>()?;
            let root = match out {
                Some(r) => r,
                None => PathBuf::from(ScenarioConfig::load(&config, &base)?.output.dir),
            };
            std::fs::create_dir_all(&root).map_err(|e| tdeuler_lab::LabError::io(&root, e))?;
            let runs = sweep::sweep(&config, &base, &axes, &root, jobs)?;
            let table = root.join("sweep.csv");
            sweep::write_summary(&table, &axes, &runs)?;
            for run in &runs {
                let label: Vec<String> = run.settings.iter().map(|(k, v)| format!("{k}={v}")).collect();
                let status = match &run.status {
                    RunStatus::Passed => "PASS".to_string(),
                    RunStatus::Failed => format!("FAIL ({} of {})", run.failed, run.passed + run.failed),
                    RunStatus::Error(e) => format!("ERROR {e}"),
                };
                println!("{:<40} {status}", label.join(" "));
            }
            println!("summary in {}", table.display());
            Ok(runs.iter().all(|r| r.status == RunStatus::Passed))
        }
        Command::ListPresets => {
            for (name, about) in presets::CATALOG {
                println!("{name:<24} {about}");
            }
            Ok(true)
        }
        Command::ShowPreset { name } => {
            print!("{}", presets::preset(&name)?.to_toml_string()?);
            Ok(true)
        }
        Command::Report { dir } => {
            let (report, text) = io::rerender(&dir)?;
            print!("{text}");
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
