//! fpdel: fingerprint-verified delegated computation.
//!
//! Subcommands: `demo` runs a built-in scenario and prints its JSON report;
//! `experiment` drives attack trials from a config file, writing CSV and
//! JSONL; `verify` delegates a circuit file, serves it in-process (honestly
//! or maliciously) and verifies the result.
//!
//! Exit codes: 0 success (`verify`: accepted), 1 rejected/nullified result,
//! 2 unknown demo or parse/config error, 3 I/O error. Log level comes from
//! the FPDEL_LOG environment variable.

mod circuit_file;
mod demos;
mod experiment;
mod verify_cmd;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "fpdel",
    version,
    about = "Verify delegated arithmetic with computation fingerprints on a simulated homomorphic backend"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a built-in demonstration and print its JSON report.
    ///
    /// Names: lut-attack, add-fingerprint, logmult-trace, seal-example,
    /// simd-poly, float-hazard.
    Demo { name: String },
    /// Run an attack experiment from a JSON config file.
    Experiment {
        /// Experiment config (scenario, strategy, layout, trials, seed).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Output directory for the CSV and JSONL files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Summary format printed to stdout.
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
    /// Delegate a circuit file, serve it in-process and verify the result.
    Verify {
        /// Circuit description (JSON).
        #[arg(long)]
        circuit: PathBuf,
        /// Input values: integers `4,7` for word circuits, slot vectors
        /// `4.0,0.5;8.0,2.5` for SIMD circuits.
        #[arg(long)]
        inputs: String,
        /// Seed for sampling any unannotated fingerprints.
        #[arg(long)]
        seed: Option<u64>,
        /// Serve maliciously: omit-x, skip-exp, or reorder-simd.
        #[arg(long)]
        malicious: Option<String>,
    },
}

const EXIT_OK: u8 = 0;
const EXIT_REJECTED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FPDEL_LOG")).init();
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Demo { name } => cmd_demo(&name),
        Cmd::Experiment { config, seed, trials, out, format } => {
            cmd_experiment(&config, seed, trials, &out, format)
        }
        Cmd::Verify { circuit, inputs, seed, malicious } => {
            cmd_verify(&circuit, &inputs, seed, malicious.as_deref())
        }
    };
    ExitCode::from(code)
}

fn cmd_demo(name: &str) -> u8 {
    match demos::run(name) {
        Ok(Some(report)) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            EXIT_OK
        }
        Ok(None) => {
            eprintln!("unknown demo {name:?}; available: {}", demos::DEMO_NAMES.join(", "));
            EXIT_USAGE
        }
        Err(err) => {
            eprintln!("demo {name} failed: {err:#}");
            EXIT_IO
        }
    }
}

fn cmd_experiment(
    config_path: &Path,
    seed: Option<u64>,
    trials: Option<u64>,
    out: &Path,
    format: OutputFormat,
) -> u8 {
    let mut config = match experiment::load_config(config_path) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("config error: {err:#}");
            return EXIT_USAGE;
        }
    };
    if let Some(seed) = seed {
        config.seed = Some(seed);
    }
    if let Some(trials) = trials {
        if trials == 0 {
            eprintln!("config error: trials must be at least 1");
            return EXIT_USAGE;
        }
        config.trials = trials;
    }
    match experiment::run(&config, out) {
        Ok(outcome) => {
            match format {
                OutputFormat::Json => {
                    let summary = serde_json::json!({
                        "scenario": config.scenario,
                        "strategy": config.strategy,
                        "stats": outcome.stats,
                        "csv": outcome.csv_path,
                        "jsonl": outcome.jsonl_path,
                    });
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&summary).expect("summary serializes")
                    );
                }
                OutputFormat::Csv => println!("{}", outcome.csv_row),
            }
            EXIT_OK
        }
        Err(err) => {
            // configuration-shaped problems exit 2, filesystem problems 3
            let text = format!("{err:#}");
            eprintln!("experiment failed: {text}");
            if text.contains("cannot create") || text.contains("cannot write") {
                EXIT_IO
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn cmd_verify(
    circuit_path: &Path,
    inputs: &str,
    seed: Option<u64>,
    malicious: Option<&str>,
) -> u8 {
    let text = match std::fs::read_to_string(circuit_path) {
        Ok(t) => t,
        Err(err) => {
            eprintln!("cannot read {}: {err}", circuit_path.display());
            return EXIT_USAGE;
        }
    };
    let file = match circuit_file::CircuitFile::parse(&text) {
        Ok(f) => f,
        Err(err) => {
            eprintln!("circuit error: {err:#}");
            return EXIT_USAGE;
        }
    };
    match verify_cmd::run(&file, inputs, seed, malicious) {
        Ok(run) => {
            println!("{}", serde_json::to_string_pretty(&run.report).expect("report serializes"));
            if run.accepted {
                EXIT_OK
            } else {
                EXIT_REJECTED
            }
        }
        Err(err) => {
            eprintln!("verify failed: {err:#}");
            EXIT_USAGE
        }
    }
}
