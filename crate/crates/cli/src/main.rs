//! `speclab`: experiment runner for boundary flux statistics of Dirichlet
//! eigenfunctions. `speclab run <config>` executes the full pipeline; the
//! stage subcommands rerun individual steps against existing artifacts.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
//! 3 computation error. Failures also leave an `error.json` record in the
//! output directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use speclab_core::harness::{self, CheckResult, Stage};
use speclab_core::Error;

#[derive(Parser)]
#[command(
    name = "speclab",
    version,
    about = "Dirichlet eigenpairs, boundary flux densities, and packet cancellation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Experiment plan (TOML).
    config: PathBuf,
    /// Override a config entry by dotted path, e.g. --set solver.k_count=500
    /// or --set packets.0.alpha=0.3. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in dependency order and write the manifest.
    Run(StageArgs),
    /// Solve for the eigenpairs and write spectrum.csv.
    Spectrum(StageArgs),
    /// Boundary flux functionals per mode: rellich.csv and weights.json.
    Rellich(StageArgs),
    /// Packet energy ratios per schedule: packets_<i>.csv and fits.
    Packets(StageArgs),
    /// Correlation-average envelopes and trends: cancellation_fits.json.
    Cancellation(StageArgs),
    /// Integrated counting/boundary/pairing fits: weyl_fits.json.
    Weyl(StageArgs),
    /// Aggregate fits and checks into report.txt.
    Report(StageArgs),
}

impl Command {
    fn args(&self) -> &StageArgs {
        match self {
            Command::Run(a)
            | Command::Spectrum(a)
            | Command::Rellich(a)
            | Command::Packets(a)
            | Command::Cancellation(a)
            | Command::Weyl(a)
            | Command::Report(a) => a,
        }
    }
}

fn print_checks(checks: &[CheckResult]) {
    for c in checks {
        println!("{} {} :: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}

/// Best-effort machine-readable error record next to the other artifacts.
fn record_error(out_dir: Option<&str>, err: &Error) {
    let kind = if err.is_config() { "config" } else { "computation" };
    let record = serde_json::json!({ "kind": kind, "error": err.to_string() });
    if let Some(dir) = out_dir {
        let path = std::path::Path::new(dir).join("error.json");
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = speclab_core::io::write_json(&path, &record);
        }
    }
    eprintln!("{record}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();

    let loaded = match harness::load_config(&args.config, &args.set) {
        Ok(loaded) => loaded,
        Err(err) => {
            record_error(None, &err);
            return ExitCode::from(if err.is_config() { 2 } else { 3 });
        }
    };
    let out_dir = loaded.config.outputs.dir.clone();

    let result = match &cli.command {
        Command::Run(_) => harness::run_all(&loaded).map(|report| {
            print_checks(&report.checks);
            println!(
                "{}: {} artifacts in {}",
                if report.passed { "ok" } else { "check failure" },
                report.artifacts.len(),
                out_dir
            );
            report.passed
        }),
        other => {
            let stage = match other {
                Command::Spectrum(_) => Stage::Spectrum,
                Command::Rellich(_) => Stage::Rellich,
                Command::Packets(_) => Stage::Packets,
                Command::Cancellation(_) => Stage::Cancellation,
                Command::Weyl(_) => Stage::Weyl,
                Command::Report(_) => Stage::Report,
                Command::Run(_) => unreachable!("handled above"),
            };
            harness::run_stage(&loaded.config, stage).map(|checks| {
                print_checks(&checks);
                let passed = checks.iter().all(|c| c.passed);
                println!("{}: stage '{}' done", if passed { "ok" } else { "check failure" }, stage.name());
                passed
            })
        }
    };

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            record_error(Some(&out_dir), &err);
            ExitCode::from(if err.is_config() { 2 } else { 3 })
        }
    }
}
