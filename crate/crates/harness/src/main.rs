use caputo_harness::{load_config, output_dir, output_root, replay, run_in, validate, HarnessError, Report};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Runs caputo-core experiments from JSON configs.
#[derive(Parser)]
#[command(name = "caputo-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Overrides the output root environment variable.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Rerun the config embedded in a report and compare key numbers.
    Replay { report: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn summarize(report: &Report) {
    for c in &report.checks {
        let value = c.value.map_or("non-finite".to_string(), |v| format!("{v:.6e}"));
        println!("{} {} = {value} ({:?} {:e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.relation, c.threshold);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
}

fn execute(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run { config, output_root: root } => {
            let cfg = load_config(&config)?;
            let dir = output_dir(&cfg, &root.unwrap_or_else(output_root));
            let start = Instant::now();
            let report = run_in(&cfg, &dir)?;
            summarize(&report);
            println!("{}: {} in {:.2} s, artifacts in {}", report.experiment, if report.passed { "passed" } else { "failed" }, start.elapsed().as_secs_f64(), dir.display());
            Ok(report.passed)
        }
        Command::Replay { report } => {
            let outcome = replay(&report)?;
            for d in &outcome.diffs {
                println!("DIFF {}: recorded {:?}, replayed {:?}", d.name, d.recorded, d.replayed);
            }
            println!("replay: {}", if outcome.agrees() { "identical within tolerance" } else { "mismatch" });
            Ok(outcome.agrees())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            validate(&cfg)?;
            println!("{}: valid", cfg.experiment.name());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
