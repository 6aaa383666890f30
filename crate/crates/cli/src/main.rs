use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::Parser;
use geomlab_cli::{emit_report, parse_formats, run_scenario, Scenario, ScenarioConfig};

/// Exit status for configuration, fixture and I/O errors. Lower codes
/// count failing checks.
const EXIT_ERROR: u8 = 64;
const MAX_FAILING: usize = 63;

/// Run a verification scenario and write its report.
#[derive(Debug, Parser)]
#[command(name = "geomlab", version)]
struct Cli {
    /// bishop-gromov | lorentz-volume | myers | singularity-bound |
    /// mollify-check | cut-locus | table1-audit
    scenario: String,
    /// Scenario configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "geomlab-out")]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated subset of json,csv,svg.
    #[arg(long, default_value = "json,csv,svg", value_parser = parse_formats)]
    formats: std::collections::BTreeSet<geomlab_cli::Format>,
    /// Print only the summary line.
    #[arg(long)]
    quiet: bool,
}

fn run(cli: Cli) -> Result<usize> {
    let scenario: Scenario = cli.scenario.parse()?;
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::new(scenario),
    };
    if cfg.scenario != scenario {
        bail!("config is for scenario `{}`, not `{scenario}`", cfg.scenario);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let report = run_scenario(&cfg)?;
    let files = emit_report(&report, &cli.formats, &cli.out)?;
    if !cli.quiet {
        for check in &report.checks {
            println!("{check}");
        }
        for note in &report.notes {
            println!("note: {note}");
        }
        for file in &files {
            println!("wrote {}", file.display());
        }
    }
    let failing = report.failing().len();
    println!(
        "{scenario}: {} of {} checks pass in {:.2} s",
        report.checks.len() - failing,
        report.checks.len(),
        report.wall_time
    );
    Ok(failing)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(failing) => ExitCode::from(failing.min(MAX_FAILING) as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
