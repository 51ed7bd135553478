use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dppmc_cli::aggregate::summarize;
use dppmc_cli::config::{parse_seed_list, ExperimentConfig};
use dppmc_cli::runner::{read_records, run_experiment};
use dppmc_cli::suite::{format_table, run_suite};
use dppmc_cli::svg::{render_curves, PlotOptions, Scale};
use dppmc_cli::CliError;

/// Exit code when `theory-check` finds a failing check.
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "dppmc", version, about = "DPP-based Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds; overrides the config and DPPMC_SEED.
        #[arg(long)]
        seeds: Option<String>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the built-in variance-reduction and orthogonality checks.
    TheoryCheck {
        /// Print full reports as JSON instead of a table.
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
    },
    /// Render median/IQR curves from a records CSV.
    Plot {
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Linear y axis instead of log.
        #[arg(long)]
        linear: bool,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            jobs,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(list) = seeds {
                cfg.seeds = parse_seed_list(&list)?;
            } else if let Ok(list) = std::env::var("DPPMC_SEED") {
                cfg.seeds = parse_seed_list(&list)?;
            }
            if let Some(dir) = out {
                cfg.output = Some(dir);
            }
            cfg.validate()?;
            let dir = cfg.output_dir();
            let output = run_experiment(&cfg, &dir, jobs)?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            for f in &output.files {
                println!("wrote {}", f.display());
            }
            if !output.failures.is_empty() {
                for f in &output.failures {
                    eprintln!("error: {f}");
                }
                return Ok(2);
            }
            Ok(0)
        }
        Command::TheoryCheck { json, seed, trials } => {
            let results = run_suite(seed, trials)?;
            if json {
                let text = serde_json::to_string_pretty(&results).map_err(|e| CliError::Runtime(e.to_string()))?;
                println!("{text}");
            } else {
                print!("{}", format_table(&results));
            }
            Ok(if results.iter().all(|r| r.passed) {
                0
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Plot { records, out, linear } => {
            let text = std::fs::read_to_string(&records)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", records.display())))?;
            let digest = text
                .lines()
                .find_map(|l| l.strip_prefix("# config_digest="))
                .map(str::to_string);
            let recs = read_records(&text)?;
            let rows = summarize(&recs);
            let title = records
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let svg = render_curves(
                &rows,
                &PlotOptions {
                    title,
                    y_scale: if linear { Scale::Linear } else { Scale::Log },
                    digest,
                },
            )?;
            std::fs::write(&out, svg)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
