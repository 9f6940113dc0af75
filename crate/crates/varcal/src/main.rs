//! Thin command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use varcal::cli::{report, run, CellFilter, CliError, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "varcal",
    version,
    about = "Proxy-reliance-controlled conformal recalibration of one-sided Value-at-Risk"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and cache the configured data as canonical panel CSVs
    Ingest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the walk-forward backtest matrix
    Backtest {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores)
        #[arg(long)]
        workers: Option<usize>,
        /// Glob over asset/baseline/method/scenario, e.g. "SYN0/hs/*/clean"
        #[arg(long)]
        cells: Option<String>,
    },
    /// Emit plot-data CSVs and a markdown summary from a finished run
    Report {
        /// Run directory containing manifest.json
        #[arg(long)]
        run: PathBuf,
        /// Output directory (default: RUN/report)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the theory verification suite (exit 0 iff all checks pass)
    VerifyTheory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the report artifacts
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { config, out } => run::cmd_ingest(&config, &out),
        Command::Backtest {
            config,
            out,
            seed,
            workers,
            cells,
        } => {
            let filter = match cells {
                Some(p) => CellFilter::parse(&p)?,
                None => CellFilter::all(),
            };
            run::cmd_backtest(&config, &out, seed, workers, &filter)
        }
        Command::Report { run: run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.join("report"));
            report::cmd_report(&run_dir, &out)
        }
        Command::VerifyTheory { seed, out } => report::cmd_verify_theory(seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/error text
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
