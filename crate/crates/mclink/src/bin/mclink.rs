use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mclink::error::Error;
use mclink::scenario;

/// Microfluidic molecular-communication link simulator.
#[derive(Parser)]
#[command(name = "mclink", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and export traces + summary.
    Run {
        scenario: PathBuf,
        /// Output root directory (default: $MCLINK_OUT_DIR or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario once per value of a scalar parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted path of the parameter, e.g. experiment.design.thl_mol_per_m3
        #[arg(long)]
        param: String,
        /// Comma-separated list of values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Force a paired analytic/oracle run and report error norms.
    OracleCheck {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse(_) | Error::Config(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn print_metrics(record: &scenario::RunRecord) {
    for (k, v) in &record.metrics {
        println!("metric.{k} = {v:.6e}");
    }
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out } => {
            scenario::run_scenario(&scenario, out.as_deref()).map(|(record, dir)| {
                println!("scenario {} -> {}", record.name, dir.display());
                print_metrics(&record);
            })
        }
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => scenario::sweep(&scenario, &param, &values, out.as_deref()).map(|(records, dir)| {
            println!("sweep {param} over {} values -> {}", records.len(), dir.display());
            for (v, record) in values.iter().zip(&records) {
                println!("-- {param} = {v}");
                print_metrics(record);
            }
        }),
        Command::Validate { scenario } => {
            scenario::ScenarioFile::load(&scenario).map(|(sc, _)| {
                println!("scenario {} is valid", sc.name);
            })
        }
        Command::OracleCheck { scenario, out } => {
            scenario::oracle_check(&scenario, out.as_deref()).map(|(record, dir)| {
                println!("oracle-check {} -> {}", record.name, dir.display());
                print_metrics(&record);
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
