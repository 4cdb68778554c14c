use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trackbench::batch::Execution;
use trackbench::run::{execute, ControllerFilter, Emit, Overrides, RunConfig};
use trackbench_core::sim::PlantMode;

#[derive(Parser)]
#[command(name = "trackbench", version, about = "Closed-loop trajectory tracking benchmark for a differential-drive robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more scenario files.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Controller id, a comma-separated list, or `all`; defaults to the one in each file.
        #[arg(long)]
        controller: Option<ControllerFilter>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of trace, metrics, plotdata.
        #[arg(long, default_value = "trace,metrics")]
        emit: Emit,
        /// Outer and inner loop rates in Hz, e.g. `50,1000`.
        #[arg(long, value_parser = parse_rates)]
        rates: Option<(f64, f64)>,
        #[arg(long)]
        plant: Option<PlantMode>,
        /// Run scenarios one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
}

fn parse_rates(s: &str) -> Result<(f64, f64), String> {
    let (outer, inner) = s.split_once(',').ok_or("expected <outer>,<inner>")?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
    Ok((parse(outer)?, parse(inner)?))
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
    let Command::Run { scenarios, controller, out, seed, emit, rates, plant, sequential } = cli.command;
    let cfg = RunConfig {
        scenarios,
        out,
        controllers: controller.unwrap_or_default(),
        overrides: Overrides { seed, rates, plant },
        emit,
        execution: if sequential { Execution::Sequential } else { Execution::Parallel },
    };
    match execute(&cfg) {
        Ok(summary) => {
            for path in &summary.written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
