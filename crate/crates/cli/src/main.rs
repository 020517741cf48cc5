mod error;
mod eval;
mod gen;
mod plan;
mod train;

use clap::{Args, Parser, Subcommand};
use error::CliError;
use nwa_core::grid::Cell;
use std::path::PathBuf;
use std::process::ExitCode;

/// Generate tile-map datasets, train planners, sweep eps and plan single
/// queries.
#[derive(Parser, Debug)]
#[command(name = "nwa", version, about)]
struct Cli {
    /// Worker threads; defaults to every available core. Results do not
    /// depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset of tile maps with oracle shortest paths.
    Gen(gen::GenArgs),
    /// Train one variant and write a checkpoint and a loss CSV.
    Train(train::TrainArgs),
    /// Evaluate checkpoints over a list of eps values and write a sweep CSV.
    Eval(eval::EvalArgs),
    /// Plan one query with a checkpoint and print the path.
    Plan(plan::PlanArgs),
}

/// Where datasets live when no explicit path is given.
#[derive(Args, Debug, Clone)]
pub struct DataRoot {
    /// Root directory for datasets.
    #[arg(long = "data-root", env = "NWA_DATA_ROOT", default_value = "data")]
    pub data_root: PathBuf,
}

/// Parses `row,col`.
pub fn parse_cell(s: &str) -> Result<Cell, String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected row,col, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Cell::new(parse(r)?, parse(c)?))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Gen(a) => gen::run(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Plan(a) => plan::run(a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 on --help
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn cells_parse() {
        assert_eq!(parse_cell("3,4").unwrap(), Cell::new(3, 4));
        assert_eq!(parse_cell(" 0 , 11").unwrap(), Cell::new(0, 11));
        assert!(parse_cell("3").is_err());
        assert!(parse_cell("a,1").is_err());
        assert!(parse_cell("-1,2").is_err());
    }
}
