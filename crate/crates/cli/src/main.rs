use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use holonomy_cli::error::EXIT_CONFIG;
use holonomy_cli::{run, run_families, RunOptions, Task};

/// Eigenvalue holonomy of parameter-dependent non-Hermitian matrices:
/// discriminant scans, loop tracing, permutation checks, EP classification
/// and waveguide propagation.
#[derive(Parser)]
#[command(name = "specholo", version)]
struct Cli {
    /// JSON job configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for scans and traces (default: all cores).
    #[arg(long, global = true, value_name = "INT")]
    threads: Option<usize>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discriminant field over a plane, with refined zero candidates.
    Scan,
    /// Continue eigenvalues around loops and print their permutations.
    Trace,
    /// Check composition predictions, group closure and deformation invariance.
    Verify,
    /// Encircle a candidate in several planes and report cycle types.
    Classify,
    /// Waveguide propagation: eigenmode fits or merging-path loci.
    Simulate,
    /// List built-in families.
    Families,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if n == 0 || built.is_err() {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let task = match cli.command {
        Command::Families => return ExitCode::from(run_families(cli.out.as_deref(), cli.seed, cli.quiet)),
        Command::Scan => Task::Scan,
        Command::Trace => Task::Trace,
        Command::Verify => Task::Verify,
        Command::Classify => Task::Classify,
        Command::Simulate => Task::Simulate,
    };
    let Some(config) = cli.config else {
        eprintln!("error: `{}` needs --config PATH", task.name());
        return ExitCode::from(EXIT_CONFIG);
    };
    let opts = RunOptions {
        config,
        out: cli.out.unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.seed,
        quiet: cli.quiet,
    };
    ExitCode::from(run(task, &opts))
}
