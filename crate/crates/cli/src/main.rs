use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reqsel_cli::{AnalyzeArgs, ServeArgs, EXIT_INTERNAL, EXIT_VALIDATION};
use reqsel_core::clustering::{Algorithm, Linkage};
use reqsel_core::pipeline::{DEFAULT_GAP_B, DEFAULT_SEED};
use reqsel_core::validity::DEFAULT_CONNECTIVITY_L;
use reqsel_core::KChoice;

/// Cluster requirements by effort and satisfaction and derive a release plan.
#[derive(Parser)]
#[command(name = "reqsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and emit a JSON report.
    Analyze {
        /// Problem JSON file, or a directory of CSV files.
        problem: PathBuf,
        #[arg(long, default_value = "auto")]
        k: KChoice,
        #[arg(long, value_delimiter = ',', default_value = "kmeans,pam,hierarchical")]
        algorithms: Vec<Algorithm>,
        #[arg(long, default_value = "ward")]
        linkage: Linkage,
        #[arg(long = "connectivity-L", default_value_t = DEFAULT_CONNECTIVITY_L)]
        connectivity_l: usize,
        #[arg(long = "gap-B", default_value_t = DEFAULT_GAP_B)]
        gap_b: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the validity scoreboard as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a problem file and print a summary.
    Validate { problem: PathBuf },
    /// Serve the HTTP JSON API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Problem to register at startup.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Persist sessions as JSON files here and reload them on start.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let (stdout, stderr) = (std::io::stdout(), std::io::stderr());
    let result = match cli.command {
        Command::Analyze {
            problem,
            k,
            algorithms,
            linkage,
            connectivity_l,
            gap_b,
            seed,
            out,
            csv,
        } => {
            let args = AnalyzeArgs {
                problem,
                k,
                algorithms,
                linkage,
                connectivity_l,
                gap_b,
                seed,
                out,
                csv,
            };
            reqsel_cli::analyze(&args, &mut stdout.lock(), &mut stderr.lock())
        }
        Command::Validate { problem } => reqsel_cli::validate(&problem, &mut stdout.lock(), &mut stderr.lock()),
        Command::Serve {
            port,
            problem,
            snapshot_dir,
        } => {
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: cannot start runtime: {e}");
                    return ExitCode::from(EXIT_INTERNAL);
                }
            };
            runtime.block_on(reqsel_cli::serve(ServeArgs {
                port,
                problem,
                snapshot_dir,
            }))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(reqsel_cli::exit_code(&e))
        }
    }
}
