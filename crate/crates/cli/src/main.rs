use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use totem_cli::{cmd_analyze, cmd_run, cmd_serve, cmd_sweep, AnalyzeArgs, Metric};

#[derive(Parser)]
#[command(name = "totem", version, about = "Cultural evolution simulations, analyses and live play sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the master seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the cross product of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute metrics from attempt logs or similarity matrices.
    Analyze {
        /// Session log or simulation replicate file (repeatable).
        #[arg(long = "log")]
        logs: Vec<PathBuf>,
        #[arg(long = "metric", value_enum)]
        metrics: Vec<Metric>,
        #[arg(long)]
        entropy: bool,
        #[arg(long)]
        unique: bool,
        #[arg(long)]
        repertoire: bool,
        #[arg(long)]
        consecutive: bool,
        #[arg(long)]
        features: bool,
        #[arg(long)]
        spearman: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Semantic similarity matrix (CSV).
        #[arg(long)]
        sim: Option<PathBuf>,
        #[arg(long)]
        structural: Option<PathBuf>,
        #[arg(long)]
        color: Option<PathBuf>,
        /// Matrix for `spearman` (give exactly two).
        #[arg(long = "matrix")]
        matrices: Vec<PathBuf>,
        /// Alternatives sampled per attempt for `features`.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Task tree the logs were played on (defaults to the bundled tree).
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Serve live play sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = 256)]
        capacity: usize,
        #[arg(long)]
        tree: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, jobs, seed } => cmd_run(&config, &out, jobs, seed),
        Command::Sweep { config, out, jobs, seed } => cmd_sweep(&config, &out, jobs, seed),
        Command::Analyze {
            logs,
            mut metrics,
            entropy,
            unique,
            repertoire,
            consecutive,
            features,
            spearman,
            out,
            sim,
            structural,
            color,
            matrices,
            k,
            seed,
            tree,
        } => {
            let flags = [
                (entropy, Metric::Entropy),
                (unique, Metric::Unique),
                (repertoire, Metric::Repertoire),
                (consecutive, Metric::Consecutive),
                (features, Metric::Features),
                (spearman, Metric::Spearman),
            ];
            for (on, m) in flags {
                if on && !metrics.contains(&m) {
                    metrics.push(m);
                }
            }
            let args = AnalyzeArgs { logs, metrics, out, semantic: sim, structural, color, matrices, k, seed, tree };
            cmd_analyze(&args, &mut std::io::stdout())
        }
        Command::Serve { addr, capacity, tree } => cmd_serve(&addr, capacity, tree.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
