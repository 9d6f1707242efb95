use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use wmix_cli::{run, ExperimentConfig};

/// Run a weighted mixed-norm experiment from a JSON config.
#[derive(Parser, Debug)]
#[command(name = "wmix", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory, overriding the config's `output_dir`.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(short, long)]
    workers: Option<usize>,
    /// Print progress to stderr; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("wmix: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        pool = pool.num_threads(w);
    }
    if let Err(e) = pool.build_global() {
        eprintln!("wmix: cannot start worker pool: {e}");
        return ExitCode::from(3);
    }
    let workers = rayon::current_num_threads();
    if args.verbose > 0 {
        eprintln!("wmix: {} on {workers} workers", cfg.kind.name());
    }
    let start = Instant::now();
    match run(&cfg, args.out.as_deref(), workers) {
        Ok(outcome) => {
            if args.verbose > 1 {
                for p in outcome.written.csv.iter().chain(&outcome.written.svg) {
                    eprintln!("wmix: wrote {}", p.display());
                }
            }
            if args.verbose > 0 {
                eprintln!("wmix: finished in {:.2?}", start.elapsed());
            }
            println!("{}: {} ({})", cfg.kind.name(), outcome.report.verdict, outcome.written.summary.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("wmix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
