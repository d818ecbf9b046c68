//! Benchmark harness CLI: campaign execution, metric reports, single runs
//! and latent-correlation diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lvego::algorithms::run_algorithm;
use lvego::bench::{
    compute_all_targets, compute_metrics, export_csv, export_json, latent_correlation_csv,
    run_campaign, CampaignConfig, ResultStore,
};
use lvego::problems;

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Mixed-variable Bayesian optimization benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full campaign from a JSON config file.
    Run {
        /// Config file: {"problems":[..],"algorithms":[..],"reps":..,
        /// "base_seed":..,"budget_extra":..}
        #[arg(long)]
        config: PathBuf,
        /// Directory the run histories and manifest are written to.
        #[arg(long, default_value = "store")]
        store: PathBuf,
    },
    /// Compute metrics from a result store and export them.
    Metrics {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run one (problem, algorithm) pair and print the outcome.
    Single {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        algo: String,
        #[arg(long)]
        seed: u64,
        /// Total evaluation budget; defaults to the design size plus 50.
        #[arg(long)]
        budget: Option<usize>,
        /// Repetitions with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Emit the per-iteration categorical correlation matrices of a stored
    /// run as CSV on stdout.
    LatentDiag {
        #[arg(long)]
        store: PathBuf,
        /// Run id, i.e. the file stem {problem}-{algorithm}-{seed}.
        #[arg(long)]
        run: String,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> lvego::Result<()> {
    match cli.command {
        Command::Run { config, store } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = CampaignConfig::from_json(&text)?;
            let manifest = run_campaign(&cfg, &store)?;
            let failed = manifest.runs.iter().filter(|r| r.error.is_some()).count();
            println!(
                "campaign finished: {} runs, {} failed, store at {}",
                manifest.runs.len(),
                failed,
                store.display()
            );
            for r in manifest.runs.iter().filter(|r| r.error.is_some()) {
                println!(
                    "  failed: {}-{}-{}: {}",
                    r.problem,
                    r.algorithm,
                    r.seed,
                    r.error.as_deref().unwrap_or("")
                );
            }
            Ok(())
        }
        Command::Metrics { store, out, format } => {
            let store = ResultStore::load(&store)?;
            let targets = compute_all_targets(&store)?;
            let report = compute_metrics(&store, &targets)?;
            match format {
                Format::Csv => {
                    let files = export_csv(&report, &out)?;
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                }
                Format::Json => {
                    let f = export_json(&report, &out)?;
                    println!("wrote {}", f.display());
                }
            }
            Ok(())
        }
        Command::Single {
            problem,
            algo,
            seed,
            budget,
            reps,
        } => {
            let p = problems::by_id(&problem)?;
            let budget = budget.unwrap_or_else(|| p.doe_size() + 50);
            let mut finals = Vec::new();
            for rep in 0..reps.max(1) {
                let history = run_algorithm(&algo, p, budget, seed + rep as u64)?;
                let (best_point, best_y) =
                    history.best().ok_or(lvego::Error::EmptyStore)?;
                println!(
                    "{problem} {algo} seed {}: best y = {best_y:.6} at x = {:?}, u = {:?}{}",
                    seed + rep as u64,
                    best_point.x,
                    best_point.u,
                    if history.aborted { " (aborted)" } else { "" }
                );
                finals.push(best_y);
            }
            if finals.len() > 1 {
                finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let median = lvego::bench::quantile(&finals, 0.5);
                println!("median over {} reps: {median:.6}", finals.len());
            }
            Ok(())
        }
        Command::LatentDiag { store, run } => {
            let store = ResultStore::load(&store)?;
            print!("{}", latent_correlation_csv(&store, &run)?);
            Ok(())
        }
    }
}
