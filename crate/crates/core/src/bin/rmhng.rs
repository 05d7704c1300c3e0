use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rmhng::config::ExperimentConfig;
use rmhng::data::{load_feature_file, FeatureLayout};
use rmhng::error::Result;
use rmhng::game::Method;
use rmhng::harness;

/// Recursive Metropolis-Hastings naming game experiments.
/// Log verbosity comes from RMHNG_LOG (e.g. RMHNG_LOG=debug).
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method for every trial and write CSV summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this method (GIBBS is added when agreement is on).
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides experiment.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plots: bool,
    },
    /// Time per iteration over a grid of T and M.
    Timing {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "t", value_delimiter = ',', default_value = "1,2,3,4")]
        t: Vec<usize>,
        #[arg(long = "m", value_delimiter = ',', default_value = "1,2,3")]
        m: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plots: bool,
    },
    /// Check that a feature file parses and is consistent.
    Validate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, method, seed, out, plots } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(m) = method {
                cfg.select_method(m.parse::<Method>()?);
            }
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let dir = out.unwrap_or_else(|| cfg.experiment.output_dir.clone());
            let table = harness::run_experiment(&cfg)?;
            harness::emit_outputs(&table, &dir, plots || cfg.experiment.plots)?;
            print!("{}", harness::summary_csv(&table));
            log::info!("wrote {}", dir.display());
        }
        Command::Timing { config, t, m, out, plots } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let rows = harness::run_timing_sweep(&cfg, &t, &m)?;
            let dir = out.unwrap_or_else(|| cfg.experiment.output_dir.clone());
            harness::emit_timing(&rows, &dir, plots || cfg.experiment.plots)?;
            print!("{}", harness::timing_csv(&rows));
        }
        Command::Validate { features, agents, dim } => {
            let layout = FeatureLayout { n_agents: agents, dim, ..Default::default() };
            let ds = load_feature_file(&features, &layout)?;
            let classes = ds.n_classes().map_or_else(|| "unlabeled".to_string(), |c| format!("{c} classes"));
            println!("{}: {} agents, {} objects, dim {}, {classes}", ds.name, ds.n_agents(), ds.n_objects(), ds.dim());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RMHNG_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
