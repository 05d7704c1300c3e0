//! Full synthetic benchmark: every method, five trials, final-window
//! ARI / κ / agreement per agent, written as CSV.
//!
//! cargo run --release --example synthetic_benchmark [-- <out dir>]
//!
//! Set `RMHNG_QUICK=1` for a two-trial, 40-iteration run on D = 500.

use std::path::PathBuf;
use std::time::Instant;

use rmhng::config::{DatasetSpec, ExperimentConfig};
use rmhng::harness::{emit_outputs, run_experiment};

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.cfg"))?;
    if std::env::var_os("RMHNG_QUICK").is_some() {
        cfg.experiment.trials = 2;
        cfg.game.iterations = 40;
        cfg.dataset = DatasetSpec::Synthetic { per_cluster: 100, seed: Some(1) };
    }
    let out = std::env::args().nth(1).map(PathBuf::from);

    let start = Instant::now();
    let table = run_experiment(&cfg)?;
    println!("{} trials in {:.1}s\n", cfg.experiment.trials, start.elapsed().as_secs_f64());
    println!("{:<17} {:>5} {:>14} {:>14} {:>9}", "method", "agent", "ARI", "kappa", "agree");
    for r in &table.summary {
        let agent = r.agent.map_or("all".to_string(), |a| a.to_string());
        println!(
            "{:<17} {:>5} {:>6}±{:<7} {:>6}±{:<7} {:>9}",
            r.method.name(),
            agent,
            fmt(r.ari_mean),
            fmt(r.ari_std),
            fmt(r.kappa_mean),
            fmt(r.kappa_std),
            fmt(r.agreement)
        );
    }
    if let Some(dir) = out {
        emit_outputs(&table, &dir, true)?;
        println!("\nwrote {}", dir.display());
    }
    Ok(())
}
