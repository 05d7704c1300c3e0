//! Exact recursive game versus its one-sample (T = 1) and limited-length
//! (M = 2) approximations and the two baselines, on one synthetic trial.
//!
//! cargo run --release --example approximations

use rmhng::config::ExperimentConfig;
use rmhng::game::{play, Method};
use rmhng::harness::init_agents;
use rmhng::metrics::{adjusted_rand_index, kappa_coefficient};
use rmhng::rng::RngStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.cfg"))?;
    let ds = cfg.dataset.build(0)?;
    let truth = ds.labels().unwrap();
    let methods =
        [Method::Rmhng, Method::Os, Method::Ll, Method::OsAndLl, Method::AllAcceptance, Method::NoCommunication];
    println!(
        "{:<17} {:>2} {:>2} {:>9} {:>7} {:>11} {:>9}",
        "method", "T", "M", "mean ARI", "kappa", "utter/iter", "ms/iter"
    );
    for m in methods {
        let game = cfg.game_config(m, ds.n_agents(), ds.n_objects(), 7)?;
        let rng = RngStream::derive(7, &[m.stream_id()]);
        let mut agents = init_agents(&cfg, &ds, &rng.substream(0))?;
        let trace = play(&game, &mut agents, &mut rng.substream(1))?;
        let last = trace.iterations.last().unwrap();
        let ari =
            last.signs.iter().map(|s| adjusted_rand_index(s, truth)).sum::<Result<f64, _>>()? / ds.n_agents() as f64;
        println!(
            "{:<17} {:>2} {:>2} {:>9.3} {:>7.3} {:>11} {:>9.3}",
            m.name(),
            game.internal_iterations,
            game.chain_length,
            ari,
            kappa_coefficient(&last.signs, game.n_signs)?,
            last.stats.utterances,
            trace.total_duration().as_secs_f64() * 1e3 / trace.len() as f64
        );
    }
    Ok(())
}
