//! Two agents, each seeing one coordinate of the synthetic data, agree on
//! names by plain speaker-listener exchanges. Neither can separate all five
//! clusters alone; together they can.
//!
//! cargo run --release --example two_agent_mhng

use rmhng::data::generate_synthetic;
use rmhng::game::{play, GameConfig, Method};
use rmhng::metrics::{adjusted_rand_index, cohen_kappa};
use rmhng::model::{AgentState, Hyperparams};
use rmhng::rng::RngStream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate_synthetic(200, 1)?;
    let truth = ds.labels().unwrap();
    let k = 5;
    let rng = RngStream::new(42);

    // agents 0 and 1 of the benchmark
    let mut agents = (0..2)
        .map(|n| {
            AgentState::initialize(
                n,
                ds.agent_features(n).to_vec(),
                Hyperparams::synthetic_default(k),
                &mut rng.substream(n as u64),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let cfg = GameConfig::preset(Method::Rmhng, 2, k, ds.n_objects(), 60, 1, 42);
    let trace = play(&cfg, &mut agents, &mut rng.substream(99))?;

    println!("{:>4} {:>8} {:>8} {:>8} {:>8}", "iter", "ARI_0", "ARI_1", "kappa", "accept");
    for (i, rec) in trace.iterations.iter().enumerate() {
        if i % 10 == 9 || i == 0 {
            println!(
                "{:>4} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
                i + 1,
                adjusted_rand_index(&rec.signs[0], truth)?,
                adjusted_rand_index(&rec.signs[1], truth)?,
                cohen_kappa(&rec.signs[0], &rec.signs[1], k)?,
                rec.stats.acceptance_rate()
            );
        }
    }
    Ok(())
}
