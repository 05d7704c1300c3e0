//! With θ frozen, repeated recursive exchanges about one object should
//! sample the joint posterior over signs. Compares empirical frequencies of
//! the returned sign and of the chain-tail sign against exact enumeration.
//!
//! cargo run --release --example posterior_check

use nalgebra::{DMatrix, DVector};
use rmhng::game::rmh_communicate;
use rmhng::kernels::GaussianParams;
use rmhng::metrics::total_variation;
use rmhng::model::{joint_sign_posterior, AgentState, ComponentParams, Hyperparams};
use rmhng::rng::RngStream;

fn random_agent(id: usize, k: usize, rng: &mut RngStream) -> Result<AgentState, rmhng::error::Error> {
    let comps = (0..k)
        .map(|_| {
            let mean = 4.0 * rng.uniform() - 2.0;
            let prec = 0.5 + 1.5 * rng.uniform();
            GaussianParams::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, prec))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let hyper = Hyperparams::isotropic(1, k, 1.0, 0.0, 1.0, 1.0)?;
    let x = 2.0 * rng.uniform() - 1.0;
    AgentState::with_theta(id, vec![x], vec![rng.index(k)], ComponentParams::new(comps)?, hyper)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 3;
    let invocations = 100_000;
    let mut rng = RngStream::new(2024);
    for n in [2, 3] {
        for t in [1, 10] {
            for instance in 0..3 {
                let mut agents = (0..n).map(|i| random_agent(i, k, &mut rng)).collect::<Result<Vec<_>, _>>()?;
                let exact = joint_sign_posterior(&agents, 0)?;
                let mut returned = vec![0.0; k];
                let mut tail = vec![0.0; k];
                let mut order: Vec<usize> = (0..n).collect();
                for _ in 0..invocations {
                    rng.shuffle(&mut order);
                    let w = rmh_communicate(&mut agents, &order, 0, t, &mut rng)?;
                    returned[w] += 1.0 / invocations as f64;
                    tail[agents[order[n - 1]].signs[0]] += 1.0 / invocations as f64;
                }
                println!(
                    "N={n} T={t:<2} #{instance}  exact {:.3?}  TV(returned) {:.4}  TV(tail) {:.4}",
                    exact,
                    total_variation(&returned, &exact)?,
                    total_variation(&tail, &exact)?
                );
            }
        }
    }
    Ok(())
}
