//! The evaluation metrics on small hand-checkable inputs.
//!
//! cargo run --example metrics_tour

use rmhng::metrics::{
    adjusted_rand_index, cohen_kappa, fleiss_kappa, matched_agreement, min_cost_assignment, SignCountMatrix,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = [0, 0, 0, 1, 1, 1, 2, 2, 2];
    let relabeled = [2, 2, 2, 0, 0, 0, 1, 1, 1];
    let noisy = [0, 0, 1, 1, 1, 1, 2, 2, 0];
    println!("ARI(relabeled truth) = {:.3}", adjusted_rand_index(&relabeled, &truth)?);
    println!("ARI(noisy)           = {:.3}", adjusted_rand_index(&noisy, &truth)?);

    // agree on 3 of 4 items, balanced marginals: κ = 0.5
    let a = [0, 0, 1, 1];
    let b = [0, 0, 1, 0];
    println!("Cohen kappa          = {:.3}", cohen_kappa(&a, &b, 2)?);
    println!("Fleiss kappa         = {:.3}", fleiss_kappa(&[a.to_vec(), b.to_vec(), a.to_vec()], 2)?);

    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    let (assign, total) = min_cost_assignment(&cost)?;
    println!("assignment {assign:?}, cost {total}");

    // two samplers that use different names for the same clusters
    let f_r = SignCountMatrix::new(vec![vec![10, 0], vec![0, 10]], 10)?;
    let f_g = SignCountMatrix::new(vec![vec![4, 6], vec![6, 4]], 10)?;
    let (sigma, value) = matched_agreement(&f_r, &f_g)?;
    println!("agreement {value:.2} with matching {sigma:?}");
    Ok(())
}
