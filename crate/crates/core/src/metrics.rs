//! Evaluation metrics: adjusted Rand index against ground truth, chance
//! corrected inter-agent agreement (κ), and the label-switching corrected
//! overlap between two samplers' sign histograms.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::game::GameTrace;

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Returns 1.0 for identical partitions (up to relabeling), and 1.0 by
/// convention when both partitions are trivial (the index is undefined).
pub fn adjusted_rand_index(estimate: &[usize], truth: &[usize]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: estimate.len() });
    }
    let n = truth.len();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    for (&e, &t) in estimate.iter().zip(truth) {
        *rows.entry(e).or_default() += 1;
        *cols.entry(t).or_default() += 1;
        *cells.entry((e, t)).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Total-variation distance `½ Σ |p_i − q_i|` between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), actual: q.len() });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// How [`kappa_coefficient`] combines more than two raters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KappaMethod {
    /// Mean of Cohen's κ over all agent pairs.
    #[default]
    MeanPairwiseCohen,
    /// Fleiss' κ over all agents at once.
    Fleiss,
}

/// Cohen's κ for two raters over `n_signs` categories.
/// Both raters constant and equal (`C_e = 1`) gives 1.0.
pub fn cohen_kappa(a: &[usize], b: &[usize], n_signs: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    if a.is_empty() {
        return Err(Error::contract("kappa of empty label vectors"));
    }
    let n = a.len() as f64;
    let mut pa = vec![0.0; n_signs];
    let mut pb = vec![0.0; n_signs];
    let mut agree = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x >= n_signs || y >= n_signs {
            return Err(Error::OutOfRange { what: "sign", index: x.max(y), bound: n_signs });
        }
        pa[x] += 1.0;
        pb[y] += 1.0;
        agree += usize::from(x == y);
    }
    let observed = agree as f64 / n;
    let chance: f64 = pa.iter().zip(&pb).map(|(x, y)| (x / n) * (y / n)).sum();
    if (1.0 - chance).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Fleiss' κ over all agents' sign vectors.
pub fn fleiss_kappa(signs: &[Vec<usize>], n_signs: usize) -> Result<f64> {
    check_raters(signs)?;
    let raters = signs.len() as f64;
    let items = signs[0].len();
    let mut totals = vec![0.0; n_signs];
    let mut per_item_agreement = 0.0;
    let mut counts = vec![0.0; n_signs];
    for d in 0..items {
        counts.iter_mut().for_each(|c| *c = 0.0);
        for s in signs {
            let k = s[d];
            if k >= n_signs {
                return Err(Error::OutOfRange { what: "sign", index: k, bound: n_signs });
            }
            counts[k] += 1.0;
        }
        let pairs: f64 = counts.iter().map(|c| c * (c - 1.0)).sum();
        per_item_agreement += pairs / (raters * (raters - 1.0));
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
    }
    let observed = per_item_agreement / items as f64;
    let chance: f64 = totals.iter().map(|t| (t / (raters * items as f64)).powi(2)).sum();
    if (1.0 - chance).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((observed - chance) / (1.0 - chance))
}

fn check_raters(signs: &[Vec<usize>]) -> Result<()> {
    if signs.len() < 2 {
        return Err(Error::contract(format!("kappa needs at least 2 agents, got {}", signs.len())));
    }
    let len = signs[0].len();
    if let Some(bad) = signs.iter().find(|s| s.len() != len) {
        return Err(Error::DimensionMismatch { expected: len, actual: bad.len() });
    }
    if len == 0 {
        return Err(Error::contract("kappa of empty label vectors"));
    }
    Ok(())
}

/// Inter-agent sign agreement, mean pairwise Cohen's κ.
pub fn kappa_coefficient(signs: &[Vec<usize>], n_signs: usize) -> Result<f64> {
    kappa_with(signs, n_signs, KappaMethod::MeanPairwiseCohen)
}

pub fn kappa_with(signs: &[Vec<usize>], n_signs: usize, method: KappaMethod) -> Result<f64> {
    check_raters(signs)?;
    match method {
        KappaMethod::Fleiss => fleiss_kappa(signs, n_signs),
        KappaMethod::MeanPairwiseCohen => {
            let mut total = 0.0;
            let mut pairs = 0usize;
            for i in 0..signs.len() {
                for j in (i + 1)..signs.len() {
                    total += cohen_kappa(&signs[i], &signs[j], n_signs)?;
                    pairs += 1;
                }
            }
            Ok(total / pairs as f64)
        }
    }
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// method with potentials, O(n³)). Returns `assignment[row] = column` and
/// the total cost.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if let Some(row) = cost.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, actual: row.len() });
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::contract("assignment costs must be finite"));
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // 1-based arrays; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    Ok((assignment, total))
}

/// Per-object sign histograms `f[d][k]` over a window of iterations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignCountMatrix {
    counts: Vec<Vec<u32>>,
    window: u32,
}

impl SignCountMatrix {
    pub fn new(counts: Vec<Vec<u32>>, window: u32) -> Result<Self> {
        let k = counts.first().map_or(0, Vec::len);
        for (d, row) in counts.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: row.len() });
            }
            let s: u32 = row.iter().sum();
            if s != window {
                return Err(Error::contract(format!("row {d} sums to {s}, expected window {window}")));
            }
        }
        Ok(Self { counts, window })
    }

    pub fn n_objects(&self) -> usize {
        self.counts.len()
    }

    pub fn n_signs(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn row(&self, d: usize) -> &[u32] {
        &self.counts[d]
    }

    pub fn get(&self, d: usize, k: usize) -> u32 {
        self.counts[d][k]
    }

    /// Reorders columns: column `k` of the result is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let counts = self.counts.iter().map(|row| perm.iter().map(|&p| row[p]).collect()).collect();
        Self { counts, window: self.window }
    }
}

/// `g(a, b) = Σ_d min(f_R[d][a], f_G[d][b])`.
pub fn overlap_gains(f_r: &SignCountMatrix, f_g: &SignCountMatrix) -> Vec<Vec<f64>> {
    let k = f_r.n_signs();
    let mut gains = vec![vec![0.0; k]; k];
    for d in 0..f_r.n_objects() {
        for (a, row) in gains.iter_mut().enumerate() {
            let ra = f_r.get(d, a);
            for (b, g) in row.iter_mut().enumerate() {
                *g += f64::from(ra.min(f_g.get(d, b)));
            }
        }
    }
    gains
}

/// Best matching between `f_r`'s signs and `f_g`'s signs (`sigma[a] = b`)
/// and the normalized overlap `Σ_d Σ_k min(f_R[d][k], f_G[d][σ(k)]) / (window·D)`.
pub fn matched_agreement(f_r: &SignCountMatrix, f_g: &SignCountMatrix) -> Result<(Vec<usize>, f64)> {
    if f_r.n_objects() != f_g.n_objects() || f_r.n_signs() != f_g.n_signs() {
        return Err(Error::contract(format!(
            "count matrices differ in shape: {}x{} vs {}x{}",
            f_r.n_objects(),
            f_r.n_signs(),
            f_g.n_objects(),
            f_g.n_signs()
        )));
    }
    if f_r.window() != f_g.window() {
        return Err(Error::contract(format!("count windows differ: {} vs {}", f_r.window(), f_g.window())));
    }
    if f_r.n_objects() == 0 || f_r.window() == 0 {
        return Err(Error::contract("empty count matrices"));
    }
    let gains = overlap_gains(f_r, f_g);
    let cost: Vec<Vec<f64>> = gains.iter().map(|r| r.iter().map(|g| -g).collect()).collect();
    let (sigma, neg_total) = min_cost_assignment(&cost)?;
    let value = -neg_total / (f64::from(f_r.window()) * f_r.n_objects() as f64);
    Ok((sigma, value))
}

/// Label-switching corrected agreement between two sign histograms, in `[0, 1]`.
pub fn posterior_agreement(f_r: &SignCountMatrix, f_g: &SignCountMatrix) -> Result<f64> {
    matched_agreement(f_r, f_g).map(|(_, v)| v)
}

/// Whose sign table is tallied from a multi-agent trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignSource {
    /// The agent at the end of the chain for that object and iteration.
    #[default]
    ChainTail,
    /// A fixed agent.
    Agent(usize),
}

/// Tallies each object's sign over the last `window` iterations.
pub fn collect_sign_counts(trace: &GameTrace, window: usize, source: SignSource) -> Result<SignCountMatrix> {
    if window == 0 || window > trace.len() {
        return Err(Error::contract(format!("window {window} outside 1..={} iterations", trace.len())));
    }
    if let SignSource::Agent(a) = source {
        if a >= trace.n_agents {
            return Err(Error::OutOfRange { what: "agent", index: a, bound: trace.n_agents });
        }
    }
    let mut counts = vec![vec![0u32; trace.n_signs]; trace.n_objects];
    for rec in &trace.iterations[trace.len() - window..] {
        for (d, row) in counts.iter_mut().enumerate() {
            let agent = match source {
                SignSource::ChainTail => rec.tails[d],
                SignSource::Agent(a) => a,
            };
            row[rec.signs[agent][d]] += 1;
        }
    }
    SignCountMatrix::new(counts, window as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ExchangeStats, IterationRecord, Method};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use itertools::Itertools;
    use std::time::Duration;

    /// Rand-index style pair counting over all item pairs.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                if sa && sb {
                    both += 1.0;
                } else if sa {
                    only_a += 1.0;
                } else if sb {
                    only_b += 1.0;
                }
            }
        }
        let pairs = (n * (n - 1) / 2) as f64;
        let expected = (both + only_a) * (both + only_b) / pairs;
        let max = 0.5 * ((both + only_a) + (both + only_b));
        (both - expected) / (max - expected)
    }

    #[test]
    fn ari_identity_and_relabeling() {
        let t = [0, 0, 1, 1, 2, 2, 2];
        assert_abs_diff_eq!(adjusted_rand_index(&t, &t).unwrap(), 1.0);
        let relabeled: Vec<usize> = t.iter().map(|&x| [5, 3, 9][x]).collect();
        assert_abs_diff_eq!(adjusted_rand_index(&relabeled, &t).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ari_small_case_matches_pair_counting() {
        let truth = [0, 0, 1, 1];
        let est = [0, 0, 0, 1];
        // pairs: (0,1) same/same; (0,2),(1,2) same est, diff truth; (2,3) diff est, same truth
        let oracle = ari_by_pairs(&est, &truth);
        assert_abs_diff_eq!(oracle, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(adjusted_rand_index(&est, &truth).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn ari_random_cases_match_pair_counting() {
        let mut rng = RngStream::new(3);
        for _ in 0..200 {
            let n = 3 + rng.index(30);
            let a: Vec<usize> = (0..n).map(|_| rng.index(4)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.index(3)).collect();
            let oracle = ari_by_pairs(&a, &b);
            if oracle.is_finite() {
                assert_abs_diff_eq!(adjusted_rand_index(&a, &b).unwrap(), oracle, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn ari_random_labels_near_zero_and_errors() {
        let mut rng = RngStream::new(4);
        let a: Vec<usize> = (0..5000).map(|_| rng.index(5)).collect();
        let b: Vec<usize> = (0..5000).map(|_| rng.index(5)).collect();
        assert!(adjusted_rand_index(&a, &b).unwrap().abs() < 0.01);
        assert!(adjusted_rand_index(&a[..3], &b).is_err());
    }

    #[test]
    fn kappa_hand_example() {
        let a = vec![0, 0, 1, 1];
        let b = vec![0, 0, 1, 0];
        assert_abs_diff_eq!(cohen_kappa(&a, &b, 2).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa_coefficient(&[a, b], 2).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn kappa_identical_constant_and_single_agent() {
        let v = vec![0, 1, 2, 1, 0];
        assert_abs_diff_eq!(kappa_coefficient(&[v.clone(), v.clone(), v.clone()], 3).unwrap(), 1.0);
        assert_abs_diff_eq!(kappa_with(&[v.clone(), v.clone()], 3, KappaMethod::Fleiss).unwrap(), 1.0);
        let c = vec![2; 6];
        assert_eq!(kappa_coefficient(&[c.clone(), c], 3).unwrap(), 1.0);
        assert!(matches!(kappa_coefficient(&[v], 3), Err(Error::Contract(_))));
    }

    #[test]
    fn kappa_chance_agreement() {
        let mut rng = RngStream::new(5);
        let signs: Vec<Vec<usize>> = (0..4).map(|_| (0..10_000).map(|_| rng.index(5)).collect()).collect();
        assert!(kappa_coefficient(&signs, 5).unwrap().abs() <= 0.05);
        assert!(kappa_with(&signs, 5, KappaMethod::Fleiss).unwrap().abs() <= 0.05);
    }

    #[test]
    fn fleiss_two_raters_known_value() {
        // Fleiss with 2 raters: p_o = 0.75, pooled marginals (5/8, 3/8) → p_e = 0.53125
        let k = fleiss_kappa(&[vec![0, 0, 1, 1], vec![0, 0, 1, 0]], 2).unwrap();
        assert_abs_diff_eq!(k, (0.75 - 0.53125) / (1.0 - 0.53125), epsilon = 1e-12);
    }

    fn counts(rows: &[&[u32]], window: u32) -> SignCountMatrix {
        SignCountMatrix::new(rows.iter().map(|r| r.to_vec()).collect(), window).unwrap()
    }

    #[test]
    fn agreement_hand_example() {
        let f_r = counts(&[&[10, 0], &[0, 10]], 10);
        let f_g = counts(&[&[6, 4], &[4, 6]], 10);
        let (sigma, v) = matched_agreement(&f_r, &f_g).unwrap();
        assert_eq!(sigma, vec![0, 1]);
        assert_abs_diff_eq!(v, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn agreement_identity_and_permutation() {
        let f = counts(&[&[7, 2, 1], &[0, 0, 10], &[3, 3, 4]], 10);
        assert_abs_diff_eq!(posterior_agreement(&f, &f).unwrap(), 1.0);
        let g = f.permute_columns(&[2, 0, 1]);
        assert_abs_diff_eq!(posterior_agreement(&f, &g).unwrap(), 1.0);
    }

    #[test]
    fn agreement_shape_errors() {
        let a = counts(&[&[1, 0]], 1);
        let b = counts(&[&[1, 0], &[0, 1]], 1);
        let c = counts(&[&[2, 0]], 2);
        assert!(posterior_agreement(&a, &b).is_err());
        assert!(posterior_agreement(&a, &c).is_err());
        assert!(SignCountMatrix::new(vec![vec![1, 1]], 3).is_err());
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = RngStream::new(6);
        for _ in 0..200 {
            let n = 1 + rng.index(6);
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| (rng.index(50) as f64) - 20.0).collect()).collect();
            let (assign, total) = min_cost_assignment(&cost).unwrap();
            let best = (0..n)
                .permutations(n)
                .map(|p| p.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(total, best, epsilon = 1e-9);
            let mut seen = assign.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
        assert!(min_cost_assignment(&[vec![1.0, 2.0]]).is_err());
    }

    fn trace(signs: Vec<Vec<Vec<usize>>>, tails: Vec<Vec<usize>>) -> GameTrace {
        GameTrace {
            method: Method::Rmhng,
            n_agents: signs[0].len(),
            n_signs: 3,
            n_objects: signs[0][0].len(),
            iterations: signs
                .into_iter()
                .zip(tails)
                .map(|(s, t)| IterationRecord {
                    signs: s,
                    tails: t,
                    stats: ExchangeStats::default(),
                    duration: Duration::ZERO,
                })
                .collect(),
        }
    }

    #[test]
    fn counts_from_trace() {
        let t = trace(
            vec![vec![vec![0, 1], vec![2, 2]], vec![vec![0, 1], vec![1, 2]], vec![vec![1, 1], vec![0, 2]]],
            vec![vec![0, 0], vec![1, 0], vec![1, 1]],
        );
        let one = collect_sign_counts(&t, 1, SignSource::Agent(0)).unwrap();
        assert_eq!(one.row(0), &[0, 1, 0]);
        assert_eq!(one.row(1), &[0, 1, 0]);
        let tail = collect_sign_counts(&t, 2, SignSource::ChainTail).unwrap();
        // object 0: iter1 tail 1 → 1; iter2 tail 1 → 0
        assert_eq!(tail.row(0), &[1, 1, 0]);
        // object 1: iter1 tail 0 → 1; iter2 tail 1 → 2
        assert_eq!(tail.row(1), &[0, 1, 1]);
        let constant = collect_sign_counts(&t, 3, SignSource::Agent(1)).unwrap();
        assert_eq!(constant.row(1), &[0, 0, 3]);
        assert!(collect_sign_counts(&t, 4, SignSource::ChainTail).is_err());
        assert!(collect_sign_counts(&t, 1, SignSource::Agent(2)).is_err());
    }

    #[test]
    fn total_variation_basics() {
        assert_abs_diff_eq!(total_variation(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(total_variation(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert!(total_variation(&[1.0], &[0.5, 0.5]).is_err());
    }
}
