//! Densities and samplers for the Gaussian / Wishart / categorical pieces of
//! the mixture model. All density arithmetic is done in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Relative tolerance used when checking a precision matrix for symmetry.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Mean and precision of a multivariate Gaussian, with the Cholesky factor
/// of the precision cached for density evaluation and sampling.
#[derive(Clone, Debug)]
pub struct GaussianParams {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    // lower-triangular L with L Lᵀ = precision
    chol: DMatrix<f64>,
    // ½ log det(precision) − (dim/2) log 2π
    log_norm: f64,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, precision: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if precision.nrows() != dim || precision.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: precision.nrows() });
        }
        check_symmetric(&precision)?;
        let chol = cholesky(&precision, "gaussian precision")?.l();
        let half_log_det: f64 = chol.diagonal().iter().map(|v| v.ln()).sum();
        let log_norm = half_log_det - 0.5 * dim as f64 * LN_2PI;
        Ok(Self { mean, precision, chol, log_norm })
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim)).expect("identity is PD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `log N(x | mean, precision⁻¹)` without bounds checks beyond a debug
    /// assertion; this is the hot path of every exchange.
    #[inline]
    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let dim = x.len();
        // (x−μ)ᵀ L Lᵀ (x−μ) = ‖Lᵀ(x−μ)‖²
        let mut quad = 0.0;
        for j in 0..dim {
            let mut acc = 0.0;
            for i in j..dim {
                acc += self.chol[(i, j)] * (x[i] - self.mean[i]);
            }
            quad += acc * acc;
        }
        self.log_norm - 0.5 * quad
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            if (a - b).abs() > SYMMETRY_TOL * scale {
                return Err(Error::NotPositiveDefinite { context: "matrix is not symmetric" });
            }
        }
    }
    Ok(())
}

pub(crate) fn cholesky(m: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite { context });
    }
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite { context })
}

/// Symmetrizes in place: `(m + mᵀ) / 2`.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `log N(x | p.mean, p.precision⁻¹)`.
pub fn log_gaussian_density(x: &[f64], p: &GaussianParams) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), actual: x.len() });
    }
    Ok(p.log_density(x))
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_categorical(weights: &[f64], rng: &mut RngStream) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Degenerate("categorical weight is negative or not finite"));
        }
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("categorical weights sum to zero"));
    }
    let mut target = rng.uniform() * total;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if target < w {
                return Ok(k);
            }
            target -= w;
            last_positive = k;
        }
    }
    // rounding pushed the target past the final bucket
    Ok(last_positive)
}

/// Draws an index with probability proportional to `exp(logits)`,
/// normalizing by log-sum-exp.
pub fn sample_log_categorical(logits: &[f64], rng: &mut RngStream) -> Result<usize> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max == f64::NEG_INFINITY {
        return Err(Error::Degenerate("every category has zero probability"));
    }
    if max == f64::INFINITY {
        return Err(Error::Degenerate("infinite log-weight"));
    }
    let total: f64 = logits.iter().map(|&l| (l - max).exp()).sum();
    let mut target = rng.uniform() * total;
    let mut last_positive = 0;
    for (k, &l) in logits.iter().enumerate() {
        let w = (l - max).exp();
        if w > 0.0 {
            if target < w {
                return Ok(k);
            }
            target -= w;
            last_positive = k;
        }
    }
    Ok(last_positive)
}

/// Normalized probabilities `exp(logits − logsumexp(logits))`.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Draws `mean + L⁻ᵀ z` where `L Lᵀ = precision` and `z ~ N(0, I)`.
pub fn sample_gaussian(p: &GaussianParams, rng: &mut RngStream) -> DVector<f64> {
    let z = DVector::from_fn(p.dim(), |_, _| StandardNormal.sample(rng));
    let offset = p.chol.transpose().solve_upper_triangular(&z).expect("cholesky factor has a positive diagonal");
    &p.mean + offset
}

/// Bartlett-decomposition draw from `W(nu, scale)`, so `E[Λ] = nu · scale`.
pub fn sample_wishart(nu: f64, scale: &DMatrix<f64>, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let dim = scale.nrows();
    if scale.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: scale.ncols() });
    }
    if !(nu >= dim as f64) {
        return Err(Error::contract(format!("wishart degrees of freedom {nu} below dimension {dim}")));
    }
    check_symmetric(scale)?;
    let l = cholesky(scale, "wishart scale")?.l();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let chi = ChiSquared::new(nu - i as f64).map_err(|_| Error::Degenerate("chi-square df"))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = &l * a;
    let mut out = &la * la.transpose();
    symmetrize(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(mean: &[f64], prec: &[f64]) -> GaussianParams {
        let d = mean.len();
        GaussianParams::new(DVector::from_column_slice(mean), DMatrix::from_row_slice(d, d, prec)).unwrap()
    }

    #[test]
    fn standard_normal_at_mode_and_one_sigma() {
        let p = params(&[0.0], &[1.0]);
        assert_abs_diff_eq!(log_gaussian_density(&[0.0], &p).unwrap(), -0.918_938_533_204_672_7, epsilon = 1e-12);
        assert_abs_diff_eq!(log_gaussian_density(&[1.0], &p).unwrap(), -1.418_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn matches_high_precision_reference_values() {
        // reference values computed with 40-digit arithmetic
        let p = params(&[0.0, 0.0], &[2.0, 0.0, 0.0, 2.0]);
        assert_abs_diff_eq!(p.log_density(&[1.0, 1.0]), -3.144_729_885_849_400_2, epsilon = 1e-9);
        let p = params(&[0.5, 0.25], &[2.0, 0.6, 0.6, 1.5]);
        assert_abs_diff_eq!(p.log_density(&[0.3, -1.2]), -3.143_362_607_830_233, epsilon = 1e-9);
    }

    #[test]
    fn density_errors() {
        let p = params(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(log_gaussian_density(&[0.0], &p), Err(Error::DimensionMismatch { .. })));
        let not_pd = GaussianParams::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(not_pd, Err(Error::NotPositiveDefinite { .. })));
        let asym = GaussianParams::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]));
        assert!(matches!(asym, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn density_integrates_to_one_1d() {
        let p = params(&[0.7], &[4.0]);
        let sigma = 0.5;
        let n = 20_000;
        let (lo, hi) = (0.7 - 8.0 * sigma, 0.7 + 8.0 * sigma);
        let h = (hi - lo) / n as f64;
        // composite Simpson
        let mut s = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += w * p.log_density(&[x]).exp();
        }
        let integral = s * h / 3.0;
        assert!((0.999..=1.001).contains(&integral), "{integral}");
    }

    #[test]
    fn density_integrates_to_one_2d() {
        let p = params(&[1.0, -2.0], &[2.0, 0.5, 0.5, 1.0]);
        // marginal standard deviations from the covariance (precision inverse)
        let cov = p.precision().clone().try_inverse().unwrap();
        let (sx, sy) = (cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt());
        let n = 400;
        let (hx, hy) = (16.0 * sx / n as f64, 16.0 * sy / n as f64);
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = 1.0 - 8.0 * sx + (i as f64 + 0.5) * hx;
                let y = -2.0 - 8.0 * sy + (j as f64 + 0.5) * hy;
                total += p.log_density(&[x, y]).exp();
            }
        }
        let integral = total * hx * hy;
        assert!((0.999..=1.001).contains(&integral), "{integral}");
    }

    #[test]
    fn categorical_point_mass_and_errors() {
        let mut rng = RngStream::new(1);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[1.0, 0.0, 0.0], &mut rng).unwrap(), 0);
            assert_eq!(sample_categorical(&[0.0, 0.0, 2.0], &mut rng).unwrap(), 2);
        }
        assert!(matches!(sample_categorical(&[0.0, 0.0], &mut rng), Err(Error::Degenerate(_))));
        assert!(matches!(sample_categorical(&[f64::NAN, 1.0], &mut rng), Err(Error::Degenerate(_))));
        assert!(matches!(sample_categorical(&[], &mut rng), Err(Error::Degenerate(_))));
        assert!(matches!(sample_log_categorical(&[f64::NEG_INFINITY; 3], &mut rng), Err(Error::Degenerate(_))));
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = RngStream::new(2);
        let n = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_categorical(&[1.0, 2.0, 3.0], &mut rng).unwrap()] += 1;
        }
        let expected = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        let mut chi2 = 0.0;
        for k in 0..3 {
            let f = counts[k] as f64 / n as f64;
            assert!((f - expected[k]).abs() < 0.01);
            let e = expected[k] * n as f64;
            chi2 += (counts[k] as f64 - e).powi(2) / e;
        }
        // 2 degrees of freedom, 0.1% critical value
        assert!(chi2 < 13.82, "chi2 = {chi2}");

        let mut zeros = 0;
        for _ in 0..n {
            if sample_categorical(&[1.0, 1.0], &mut rng).unwrap() == 0 {
                zeros += 1;
            }
        }
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn log_categorical_handles_extreme_logits() {
        let mut rng = RngStream::new(3);
        let logits = [-1e6, -1e6 + 2f64.ln(), f64::NEG_INFINITY];
        let n = 100_000;
        let ones = (0..n).filter(|_| sample_log_categorical(&logits, &mut rng).unwrap() == 1).count();
        assert!((ones as f64 / n as f64 - 2.0 / 3.0).abs() < 0.01);
        let p = softmax(&logits);
        assert_abs_diff_eq!(p[1], 2.0 / 3.0, epsilon = 1e-9);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn gaussian_vanishing_variance() {
        let mut rng = RngStream::new(4);
        let p = params(&[3.0, -1.0], &[1e12, 0.0, 0.0, 1e12]);
        for _ in 0..100 {
            let s = sample_gaussian(&p, &mut rng);
            assert!((s[0] - 3.0).abs() < 1e-5 && (s[1] + 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::new(5);
        let n = 1_000_000;
        let std = GaussianParams::standard(2);
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let s = sample_gaussian(&std, &mut rng);
            sum[0] += s[0];
            sum[1] += s[1];
        }
        assert!(sum.iter().all(|s| (s / n as f64).abs() < 0.005));

        let p = params(&[1.0, 2.0], &[4.0, 0.0, 0.0, 1.0]);
        let draws: Vec<DVector<f64>> = (0..n).map(|_| sample_gaussian(&p, &mut rng)).collect();
        let mean = draws.iter().fold(DVector::zeros(2), |acc, d| acc + d) / n as f64;
        let mut cov = DMatrix::<f64>::zeros(2, 2);
        for d in &draws {
            let c = d - &mean;
            cov += &c * c.transpose();
        }
        cov /= n as f64;
        let expected = DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]);
        assert!((cov - expected).abs().max() < 0.01);
        assert!((mean - DVector::from_column_slice(&[1.0, 2.0])).abs().max() < 0.01);
    }

    #[test]
    fn wishart_moments_1d_and_2d() {
        let mut rng = RngStream::new(6);
        let n = 1_000_000;
        let one = DMatrix::identity(1, 1);
        let mean1: f64 = (0..n).map(|_| sample_wishart(5.0, &one, &mut rng).unwrap()[(0, 0)]).sum::<f64>() / n as f64;
        assert!((mean1 - 5.0).abs() < 0.05, "{mean1}");

        let eye = DMatrix::identity(2, 2);
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            acc += sample_wishart(4.0, &eye, &mut rng).unwrap();
        }
        acc /= n as f64;
        assert!((acc - 4.0 * eye).abs().max() < 0.05);
    }

    #[test]
    fn wishart_samples_are_spd_and_validated() {
        let mut rng = RngStream::new(7);
        let scale = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        for _ in 0..1000 {
            let w = sample_wishart(3.0, &scale, &mut rng).unwrap();
            assert_eq!(w, w.transpose());
            assert!(Cholesky::new(w).is_some());
        }
        assert!(matches!(sample_wishart(2.0, &scale, &mut rng), Err(Error::Contract(_))));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(sample_wishart(5.0, &bad, &mut rng), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn samplers_are_deterministic() {
        let p = params(&[0.0, 1.0], &[1.0, 0.2, 0.2, 2.0]);
        let run = |seed| {
            let mut rng = RngStream::new(seed);
            let g = sample_gaussian(&p, &mut rng);
            let w = sample_wishart(3.0, p.precision(), &mut rng).unwrap();
            let c = sample_categorical(&[0.2, 0.3, 0.5], &mut rng).unwrap();
            (g, w, c)
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11).0, run(12).0);
    }
}
