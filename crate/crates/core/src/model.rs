//! Per-agent Gaussian mixture with Normal-Wishart priors, coupled to the
//! other agents only through the shared sign variable.
//!
//! Each agent owns its features, its current sign table and its component
//! parameters. Nothing here reads another agent's state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::{cholesky, sample_gaussian, sample_log_categorical, sample_wishart, symmetrize, GaussianParams};
use crate::rng::RngStream;

/// Jitter added to the diagonal when an accumulated scale fails to factorize.
pub const PD_JITTER: f64 = 1e-9;

/// Normal-Wishart prior `(m, ᾱ, ν, W)` plus the categorical sign prior `γ`.
#[derive(Clone, Debug)]
pub struct Hyperparams {
    m: DVector<f64>,
    alpha_bar: f64,
    nu: f64,
    w: DMatrix<f64>,
    w_inv: DMatrix<f64>,
    gamma: Vec<f64>,
    log_gamma: Vec<f64>,
}

impl Hyperparams {
    pub fn new(m: DVector<f64>, alpha_bar: f64, nu: f64, w: DMatrix<f64>, gamma: Vec<f64>) -> Result<Self> {
        let dim = m.len();
        if dim == 0 {
            return Err(Error::contract("hyperparameter mean has dimension 0"));
        }
        if w.nrows() != dim || w.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: w.nrows() });
        }
        if !(alpha_bar > 0.0) || !alpha_bar.is_finite() {
            return Err(Error::contract(format!("alpha_bar must be positive, got {alpha_bar}")));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::contract(format!("nu must be positive, got {nu}")));
        }
        if gamma.is_empty() || gamma.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::contract("gamma must be a non-empty nonnegative vector"));
        }
        let total: f64 = gamma.iter().sum();
        if !(total > 0.0) {
            return Err(Error::contract("gamma must sum to a positive value"));
        }
        // validates W is symmetric positive-definite
        GaussianParams::new(DVector::zeros(dim), w.clone())?;
        let mut w_inv = cholesky(&w, "wishart scale W")?.inverse();
        symmetrize(&mut w_inv);
        let log_gamma = gamma.iter().map(|g| (g / total).ln()).collect();
        Ok(Self { m, alpha_bar, nu, w, w_inv, gamma, log_gamma })
    }

    /// Scalar-shorthand constructor: `m·1`, `W = w·I`, uniform γ over `n_signs`.
    pub fn isotropic(dim: usize, n_signs: usize, alpha_bar: f64, m: f64, w: f64, nu: f64) -> Result<Self> {
        Self::new(DVector::from_element(dim, m), alpha_bar, nu, DMatrix::identity(dim, dim) * w, vec![1.0; n_signs])
    }

    /// Settings used for the 1-dimensional synthetic experiment:
    /// ᾱ = 1, m = 0, W = 0.01, ν = 1.
    pub fn synthetic_default(n_signs: usize) -> Self {
        Self::isotropic(1, n_signs, 1.0, 0.0, 0.01, 1.0).expect("valid defaults")
    }

    /// Settings used for 10-dimensional precomputed features:
    /// ᾱ = 1, m = 0, W = 100·I, ν = 1.
    pub fn feature_default(dim: usize, n_signs: usize) -> Self {
        Self::isotropic(dim, n_signs, 1.0, 0.0, 100.0, 1.0).expect("valid defaults")
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn n_signs(&self) -> usize {
        self.gamma.len()
    }

    pub fn m(&self) -> &DVector<f64> {
        &self.m
    }

    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `log γ_k` with γ normalized.
    #[inline]
    pub fn log_gamma(&self, k: usize) -> f64 {
        self.log_gamma[k]
    }
}

/// Component parameters `(μ_k, Λ_k)` for `k = 0..K`.
#[derive(Clone, Debug)]
pub struct ComponentParams(Vec<GaussianParams>);

impl ComponentParams {
    pub fn new(components: Vec<GaussianParams>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::contract("mixture needs at least one component"));
        }
        let dim = components[0].dim();
        if let Some(bad) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.dim() });
        }
        Ok(Self(components))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> &GaussianParams {
        &self.0[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &GaussianParams> {
        self.0.iter()
    }
}

/// Conjugate Normal-Wishart posterior parameters for one component.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalWishartPosterior {
    pub m: DVector<f64>,
    pub alpha: f64,
    pub nu: f64,
    /// Inverse of the posterior Wishart scale.
    pub w_inv: DMatrix<f64>,
    pub count: usize,
}

impl NormalWishartPosterior {
    /// Conjugate update from the points assigned to one component.
    pub fn update<'a>(hyper: &Hyperparams, points: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let dim = hyper.dim();
        let mut count = 0usize;
        let mut mean = DVector::<f64>::zeros(dim);
        for x in points.clone() {
            count += 1;
            for (i, v) in x.iter().enumerate() {
                mean[i] += v;
            }
        }
        if count == 0 {
            return Self {
                m: hyper.m.clone(),
                alpha: hyper.alpha_bar,
                nu: hyper.nu,
                w_inv: hyper.w_inv.clone(),
                count,
            };
        }
        mean /= count as f64;
        // centered second pass
        let mut scatter = DMatrix::<f64>::zeros(dim, dim);
        for x in points {
            for i in 0..dim {
                let di = x[i] - mean[i];
                for j in 0..=i {
                    scatter[(i, j)] += di * (x[j] - mean[j]);
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                scatter[(j, i)] = scatter[(i, j)];
            }
        }
        let c = count as f64;
        let alpha = hyper.alpha_bar + c;
        let m = (&hyper.m * hyper.alpha_bar + &mean * c) / alpha;
        let diff = &mean - &hyper.m;
        let mut w_inv = &hyper.w_inv + scatter + (&diff * diff.transpose()) * (hyper.alpha_bar * c / alpha);
        symmetrize(&mut w_inv);
        Self { m, alpha, nu: hyper.nu + c, w_inv, count }
    }

    /// Draws `Λ ~ W(ν', W')` then `μ ~ N(m', (ᾱ'Λ)⁻¹)`.
    ///
    /// Degrees of freedom below the dimension are clamped up to the dimension
    /// at sampling time only; the stored `nu` keeps the raw conjugate value.
    pub fn sample(&self, rng: &mut RngStream) -> Result<GaussianParams> {
        let dim = self.m.len();
        let chol = match cholesky(&self.w_inv, "posterior scale inverse") {
            Ok(c) => c,
            Err(_) => {
                log::warn!("posterior scale inverse not positive-definite; adding {PD_JITTER} jitter");
                let jittered = &self.w_inv + DMatrix::identity(dim, dim) * PD_JITTER;
                cholesky(&jittered, "posterior scale inverse (jittered)")?
            }
        };
        let mut w = chol.inverse();
        symmetrize(&mut w);
        let df = self.nu.max(dim as f64);
        let lambda = sample_wishart(df, &w, rng)?;
        let mean_dist = GaussianParams::new(self.m.clone(), &lambda * self.alpha)?;
        let mu = sample_gaussian(&mean_dist, rng);
        GaussianParams::new(mu, lambda)
    }
}

/// One agent's private state: features, sign table, component parameters.
#[derive(Clone, Debug)]
pub struct AgentState {
    id: usize,
    dim: usize,
    // row-major, D × dim
    features: Vec<f64>,
    /// Current sign `w_d` for every object.
    pub signs: Vec<usize>,
    theta: ComponentParams,
    hyper: Hyperparams,
}

impl AgentState {
    /// Builds an agent with uniformly random signs and θ drawn from the
    /// resulting conjugate posterior.
    pub fn initialize(id: usize, features: Vec<f64>, hyper: Hyperparams, rng: &mut RngStream) -> Result<Self> {
        let dim = hyper.dim();
        let k = hyper.n_signs();
        if !features.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: features.len() % dim });
        }
        let n_objects = features.len() / dim;
        let signs = (0..n_objects).map(|_| rng.index(k)).collect();
        // placeholder θ, replaced below
        let placeholder = ComponentParams::new(vec![GaussianParams::standard(dim); k])?;
        let mut agent = Self { id, dim, features, signs, theta: placeholder, hyper };
        agent.theta = sample_theta_posterior(&agent, rng)?;
        Ok(agent)
    }

    /// Builds an agent with explicit signs and θ (used to freeze θ in tests
    /// and oracle checks).
    pub fn with_theta(
        id: usize,
        features: Vec<f64>,
        signs: Vec<usize>,
        theta: ComponentParams,
        hyper: Hyperparams,
    ) -> Result<Self> {
        let dim = hyper.dim();
        if !features.len().is_multiple_of(dim) || features.len() / dim != signs.len() {
            return Err(Error::contract(format!(
                "{} feature values do not form {} vectors of dimension {dim}",
                features.len(),
                signs.len()
            )));
        }
        if theta.len() != hyper.n_signs() {
            return Err(Error::contract(format!(
                "theta has {} components but gamma has {}",
                theta.len(),
                hyper.n_signs()
            )));
        }
        if theta.get(0).dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: theta.get(0).dim() });
        }
        if let Some(&s) = signs.iter().find(|&&s| s >= hyper.n_signs()) {
            return Err(Error::OutOfRange { what: "sign", index: s, bound: hyper.n_signs() });
        }
        Ok(Self { id, dim, features, signs, theta, hyper })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_objects(&self) -> usize {
        self.signs.len()
    }

    pub fn n_signs(&self) -> usize {
        self.hyper.n_signs()
    }

    pub fn feature(&self, d: usize) -> &[f64] {
        &self.features[d * self.dim..(d + 1) * self.dim]
    }

    pub fn theta(&self) -> &ComponentParams {
        &self.theta
    }

    pub fn set_theta(&mut self, theta: ComponentParams) -> Result<()> {
        if theta.len() != self.n_signs() || theta.get(0).dim() != self.dim {
            return Err(Error::contract("replacement theta has the wrong shape"));
        }
        self.theta = theta;
        Ok(())
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// `log N(x_d | μ_k, Λ_k⁻¹)`, unchecked.
    #[inline]
    pub(crate) fn log_likelihood(&self, d: usize, k: usize) -> f64 {
        self.theta.get(k).log_density(self.feature(d))
    }

    /// `log γ_k + log N(x_d | μ_k, Λ_k⁻¹)`, unchecked.
    #[inline]
    pub(crate) fn log_joint(&self, d: usize, k: usize) -> f64 {
        self.hyper.log_gamma(k) + self.log_likelihood(d, k)
    }

    pub(crate) fn check_object(&self, d: usize) -> Result<()> {
        if d >= self.n_objects() {
            return Err(Error::OutOfRange { what: "object", index: d, bound: self.n_objects() });
        }
        Ok(())
    }

    pub(crate) fn check_sign(&self, k: usize) -> Result<()> {
        if k >= self.n_signs() {
            return Err(Error::OutOfRange { what: "sign", index: k, bound: self.n_signs() });
        }
        Ok(())
    }

    /// Resamples θ from its conjugate posterior given the current signs.
    pub fn resample_theta(&mut self, rng: &mut RngStream) -> Result<()> {
        self.theta = sample_theta_posterior(self, rng)?;
        Ok(())
    }
}

/// Unnormalized log posterior of sign `k` for object `d`:
/// `log γ_k + log N(x_d | μ_k, Λ_k⁻¹)`.
pub fn log_joint_sign_likelihood(agent: &AgentState, d: usize, k: usize) -> Result<f64> {
    agent.check_object(d)?;
    agent.check_sign(k)?;
    Ok(agent.log_joint(d, k))
}

/// The agent's posterior over signs for object `d`, as log weights.
pub fn sign_logits(agent: &AgentState, d: usize) -> Result<Vec<f64>> {
    agent.check_object(d)?;
    Ok((0..agent.n_signs()).map(|k| agent.log_joint(d, k)).collect())
}

/// The speaker's utterance: `w* ~ P(w_d | x_d, θ)` from the agent's own model.
pub fn sample_sign_proposal(agent: &AgentState, d: usize, rng: &mut RngStream) -> Result<usize> {
    agent.check_object(d)?;
    proposal_unchecked(agent, d, rng)
}

#[inline]
pub(crate) fn proposal_unchecked(agent: &AgentState, d: usize, rng: &mut RngStream) -> Result<usize> {
    let k = agent.n_signs();
    if k == 1 {
        return Ok(0);
    }
    let mut buf = [0.0f64; 32];
    if k <= buf.len() {
        for (j, slot) in buf[..k].iter_mut().enumerate() {
            *slot = agent.log_joint(d, j);
        }
        sample_log_categorical(&buf[..k], rng)
    } else {
        let logits: Vec<f64> = (0..k).map(|j| agent.log_joint(d, j)).collect();
        sample_log_categorical(&logits, rng)
    }
}

/// Exact `P(w_d | x_d^{1:n}, θ^{1:n}) ∝ γ_w Π_n N(x^n_d | μ^n_w, (Λ^n_w)⁻¹)`
/// by enumeration over the signs. γ is taken from the first agent.
pub fn joint_sign_posterior(agents: &[AgentState], d: usize) -> Result<Vec<f64>> {
    let first = agents.first().ok_or_else(|| Error::contract("no agents"))?;
    let k = first.n_signs();
    for a in agents {
        a.check_object(d)?;
        if a.n_signs() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: a.n_signs() });
        }
    }
    let logits: Vec<f64> =
        (0..k).map(|w| first.hyper.log_gamma(w) + agents.iter().map(|a| a.log_likelihood(d, w)).sum::<f64>()).collect();
    Ok(crate::kernels::softmax(&logits))
}

/// Draws θ from `P(θ | signs, x)`: one conjugate Normal-Wishart update per
/// component. Empty components are drawn from the prior.
pub fn sample_theta_posterior(agent: &AgentState, rng: &mut RngStream) -> Result<ComponentParams> {
    let k = agent.n_signs();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (d, &s) in agent.signs.iter().enumerate() {
        if s >= k {
            return Err(Error::OutOfRange { what: "sign", index: s, bound: k });
        }
        members[s].push(d);
    }
    let components = members
        .iter()
        .map(|idx| {
            let points = idx.iter().map(|&d| agent.feature(d));
            NormalWishartPosterior::update(&agent.hyper, points).sample(rng)
        })
        .collect::<Result<Vec<_>>>()?;
    ComponentParams::new(components)
}
