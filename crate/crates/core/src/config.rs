//! Experiment configuration files.
//!
//! A `.cfg` file is TOML with the tables `[dataset]`, `[game]`,
//! `[experiment]`, `[hyper]` and one optional `[method.<NAME>]` table per
//! method override. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::data::{self, Dataset, FeatureLayout, FixtureSpec};
use crate::error::{Error, Result};
use crate::game::{GameConfig, Method};
use crate::metrics::KappaMethod;
use crate::model::Hyperparams;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// 4-agent, 5-cluster benchmark.
    Synthetic {
        #[serde(default = "default_per_cluster")]
        per_cluster: usize,
        seed: Option<u64>,
    },
    /// Generated multi-view fixture.
    Fixture {
        #[serde(default = "default_fixture_agents")]
        n_agents: usize,
        #[serde(default = "default_fixture_dim")]
        dim: usize,
        #[serde(default = "default_fixture_classes")]
        classes: usize,
        #[serde(default = "default_views")]
        views_per_class: usize,
        #[serde(default = "default_spread")]
        spread: f64,
        #[serde(default = "default_noise")]
        noise: f64,
        seed: Option<u64>,
    },
    /// CSV feature file; relative paths resolve against the config's directory.
    File { path: PathBuf, n_agents: Option<usize>, dim: Option<usize> },
}

fn default_per_cluster() -> usize {
    data::DEFAULT_PER_CLUSTER
}
fn default_fixture_agents() -> usize {
    FixtureSpec::default().n_agents
}
fn default_fixture_dim() -> usize {
    FixtureSpec::default().dim
}
fn default_fixture_classes() -> usize {
    FixtureSpec::default().n_classes
}
fn default_views() -> usize {
    FixtureSpec::default().views_per_class
}
fn default_spread() -> f64 {
    FixtureSpec::default().spread
}
fn default_noise() -> f64 {
    FixtureSpec::default().noise
}

impl DatasetSpec {
    /// Builds or loads the dataset; `fallback_seed` is used when the section sets none.
    pub fn build(&self, fallback_seed: u64) -> Result<Dataset> {
        match self {
            DatasetSpec::Synthetic { per_cluster, seed } => {
                data::generate_synthetic(*per_cluster, seed.unwrap_or(fallback_seed))
                    .map_err(|e| Error::Config(format!("synthetic dataset: {e}")))
            }
            DatasetSpec::Fixture { n_agents, dim, classes, views_per_class, spread, noise, seed } => {
                let spec = FixtureSpec {
                    n_agents: *n_agents,
                    dim: *dim,
                    n_classes: *classes,
                    views_per_class: *views_per_class,
                    spread: *spread,
                    noise: *noise,
                };
                data::generate_fixture(&spec, seed.unwrap_or(fallback_seed))
                    .map_err(|e| Error::Config(format!("fixture dataset: {e}")))
            }
            DatasetSpec::File { path, n_agents, dim } => {
                let layout = FeatureLayout { n_agents: *n_agents, dim: *dim, ..Default::default() };
                data::load_feature_file(path, &layout)
            }
        }
    }

    fn is_synthetic(&self) -> bool {
        matches!(self, DatasetSpec::Synthetic { .. })
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    /// K
    pub n_signs: usize,
    /// I
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// T for the exact game.
    #[serde(default = "default_t")]
    pub internal_iterations: usize,
    /// M; defaults to every agent.
    pub chain_length: Option<usize>,
    #[serde(default)]
    pub shuffle_per_object: bool,
}

fn default_iterations() -> usize {
    100
}
fn default_t() -> usize {
    4
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AgreementSource {
    /// Tally the chain-tail agent's sign.
    #[default]
    Tail,
    /// Average the agreement of every agent's own sign table.
    Average,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KappaChoice {
    #[default]
    Pairwise,
    Fleiss,
}

impl From<KappaChoice> for KappaMethod {
    fn from(k: KappaChoice) -> Self {
        match k {
            KappaChoice::Pairwise => KappaMethod::MeanPairwiseCohen,
            KappaChoice::Fleiss => KappaMethod::Fleiss,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Final iterations summarized and tallied for agreement.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub kappa: KappaChoice,
    /// Compare against a Gibbs run of the same trial.
    #[serde(default = "default_true")]
    pub agreement: bool,
    #[serde(default)]
    pub agreement_source: AgreementSource,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plots: bool,
}

fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.name().to_string()).collect()
}
fn default_trials() -> usize {
    5
}
fn default_window() -> usize {
    10
}
fn default_true() -> bool {
    true
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// Normal-Wishart and sign-prior settings; missing keys take the dataset's defaults.
#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub alpha_bar: Option<f64>,
    pub m: Option<f64>,
    pub w: Option<f64>,
    pub nu: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    /// Per-agent overrides keyed by agent index.
    #[serde(default)]
    pub agent: BTreeMap<String, HyperSection>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MethodOverride {
    pub iterations: Option<usize>,
    pub internal_iterations: Option<usize>,
    pub chain_length: Option<usize>,
    pub shuffle_per_object: Option<bool>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: DatasetSpec,
    game: GameSection,
    #[serde(default = "default_experiment")]
    experiment: ExperimentSection,
    #[serde(default)]
    hyper: HyperSection,
    #[serde(default)]
    method: BTreeMap<String, MethodOverride>,
}

fn default_experiment() -> ExperimentSection {
    toml::from_str("").expect("experiment defaults")
}

/// A parsed and validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub game: GameSection,
    pub experiment: ExperimentSection,
    pub hyper: HyperSection,
    pub methods: Vec<Method>,
    pub overrides: BTreeMap<Method, MethodOverride>,
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| e.context(path.display().to_string()))?;
        if let DatasetSpec::File { path: p, .. } = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let methods = raw.experiment.methods.iter().map(|s| s.parse::<Method>()).collect::<Result<Vec<_>>>()?;
        let mut overrides = BTreeMap::new();
        for (name, o) in raw.method {
            overrides.insert(name.parse::<Method>()?, o);
        }
        for key in raw.hyper.agent.keys() {
            key.parse::<usize>()
                .map_err(|_| Error::Config(format!("hyper.agent key {key:?} is not an agent index")))?;
        }
        let cfg = Self {
            dataset: raw.dataset,
            game: raw.game,
            experiment: raw.experiment,
            hyper: raw.hyper,
            methods,
            overrides,
        };
        cfg.validate_shape()?;
        Ok(cfg)
    }

    fn validate_shape(&self) -> Result<()> {
        let e = &self.experiment;
        if e.trials < 1 {
            return Err(Error::Config("experiment.trials must be at least 1".into()));
        }
        if e.window < 1 {
            return Err(Error::Config("experiment.window must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("experiment.methods is empty".into()));
        }
        if self.game.n_signs < 1 {
            return Err(Error::Config("game.n_signs must be at least 1".into()));
        }
        for m in self.all_methods() {
            let iters = self.overrides.get(&m).and_then(|o| o.iterations).unwrap_or(self.game.iterations);
            if e.window > iters {
                return Err(Error::Config(format!("window {} exceeds {m} iterations {iters}", e.window)));
            }
        }
        Ok(())
    }

    /// Restricts the run to one method.
    pub fn select_method(&mut self, method: Method) {
        self.methods = vec![method];
    }

    /// Methods actually run: the requested ones, plus GIBBS when agreement is on.
    pub fn all_methods(&self) -> Vec<Method> {
        let mut ms = self.methods.clone();
        if self.experiment.agreement && !ms.contains(&Method::Gibbs) {
            ms.push(Method::Gibbs);
        }
        ms.sort();
        ms.dedup();
        ms
    }

    /// The game configuration for `method` on a dataset of the given shape.
    pub fn game_config(&self, method: Method, n_agents: usize, n_objects: usize, seed: u64) -> Result<GameConfig> {
        let o = self.overrides.get(&method).cloned().unwrap_or_default();
        let mut cfg = GameConfig::preset(
            method,
            n_agents,
            self.game.n_signs,
            n_objects,
            o.iterations.unwrap_or(self.game.iterations),
            self.game.internal_iterations,
            seed,
        );
        if method == Method::Rmhng || method == Method::AllAcceptance {
            if let Some(m) = self.game.chain_length {
                cfg.chain_length = m;
            }
        }
        if let Some(t) = o.internal_iterations {
            cfg.internal_iterations = t;
        }
        if let Some(m) = o.chain_length {
            cfg.chain_length = m;
        }
        cfg.shuffle_per_object = o.shuffle_per_object.unwrap_or(self.game.shuffle_per_object);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hyperparameters of agent `n`, after the per-agent override if any.
    pub fn hyperparams(&self, agent: usize, dim: usize) -> Result<Hyperparams> {
        let base = if self.dataset.is_synthetic() {
            Hyperparams::synthetic_default(self.game.n_signs)
        } else {
            Hyperparams::feature_default(dim, self.game.n_signs)
        };
        let pick = |f: fn(&HyperSection) -> Option<f64>, default: f64| {
            self.hyper.agent.get(&agent.to_string()).and_then(f).or_else(|| f(&self.hyper)).unwrap_or(default)
        };
        let alpha_bar = pick(|h| h.alpha_bar, base.alpha_bar());
        let m = pick(|h| h.m, base.m()[0]);
        let w = pick(|h| h.w, base.w()[(0, 0)]);
        let nu = pick(|h| h.nu, base.nu());
        let gamma = self
            .hyper
            .agent
            .get(&agent.to_string())
            .and_then(|h| h.gamma.clone())
            .or_else(|| self.hyper.gamma.clone())
            .unwrap_or_else(|| vec![1.0; self.game.n_signs]);
        if gamma.len() != self.game.n_signs {
            return Err(Error::Config(format!(
                "hyper.gamma has {} entries, n_signs is {}",
                gamma.len(),
                self.game.n_signs
            )));
        }
        if !(w > 0.0) {
            return Err(Error::Config(format!("hyper.w must be positive, got {w}")));
        }
        Hyperparams::new(
            nalgebra::DVector::from_element(dim, m),
            alpha_bar,
            nu,
            nalgebra::DMatrix::identity(dim, dim) * w,
            gamma,
        )
        .map_err(|e| Error::Config(format!("agent {agent} hyperparameters: {e}")))
    }
}
