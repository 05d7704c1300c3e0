//! The naming game engine.
//!
//! A listener never sees the speaker's features or parameters: it only
//! receives a proposed sign and decides with its own likelihood ratio.
//! The recursive exchange uses an (n)-agent sub-game as the proposal for
//! the (n+1)-th agent. Truncating the chain (`chain_length < n_agents`) and
//! running a single internal iteration are the two cost-reducing
//! approximations; the centralized Gibbs sampler and two baselines are
//! provided for comparison.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::kernels::sample_log_categorical;
use crate::model::{proposal_unchecked, AgentState};
use crate::rng::RngStream;

/// Inference procedure run by [`play`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Exact recursive game: full chain, `T` internal iterations.
    Rmhng,
    /// One-sample approximation: `T = 1`.
    Os,
    /// Limited-length approximation: chain truncated to `M < N` agents.
    Ll,
    /// Both approximations at once.
    OsAndLl,
    /// Each agent clusters its own data; no messages.
    NoCommunication,
    /// Recursive game whose listeners accept every proposal.
    AllAcceptance,
    /// Centralized Gibbs sampler reading every agent's features.
    Gibbs,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Rmhng,
        Method::Os,
        Method::Ll,
        Method::OsAndLl,
        Method::NoCommunication,
        Method::AllAcceptance,
        Method::Gibbs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rmhng => "RMHNG",
            Method::Os => "OS",
            Method::Ll => "LL",
            Method::OsAndLl => "OS_AND_LL",
            Method::NoCommunication => "NO_COMMUNICATION",
            Method::AllAcceptance => "ALL_ACCEPTANCE",
            Method::Gibbs => "GIBBS",
        }
    }

    /// True for the four variants of the recursive game proper.
    pub fn is_recursive_variant(self) -> bool {
        matches!(self, Method::Rmhng | Method::Os | Method::Ll | Method::OsAndLl)
    }

    /// The label matching a recursive run with the given internal
    /// iterations and chain length.
    pub fn for_chain(internal_iterations: usize, chain_length: usize, n_agents: usize) -> Method {
        match (internal_iterations == 1, chain_length < n_agents) {
            (false, false) => Method::Rmhng,
            (true, false) => Method::Os,
            (false, true) => Method::Ll,
            (true, true) => Method::OsAndLl,
        }
    }

    /// Stable small integer used to derive per-method random streams.
    pub fn stream_id(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '&'], "_");
        let norm = norm.replace("__", "_");
        match norm.as_str() {
            "RMHNG" => Ok(Method::Rmhng),
            "OS" => Ok(Method::Os),
            "LL" => Ok(Method::Ll),
            "OS_AND_LL" | "OS_LL" => Ok(Method::OsAndLl),
            "NO_COMMUNICATION" => Ok(Method::NoCommunication),
            "ALL_ACCEPTANCE" => Ok(Method::AllAcceptance),
            "GIBBS" => Ok(Method::Gibbs),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// Shape and schedule of one game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameConfig {
    pub n_agents: usize,
    pub n_signs: usize,
    pub n_objects: usize,
    pub iterations: usize,
    /// `T`: internal iterations of every recursive exchange.
    pub internal_iterations: usize,
    /// `M`: number of agents taking part in each exchange.
    pub chain_length: usize,
    pub method: Method,
    pub seed: u64,
    /// Reshuffle the agent order for every object instead of once per iteration.
    pub shuffle_per_object: bool,
}

impl GameConfig {
    /// Config for `method` with its customary `T` and `M`: OS forces `T = 1`,
    /// LL truncates to a single speaker-listener pair (`M = 2`).
    pub fn preset(
        method: Method,
        n_agents: usize,
        n_signs: usize,
        n_objects: usize,
        iterations: usize,
        internal_iterations: usize,
        seed: u64,
    ) -> Self {
        let (t, m) = match method {
            Method::Rmhng | Method::AllAcceptance => (internal_iterations, n_agents),
            Method::Os => (1, n_agents),
            Method::Ll => (internal_iterations, 2.min(n_agents)),
            Method::OsAndLl => (1, 2.min(n_agents)),
            Method::NoCommunication | Method::Gibbs => (internal_iterations, n_agents),
        };
        Self {
            n_agents,
            n_signs,
            n_objects,
            iterations,
            internal_iterations: t,
            chain_length: m,
            method,
            seed,
            shuffle_per_object: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_agents < 1 {
            return fail("n_agents must be at least 1".into());
        }
        if self.n_agents < 2 && !matches!(self.method, Method::NoCommunication | Method::Gibbs) {
            return fail(format!("{} needs at least 2 agents", self.method));
        }
        if self.n_signs < 1 {
            return fail("n_signs must be at least 1".into());
        }
        if self.internal_iterations < 1 {
            return fail("internal_iterations (T) must be at least 1".into());
        }
        if self.chain_length < 1 || self.chain_length > self.n_agents {
            return fail(format!("chain_length (M) must lie in 1..={}, got {}", self.n_agents, self.chain_length));
        }
        let t1 = self.internal_iterations == 1;
        let truncated = self.chain_length < self.n_agents;
        let ok = match self.method {
            Method::Rmhng => !truncated,
            Method::Os => t1 && !truncated,
            Method::Ll => truncated,
            Method::OsAndLl => t1 && truncated,
            Method::NoCommunication | Method::AllAcceptance | Method::Gibbs => true,
        };
        if !ok {
            return fail(format!(
                "{} is inconsistent with T={} and M={} for N={}",
                self.method, self.internal_iterations, self.chain_length, self.n_agents
            ));
        }
        Ok(())
    }

    fn check_agents(&self, agents: &[AgentState]) -> Result<()> {
        self.validate()?;
        if agents.len() != self.n_agents {
            return Err(Error::Config(format!("config expects {} agents, got {}", self.n_agents, agents.len())));
        }
        for a in agents {
            if a.n_objects() != self.n_objects || a.n_signs() != self.n_signs {
                return Err(Error::Config(format!(
                    "agent {} has D={}, K={}; config expects D={}, K={}",
                    a.id(),
                    a.n_objects(),
                    a.n_signs(),
                    self.n_objects,
                    self.n_signs
                )));
            }
        }
        Ok(())
    }
}

/// How a listener decides on a proposed sign.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Acceptance {
    /// `r = min(1, P(x | θ, w*) / P(x | θ, w))` from the listener's own model.
    #[default]
    MetropolisHastings,
    /// `r = 1`: the listener adopts every proposal.
    Always,
}

/// Message counters for one iteration (or any span of exchanges).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExchangeStats {
    /// Signs sampled by a speaker from its own posterior.
    pub utterances: u64,
    /// Calls to the receiving step.
    pub receives: u64,
    /// Receives that adopted the proposed sign.
    pub accepted: u64,
}

impl ExchangeStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.receives == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.receives as f64
        }
    }
}

/// Runs exchanges under one acceptance rule and counts messages.
#[derive(Clone, Debug, Default)]
pub struct Exchange {
    pub acceptance: Acceptance,
    pub stats: ExchangeStats,
}

impl Exchange {
    pub fn new(acceptance: Acceptance) -> Self {
        Self { acceptance, stats: ExchangeStats::default() }
    }

    /// Listener-side decision on `w_star` for object `d`. Reads only the
    /// listener. Does not mutate it; the caller stores the result.
    pub fn receive(&mut self, w_star: usize, listener: &AgentState, d: usize, rng: &mut RngStream) -> Result<usize> {
        listener.check_object(d)?;
        listener.check_sign(w_star)?;
        Ok(self.receive_unchecked(w_star, listener, d, rng))
    }

    #[inline]
    fn receive_unchecked(&mut self, w_star: usize, listener: &AgentState, d: usize, rng: &mut RngStream) -> usize {
        self.stats.receives += 1;
        let current = listener.signs[d];
        let r = match self.acceptance {
            Acceptance::Always => 1.0,
            Acceptance::MetropolisHastings => {
                if w_star == current {
                    1.0
                } else {
                    let delta = listener.log_likelihood(d, w_star) - listener.log_likelihood(d, current);
                    delta.min(0.0).exp()
                }
            }
        };
        let u = rng.uniform();
        if u <= r {
            self.stats.accepted += 1;
            w_star
        } else {
            current
        }
    }

    /// Speaker samples from its own posterior, listener runs [`receive`](Self::receive).
    pub fn communicate(
        &mut self,
        speaker: &AgentState,
        listener: &AgentState,
        d: usize,
        rng: &mut RngStream,
    ) -> Result<usize> {
        speaker.check_object(d)?;
        listener.check_object(d)?;
        self.communicate_unchecked(speaker, listener, d, rng)
    }

    #[inline]
    fn communicate_unchecked(
        &mut self,
        speaker: &AgentState,
        listener: &AgentState,
        d: usize,
        rng: &mut RngStream,
    ) -> Result<usize> {
        self.stats.utterances += 1;
        let w_star = proposal_unchecked(speaker, d, rng)?;
        Ok(self.receive_unchecked(w_star, listener, d, rng))
    }

    /// Recursive exchange over `agents[chain[0]], …, agents[chain[n]]`.
    ///
    /// Repeats `internal_iterations` times: the first `n` agents play a
    /// recursive exchange among themselves, and the sign it returns is the
    /// proposal the last agent receives. With two agents this is a plain
    /// speaker-listener exchange. Sign tables are updated in place; the
    /// return value is the sign held by a uniformly chosen participant.
    pub fn recursive(
        &mut self,
        agents: &mut [AgentState],
        chain: &[usize],
        d: usize,
        internal_iterations: usize,
        rng: &mut RngStream,
    ) -> Result<usize> {
        if chain.len() < 2 {
            return Err(Error::contract(format!("recursive exchange needs at least 2 agents, got {}", chain.len())));
        }
        for &a in chain {
            if a >= agents.len() {
                return Err(Error::OutOfRange { what: "agent", index: a, bound: agents.len() });
            }
            agents[a].check_object(d)?;
        }
        self.recursive_unchecked(agents, chain, d, internal_iterations, rng)
    }

    fn recursive_unchecked(
        &mut self,
        agents: &mut [AgentState],
        chain: &[usize],
        d: usize,
        internal_iterations: usize,
        rng: &mut RngStream,
    ) -> Result<usize> {
        let n = chain.len();
        let last = chain[n - 1];
        for _ in 0..internal_iterations {
            let sign = if n > 2 {
                let proposal = self.recursive_unchecked(agents, &chain[..n - 1], d, internal_iterations, rng)?;
                self.receive_unchecked(proposal, &agents[last], d, rng)
            } else {
                self.communicate_unchecked(&agents[chain[0]], &agents[last], d, rng)?
            };
            agents[last].signs[d] = sign;
        }
        let j = chain[rng.index(n)];
        Ok(agents[j].signs[d])
    }

    /// A chain of one agent: it names the object from its own posterior.
    fn solo(&mut self, agent: &mut AgentState, d: usize, rng: &mut RngStream) -> Result<usize> {
        self.stats.utterances += 1;
        let w = proposal_unchecked(agent, d, rng)?;
        agent.signs[d] = w;
        Ok(w)
    }
}

/// Metropolis-Hastings receiving step; see [`Exchange::receive`].
pub fn mh_receive(w_star: usize, listener: &AgentState, d: usize, rng: &mut RngStream) -> Result<usize> {
    Exchange::default().receive(w_star, listener, d, rng)
}

/// One speaker-listener exchange; see [`Exchange::communicate`].
pub fn mh_communicate(speaker: &AgentState, listener: &AgentState, d: usize, rng: &mut RngStream) -> Result<usize> {
    Exchange::default().communicate(speaker, listener, d, rng)
}

/// Recursive exchange over the agents named by `chain`; see [`Exchange::recursive`].
pub fn rmh_communicate(
    agents: &mut [AgentState],
    chain: &[usize],
    d: usize,
    internal_iterations: usize,
    rng: &mut RngStream,
) -> Result<usize> {
    Exchange::default().recursive(agents, chain, d, internal_iterations, rng)
}

/// Everything recorded about one iteration of a game.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    /// Sign tables after the iteration, indexed `[agent][object]`.
    pub signs: Vec<Vec<usize>>,
    /// Agent at the end of the chain for each object.
    pub tails: Vec<usize>,
    pub stats: ExchangeStats,
    /// Wall-clock time of the iteration (exchanges plus θ updates).
    pub duration: Duration,
}

/// Append-only log of a game, one record per iteration.
#[derive(Clone, Debug)]
pub struct GameTrace {
    pub method: Method,
    pub n_agents: usize,
    pub n_signs: usize,
    pub n_objects: usize,
    pub iterations: Vec<IterationRecord>,
}

impl GameTrace {
    fn new(config: &GameConfig) -> Self {
        Self {
            method: config.method,
            n_agents: config.n_agents,
            n_signs: config.n_signs,
            n_objects: config.n_objects,
            iterations: Vec::with_capacity(config.iterations),
        }
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn total_duration(&self) -> Duration {
        self.iterations.iter().map(|r| r.duration).sum()
    }

    pub fn final_signs(&self) -> Option<&[Vec<usize>]> {
        self.iterations.last().map(|r| r.signs.as_slice())
    }
}

fn snapshot(agents: &[AgentState]) -> Vec<Vec<usize>> {
    agents.iter().map(|a| a.signs.clone()).collect()
}

/// Runs `config.method` on already-initialized agents.
pub fn play(config: &GameConfig, agents: &mut [AgentState], rng: &mut RngStream) -> Result<GameTrace> {
    match config.method {
        Method::NoCommunication => run_no_communication(config, agents, rng),
        Method::Gibbs => run_gibbs_topline(config, agents, rng),
        _ => run_game(config, agents, rng),
    }
}

/// The recursive naming game (and its approximations / all-acceptance
/// baseline). Each iteration shuffles the agents, runs one recursive
/// exchange per object over the first `M` of them, then lets every agent
/// resample θ from its own sign table.
pub fn run_game(config: &GameConfig, agents: &mut [AgentState], rng: &mut RngStream) -> Result<GameTrace> {
    config.check_agents(agents)?;
    let acceptance = match config.method {
        Method::AllAcceptance => Acceptance::Always,
        Method::NoCommunication | Method::Gibbs => {
            return Err(Error::Config(format!("{} is not a recursive game", config.method)))
        }
        _ => Acceptance::MetropolisHastings,
    };
    let m = config.chain_length;
    let mut order: Vec<usize> = (0..config.n_agents).collect();
    let mut trace = GameTrace::new(config);
    for i in 0..config.iterations {
        let start = Instant::now();
        let mut exchange = Exchange::new(acceptance);
        let mut tails = Vec::with_capacity(config.n_objects);
        if !config.shuffle_per_object {
            rng.shuffle(&mut order);
        }
        for d in 0..config.n_objects {
            if config.shuffle_per_object {
                rng.shuffle(&mut order);
            }
            if m >= 2 {
                exchange.recursive_unchecked(agents, &order[..m], d, config.internal_iterations, rng)
            } else {
                exchange.solo(&mut agents[order[0]], d, rng)
            }
            .map_err(|e| e.context(format!("iteration {i}, object {d}")))?;
            tails.push(order[m - 1]);
        }
        for agent in agents.iter_mut() {
            agent
                .resample_theta(rng)
                .map_err(|e| e.context(format!("iteration {i}, agent {} theta update", agent.id())))?;
        }
        trace.iterations.push(IterationRecord {
            signs: snapshot(agents),
            tails,
            stats: exchange.stats,
            duration: start.elapsed(),
        });
    }
    Ok(trace)
}

/// Baseline: each agent runs its own Gibbs sampler for a Gaussian mixture.
pub fn run_no_communication(config: &GameConfig, agents: &mut [AgentState], rng: &mut RngStream) -> Result<GameTrace> {
    config.check_agents(agents)?;
    let mut trace = GameTrace::new(config);
    for i in 0..config.iterations {
        let start = Instant::now();
        let mut stats = ExchangeStats::default();
        for agent in agents.iter_mut() {
            for d in 0..config.n_objects {
                agent.signs[d] = proposal_unchecked(agent, d, rng)?;
                stats.utterances += 1;
            }
            agent
                .resample_theta(rng)
                .map_err(|e| e.context(format!("iteration {i}, agent {} theta update", agent.id())))?;
        }
        trace.iterations.push(IterationRecord {
            signs: snapshot(agents),
            tails: vec![0; config.n_objects],
            stats,
            duration: start.elapsed(),
        });
    }
    Ok(trace)
}

/// Topline: a centralized Gibbs sampler over a single shared sign table,
/// `w_d ∝ γ_k Π_n N(x^n_d | μ^n_k, (Λ^n_k)⁻¹)`, followed by every agent's θ
/// update given the shared signs. The prior γ is taken from agent 0.
pub fn run_gibbs_topline(config: &GameConfig, agents: &mut [AgentState], rng: &mut RngStream) -> Result<GameTrace> {
    config.check_agents(agents)?;
    let k = config.n_signs;
    let mut shared = agents[0].signs.clone();
    let mut logits = vec![0.0; k];
    let mut trace = GameTrace::new(config);
    for i in 0..config.iterations {
        let start = Instant::now();
        for (d, slot) in shared.iter_mut().enumerate() {
            for (j, l) in logits.iter_mut().enumerate() {
                *l = agents[0].hyper().log_gamma(j) + agents.iter().map(|a| a.log_likelihood(d, j)).sum::<f64>();
            }
            *slot =
                sample_log_categorical(&logits, rng).map_err(|e| e.context(format!("iteration {i}, object {d}")))?;
        }
        for agent in agents.iter_mut() {
            agent.signs.clone_from(&shared);
            agent
                .resample_theta(rng)
                .map_err(|e| e.context(format!("iteration {i}, agent {} theta update", agent.id())))?;
        }
        trace.iterations.push(IterationRecord {
            signs: snapshot(agents),
            tails: vec![0; config.n_objects],
            stats: ExchangeStats { utterances: config.n_objects as u64, ..Default::default() },
            duration: start.elapsed(),
        });
    }
    Ok(trace)
}
