//! Multi-trial experiments, timing sweeps and their CSV/SVG outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::config::{AgreementSource, ExperimentConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::game::{play, GameConfig, GameTrace, Method};
use crate::metrics::{self, KappaMethod, SignCountMatrix, SignSource};
use crate::model::AgentState;
use crate::plot;
use crate::rng::RngStream;

pub const TIMING_RUNS: usize = 3;
pub const TIMING_ITERATIONS: usize = 10;

/// One row of `summary.csv`. `agent == None` is the pooled "all" row.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub agent: Option<usize>,
    pub ari_mean: Option<f64>,
    pub ari_std: Option<f64>,
    pub kappa_mean: Option<f64>,
    pub kappa_std: Option<f64>,
    pub agreement: Option<f64>,
}

/// One row of `per_iteration.csv`; iterations count from 1.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRow {
    pub method: Method,
    pub trial: usize,
    pub iteration: usize,
    pub agent: usize,
    pub ari: Option<f64>,
    pub kappa: Option<f64>,
}

/// One row of `timing.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub method: Method,
    pub t: usize,
    pub m: usize,
    pub seconds_per_iteration: f64,
    pub utterances_per_iteration: f64,
    pub receives_per_iteration: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub n_agents: usize,
    pub window: usize,
    pub summary: Vec<SummaryRow>,
    pub per_iteration: Vec<IterationRow>,
    pub timing: Vec<TimingRow>,
}

impl ResultTable {
    pub fn row(&self, method: Method, agent: Option<usize>) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.method == method && r.agent == agent)
    }

    /// The pooled row of `method`.
    pub fn overall(&self, method: Method) -> Option<&SummaryRow> {
        self.row(method, None)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut ms: Vec<Method> = self.summary.iter().map(|r| r.method).collect();
        ms.dedup();
        ms
    }
}

/// Everything kept from one (method, trial) run.
#[derive(Clone, Debug)]
struct TrialOutcome {
    method: Method,
    trial: usize,
    game: GameConfig,
    /// `[iteration][agent]`, empty without labels.
    ari: Vec<Vec<f64>>,
    /// Per iteration, empty when κ is undefined for the method.
    kappa: Vec<f64>,
    tail_counts: SignCountMatrix,
    agent_counts: Vec<SignCountMatrix>,
    seconds_per_iteration: f64,
    utterances_per_iteration: f64,
    receives_per_iteration: f64,
}

/// Fresh agents for one run: uniform random signs, θ from the posterior.
pub fn init_agents(cfg: &ExperimentConfig, ds: &Dataset, rng: &RngStream) -> Result<Vec<AgentState>> {
    (0..ds.n_agents())
        .map(|n| {
            let hyper = cfg.hyperparams(n, ds.dim())?;
            AgentState::initialize(n, ds.agent_features(n).to_vec(), hyper, &mut rng.substream(n as u64))
        })
        .collect()
}

fn sample_stats(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    let mean = xs.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn run_trial(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    method: Method,
    trial: usize,
    kappa: KappaMethod,
) -> Result<TrialOutcome> {
    let seed = cfg.experiment.seed;
    let game = cfg.game_config(method, ds.n_agents(), ds.n_objects(), seed)?;
    let rng = RngStream::derive(seed, &[method.stream_id(), trial as u64]);
    let mut agents = init_agents(cfg, ds, &rng.substream(0))?;
    let trace = play(&game, &mut agents, &mut rng.substream(1))?;
    log::debug!("{method} trial {trial}: {:.3}s", trace.total_duration().as_secs_f64());

    let ari = match ds.labels() {
        Some(truth) => trace
            .iterations
            .iter()
            .map(|rec| rec.signs.iter().map(|s| metrics::adjusted_rand_index(s, truth)).collect())
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let kappa = if method != Method::Gibbs && ds.n_agents() >= 2 {
        trace
            .iterations
            .iter()
            .map(|rec| metrics::kappa_with(&rec.signs, game.n_signs, kappa))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let window = cfg.experiment.window;
    let tail_counts = metrics::collect_sign_counts(&trace, window, SignSource::ChainTail)?;
    let agent_counts = (0..ds.n_agents())
        .map(|a| metrics::collect_sign_counts(&trace, window, SignSource::Agent(a)))
        .collect::<Result<_>>()?;
    let (secs, utt, rec) = per_iteration_cost(&trace);
    Ok(TrialOutcome {
        method,
        trial,
        game,
        ari,
        kappa,
        tail_counts,
        agent_counts,
        seconds_per_iteration: secs,
        utterances_per_iteration: utt,
        receives_per_iteration: rec,
    })
}

fn per_iteration_cost(trace: &GameTrace) -> (f64, f64, f64) {
    let n = trace.len().max(1) as f64;
    let utt: u64 = trace.iterations.iter().map(|r| r.stats.utterances).sum();
    let rec: u64 = trace.iterations.iter().map(|r| r.stats.receives).sum();
    (trace.total_duration().as_secs_f64() / n, utt as f64 / n, rec as f64 / n)
}

/// Runs every configured method for every trial (in parallel) on one shared
/// dataset and aggregates the final-window statistics.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let ds = cfg.dataset.build(cfg.experiment.seed)?;
    run_experiment_on(cfg, &ds)
}

/// [`run_experiment`] on an already built dataset.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ResultTable> {
    let methods = cfg.all_methods();
    for &m in &methods {
        cfg.game_config(m, ds.n_agents(), ds.n_objects(), cfg.experiment.seed)?;
    }
    if let Some(k) = ds.n_classes() {
        if k > cfg.game.n_signs {
            log::warn!("dataset has {k} classes but only {} signs", cfg.game.n_signs);
        }
    }
    log::info!(
        "dataset {}: N={} D={} dim={}; methods {:?}; {} trials",
        ds.name,
        ds.n_agents(),
        ds.n_objects(),
        ds.dim(),
        methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.experiment.trials
    );
    let kappa: KappaMethod = cfg.experiment.kappa.into();
    let jobs: Vec<(Method, usize)> =
        methods.iter().flat_map(|&m| (0..cfg.experiment.trials).map(move |t| (m, t))).collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .into_par_iter()
        .map(|(m, t)| run_trial(cfg, ds, m, t, kappa).map_err(|e| e.context(format!("{m} trial {t}"))))
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, ds, &methods, &outcomes))
}

fn aggregate(cfg: &ExperimentConfig, ds: &Dataset, methods: &[Method], outcomes: &[TrialOutcome]) -> ResultTable {
    let n_agents = ds.n_agents();
    let window = cfg.experiment.window;
    let mut table = ResultTable { n_agents, window, ..Default::default() };
    let gibbs: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.method == Method::Gibbs).collect();

    for &method in methods {
        let runs: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.method == method).collect();
        for o in &runs {
            let iters = o.game.iterations;
            for i in 0..iters {
                for a in 0..n_agents {
                    table.per_iteration.push(IterationRow {
                        method,
                        trial: o.trial,
                        iteration: i + 1,
                        agent: a,
                        ari: o.ari.get(i).map(|r| r[a]),
                        kappa: o.kappa.get(i).copied(),
                    });
                }
            }
        }

        let tail = |o: &TrialOutcome| o.ari.len().saturating_sub(window);
        let ari_stats = |agents: &[usize]| {
            let xs =
                runs.iter().flat_map(|o| o.ari[tail(o)..].iter().flat_map(move |r| agents.iter().map(move |&a| r[a])));
            (ds.labels().is_some()).then(|| sample_stats(xs))
        };
        let kappa_stats = {
            let xs = runs.iter().flat_map(|o| o.kappa[o.kappa.len().saturating_sub(window)..].iter().copied());
            (runs.iter().all(|o| !o.kappa.is_empty())).then(|| sample_stats(xs))
        };
        let agreement_with = |pick: &dyn Fn(&TrialOutcome) -> f64| -> Option<f64> {
            (method != Method::Gibbs && gibbs.len() == runs.len() && !runs.is_empty())
                .then(|| runs.iter().map(|o| pick(o)).sum::<f64>() / runs.len() as f64)
        };
        let gibbs_of = |o: &TrialOutcome| gibbs.iter().find(|g| g.trial == o.trial).map(|g| &g.agent_counts[0]);
        let agree = |counts: &SignCountMatrix, o: &TrialOutcome| {
            gibbs_of(o).and_then(|g| metrics::posterior_agreement(counts, g).ok()).unwrap_or(f64::NAN)
        };

        for a in 0..n_agents {
            let ari = ari_stats(&[a]);
            table.summary.push(SummaryRow {
                method,
                agent: Some(a),
                ari_mean: ari.map(|s| s.0),
                ari_std: ari.map(|s| s.1),
                kappa_mean: kappa_stats.map(|s| s.0),
                kappa_std: kappa_stats.map(|s| s.1),
                agreement: agreement_with(&|o| agree(&o.agent_counts[a], o)),
            });
        }
        let all: Vec<usize> = (0..n_agents).collect();
        let ari = ari_stats(&all);
        let overall_agreement = match cfg.experiment.agreement_source {
            AgreementSource::Tail => agreement_with(&|o| agree(&o.tail_counts, o)),
            AgreementSource::Average => {
                agreement_with(&|o| o.agent_counts.iter().map(|c| agree(c, o)).sum::<f64>() / n_agents as f64)
            }
        };
        table.summary.push(SummaryRow {
            method,
            agent: None,
            ari_mean: ari.map(|s| s.0),
            ari_std: ari.map(|s| s.1),
            kappa_mean: kappa_stats.map(|s| s.0),
            kappa_std: kappa_stats.map(|s| s.1),
            agreement: overall_agreement,
        });

        if let Some(first) = runs.first() {
            let k = runs.len() as f64;
            table.timing.push(TimingRow {
                method,
                t: first.game.internal_iterations,
                m: first.game.chain_length,
                seconds_per_iteration: runs.iter().map(|o| o.seconds_per_iteration).sum::<f64>() / k,
                utterances_per_iteration: runs.iter().map(|o| o.utterances_per_iteration).sum::<f64>() / k,
                receives_per_iteration: runs.iter().map(|o| o.receives_per_iteration).sum::<f64>() / k,
            });
        }
    }
    table
}

/// Per (T, M): mean seconds per iteration over [`TIMING_RUNS`] runs of
/// [`TIMING_ITERATIONS`] iterations. Runs are sequential so they don't
/// compete for cores.
pub fn run_timing_sweep(cfg: &ExperimentConfig, t_values: &[usize], m_values: &[usize]) -> Result<Vec<TimingRow>> {
    let ds = cfg.dataset.build(cfg.experiment.seed)?;
    timing_sweep_on(cfg, &ds, t_values, m_values, TIMING_RUNS, TIMING_ITERATIONS)
}

/// [`run_timing_sweep`] with explicit dataset, run count and run length.
pub fn timing_sweep_on(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    t_values: &[usize],
    m_values: &[usize],
    runs: usize,
    iterations: usize,
) -> Result<Vec<TimingRow>> {
    if t_values.is_empty() || m_values.is_empty() || runs == 0 || iterations == 0 {
        return Err(Error::Config("timing sweep needs T values, M values, runs and iterations".into()));
    }
    let n = ds.n_agents();
    let mut rows = Vec::new();
    for &m in m_values {
        for &t in t_values {
            if t == 0 || m == 0 || m > n {
                return Err(Error::Config(format!("timing point T={t}, M={m} invalid for N={n}")));
            }
            let method = Method::for_chain(t, m, n);
            let game = GameConfig {
                n_agents: n,
                n_signs: cfg.game.n_signs,
                n_objects: ds.n_objects(),
                iterations,
                internal_iterations: t,
                chain_length: m,
                method,
                seed: cfg.experiment.seed,
                shuffle_per_object: cfg.game.shuffle_per_object,
            };
            game.validate()?;
            let (mut secs, mut utt, mut rec) = (0.0, 0.0, 0.0);
            for run in 0..runs {
                let rng = RngStream::derive(cfg.experiment.seed, &[0x7131, t as u64, m as u64, run as u64]);
                let mut agents = init_agents(cfg, ds, &rng.substream(0))?;
                let trace = play(&game, &mut agents, &mut rng.substream(1))?;
                let (s, u, r) = per_iteration_cost(&trace);
                secs += s;
                utt += u;
                rec += r;
            }
            let k = runs as f64;
            log::info!("timing T={t} M={m}: {:.6} s/iteration", secs / k);
            rows.push(TimingRow {
                method,
                t,
                m,
                seconds_per_iteration: secs / k,
                utterances_per_iteration: utt / k,
                receives_per_iteration: rec / k,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(table: &ResultTable) -> String {
    let mut s = String::from("method,agent,ari_mean,ari_std,kappa_mean,kappa_std,agreement\n");
    for r in &table.summary {
        let agent = r.agent.map_or_else(|| "all".to_string(), |a| a.to_string());
        writeln!(
            s,
            "{},{agent},{},{},{},{},{}",
            r.method,
            opt(r.ari_mean),
            opt(r.ari_std),
            opt(r.kappa_mean),
            opt(r.kappa_std),
            opt(r.agreement)
        )
        .unwrap();
    }
    s
}

pub fn per_iteration_csv(rows: &[IterationRow]) -> String {
    let mut s = String::from("method,trial,iteration,agent,ari,kappa\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{},{}", r.method, r.trial, r.iteration, r.agent, opt(r.ari), opt(r.kappa)).unwrap();
    }
    s
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut s = String::from("method,t,m,seconds_per_iteration,utterances_per_iteration,receives_per_iteration\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.method, r.t, r.m, r.seconds_per_iteration, r.utterances_per_iteration, r.receives_per_iteration
        )
        .unwrap();
    }
    s
}

fn parse_opt(field: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| crate::error::DataError::Malformed { line, message: format!("bad number {field:?}") }.into())
}

/// Reads `per_iteration.csv` back.
pub fn read_per_iteration_csv(path: impl AsRef<Path>) -> Result<Vec<IterationRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::from(crate::error::DataError::Invalid(e.to_string())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| -> Error {
            crate::error::DataError::Malformed { line, message: format!("bad {what}") }.into()
        };
        rows.push(IterationRow {
            method: rec[0].parse().map_err(|_| bad("method"))?,
            trial: rec[1].parse().map_err(|_| bad("trial"))?,
            iteration: rec[2].parse().map_err(|_| bad("iteration"))?,
            agent: rec[3].parse().map_err(|_| bad("agent"))?,
            ari: parse_opt(&rec[4], line)?,
            kappa: parse_opt(&rec[5], line)?,
        });
    }
    Ok(rows)
}

/// Mean ARI and κ per (method, iteration) across trials and agents.
fn curves(rows: &[IterationRow], pick: fn(&IterationRow) -> Option<f64>) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .filter_map(|m| {
            let iters = rows.iter().filter(|r| r.method == m).map(|r| r.iteration).max()?;
            let pts: Vec<(f64, f64)> = (1..=iters)
                .filter_map(|i| {
                    let vals: Vec<f64> =
                        rows.iter().filter(|r| r.method == m && r.iteration == i).filter_map(pick).collect();
                    (!vals.is_empty()).then(|| (i as f64, vals.iter().sum::<f64>() / vals.len() as f64))
                })
                .collect();
            (!pts.is_empty()).then(|| (m.name().to_string(), pts))
        })
        .collect()
}

/// SVG plots of mean ARI and κ against iteration.
pub fn iteration_plots(rows: &[IterationRow]) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let ari = curves(rows, |r| r.ari);
    if !ari.is_empty() {
        out.push(("ari.svg", plot::line_chart("ARI", "iteration", "ARI", &ari, false)));
    }
    let kappa = curves(rows, |r| r.kappa);
    if !kappa.is_empty() {
        out.push(("kappa.svg", plot::line_chart("kappa", "iteration", "kappa", &kappa, false)));
    }
    out
}

/// Log-log plot of seconds per iteration against T, one line per M.
pub fn timing_plot(rows: &[TimingRow]) -> String {
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.sort();
    ms.dedup();
    let series: Vec<(String, Vec<(f64, f64)>)> = ms
        .iter()
        .map(|&m| {
            let pts = rows.iter().filter(|r| r.m == m).map(|r| (r.t as f64, r.seconds_per_iteration)).collect();
            (format!("M={m}"), pts)
        })
        .collect();
    plot::line_chart("time per iteration", "T", "seconds", &series, true)
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))
}

/// Writes `summary.csv`, `per_iteration.csv`, `timing.csv` and, if asked,
/// the SVG plots into `dir`.
pub fn emit_outputs(table: &ResultTable, dir: &Path, plots: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "summary.csv", &summary_csv(table))?;
    write(dir, "per_iteration.csv", &per_iteration_csv(&table.per_iteration))?;
    write(dir, "timing.csv", &timing_csv(&table.timing))?;
    if plots {
        for (name, svg) in iteration_plots(&table.per_iteration) {
            write(dir, name, &svg)?;
        }
    }
    Ok(())
}

/// Writes a timing sweep as `timing.csv` plus, if asked, `timing.svg`.
pub fn emit_timing(rows: &[TimingRow], dir: &Path, plots: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "timing.csv", &timing_csv(rows))?;
    if plots {
        write(dir, "timing.svg", &timing_plot(rows))?;
    }
    Ok(())
}
