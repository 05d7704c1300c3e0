//! Datasets: the 4-agent synthetic benchmark, a clustered multi-view
//! fixture standing in for precomputed image features, and the CSV feature
//! file format.
//!
//! Feature files are plain comma-separated text with the header
//! `agent,object,dim_0,...,dim_{dim-1}[,label]`, one row per
//! (agent, object) pair in any order. Lines starting with `#` are comments;
//! `# name=<value>` and `# seed=<value>` carry dataset metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{DataError, Error, Result};
use crate::kernels::{sample_gaussian, GaussianParams};
use crate::rng::RngStream;

/// Cluster means of the synthetic benchmark; agent `n` observes coordinate `n`.
pub const SYNTHETIC_MEANS: [[f64; 4]; 5] = [
    [0.0, 1.0, 2.0, 3.0],
    [0.0, 5.0, 6.0, 7.0],
    [8.0, 5.0, 10.0, 11.0],
    [12.0, 13.0, 10.0, 15.0],
    [16.0, 17.0, 18.0, 15.0],
];

/// Points per synthetic cluster when unspecified (D = 1000).
pub const DEFAULT_PER_CLUSTER: usize = 200;

/// Per-agent feature vectors for a shared set of objects.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    dim: usize,
    n_objects: usize,
    /// Row-major `D × dim` block per agent.
    features: Vec<Vec<f64>>,
    labels: Option<Vec<usize>>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        features: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(DataError::Invalid("feature dimension must be positive".into()).into());
        }
        if features.is_empty() {
            return Err(DataError::Empty.into());
        }
        let expected = features[0].len() / dim;
        for (agent, block) in features.iter().enumerate() {
            if block.len() % dim != 0 {
                return Err(DataError::Invalid(format!(
                    "agent {agent}: {} values is not a multiple of dim {dim}",
                    block.len()
                ))
                .into());
            }
            if block.len() / dim != expected {
                return Err(DataError::InconsistentCount { agent, actual: block.len() / dim, expected }.into());
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(DataError::Invalid(format!("agent {agent} has non-finite features")).into());
            }
        }
        if let Some(l) = &labels {
            if l.len() != expected {
                return Err(DataError::Invalid(format!("{} labels for {expected} objects", l.len())).into());
            }
        }
        Ok(Self { name: name.into(), dim, n_objects: expected, features, labels, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.features.len()
    }

    pub fn n_objects(&self) -> usize {
        self.n_objects
    }

    /// Agent `n`'s features as a row-major `D × dim` block.
    pub fn agent_features(&self, n: usize) -> &[f64] {
        &self.features[n]
    }

    pub fn feature(&self, agent: usize, object: usize) -> &[f64] {
        &self.features[agent][object * self.dim..(object + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }
}

/// Five 4-dimensional unit-variance Gaussians; agent `n` sees coordinate `n`
/// only, so agent `n` alone cannot separate clusters `n` and `n+1`.
pub fn generate_synthetic(n_per_cluster: usize, seed: u64) -> Result<Dataset> {
    if n_per_cluster == 0 {
        return Err(Error::contract("n_per_cluster must be at least 1"));
    }
    let mut rng = RngStream::new(seed).substream(0x5e7);
    let n_agents = SYNTHETIC_MEANS[0].len();
    let mut features = vec![Vec::with_capacity(n_per_cluster * SYNTHETIC_MEANS.len()); n_agents];
    let mut labels = Vec::with_capacity(n_per_cluster * SYNTHETIC_MEANS.len());
    for (cluster, mean) in SYNTHETIC_MEANS.iter().enumerate() {
        let dist = GaussianParams::new(DVector::from_row_slice(mean), DMatrix::identity(n_agents, n_agents))?;
        for _ in 0..n_per_cluster {
            let x = sample_gaussian(&dist, &mut rng);
            for (n, block) in features.iter_mut().enumerate() {
                block.push(x[n]);
            }
            labels.push(cluster);
        }
    }
    Dataset::new(format!("synthetic-{n_per_cluster}"), 1, features, Some(labels), Some(seed))
}

/// Shape of the clustered multi-view fixture.
#[derive(Clone, Debug, PartialEq)]
pub struct FixtureSpec {
    pub n_agents: usize,
    pub dim: usize,
    pub n_classes: usize,
    /// Rows per class per agent; `D = views_per_class · n_classes`.
    pub views_per_class: usize,
    /// Standard deviation of class means around the origin.
    pub spread: f64,
    /// Within-class standard deviation.
    pub noise: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self { n_agents: 4, dim: 10, n_classes: 6, views_per_class: 60, spread: 0.1, noise: 0.03 }
    }
}

/// Clustered features where each agent has its own view of every class.
/// Agent `n` sees class `(n+1) mod C` exactly like class `n mod C`, so no
/// single agent can recover the full partition on its own.
pub fn generate_fixture(spec: &FixtureSpec, seed: u64) -> Result<Dataset> {
    if spec.n_agents == 0 || spec.dim == 0 || spec.n_classes < 2 || spec.views_per_class == 0 {
        return Err(Error::contract("fixture needs agents, dimensions, ≥2 classes and views"));
    }
    let root = RngStream::new(seed).substream(0xf1c);
    let mut mean_rng = root.substream(0);
    let mut noise_rng = root.substream(1);
    let c = spec.n_classes;
    let means: Vec<Vec<DVector<f64>>> = (0..spec.n_agents)
        .map(|n| {
            let mut per_class: Vec<DVector<f64>> = (0..c)
                .map(|_| sample_gaussian(&GaussianParams::standard(spec.dim), &mut mean_rng) * spec.spread)
                .collect();
            per_class[(n + 1) % c] = per_class[n % c].clone();
            per_class
        })
        .collect();
    let noise = GaussianParams::standard(spec.dim);
    let mut features = vec![Vec::new(); spec.n_agents];
    let mut labels = Vec::new();
    for class in 0..c {
        for _ in 0..spec.views_per_class {
            for (n, block) in features.iter_mut().enumerate() {
                let x = &means[n][class] + sample_gaussian(&noise, &mut noise_rng) * spec.noise;
                block.extend(x.iter());
            }
            labels.push(class);
        }
    }
    Dataset::new(format!("fixture-{}x{}", c, spec.views_per_class), spec.dim, features, Some(labels), Some(seed))
}

/// Expected shape of a feature file, checked after parsing.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_agents: Option<usize>,
    pub dim: Option<usize>,
    pub n_objects: Option<usize>,
    pub require_labels: bool,
}

/// Serializes a dataset to the CSV feature format (shortest round-trip float
/// formatting, LF line endings).
pub fn to_feature_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    writeln!(out, "# name={}", ds.name).unwrap();
    if let Some(seed) = ds.seed {
        writeln!(out, "# seed={seed}").unwrap();
    }
    out.push_str("agent,object");
    for j in 0..ds.dim {
        write!(out, ",dim_{j}").unwrap();
    }
    if ds.labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for n in 0..ds.n_agents() {
        for d in 0..ds.n_objects {
            write!(out, "{n},{d}").unwrap();
            for v in ds.feature(n, d) {
                write!(out, ",{v:?}").unwrap();
            }
            if let Some(l) = &ds.labels {
                write!(out, ",{}", l[d]).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_feature_file(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_feature_csv(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_feature_file(path: impl AsRef<Path>, layout: &FeatureLayout) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_feature_csv(&text, &fallback, layout)
}

fn malformed(line: u64, message: impl Into<String>) -> Error {
    DataError::Malformed { line, message: message.into() }.into()
}

// (features, label) per agent per object
type Row = (Vec<f64>, Option<usize>);

/// Parses feature-file text; `default_name` is used when no `# name=` line is present.
pub fn parse_feature_csv(text: &str, default_name: &str, layout: &FeatureLayout) -> Result<Dataset> {
    let mut name = default_name.to_string();
    let mut seed = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some(v) = body.strip_prefix("name=") {
            name = v.to_string();
        } else if let Some(v) = body.strip_prefix("seed=") {
            seed = v.trim().parse().ok();
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let header_line = text.lines().position(|l| !l.starts_with('#')).map_or(1, |i| i as u64 + 1);
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "agent" || cols[1] != "object" {
        return Err(malformed(header_line, "header must start with agent,object,dim_0"));
    }
    let has_label = cols.last() == Some(&"label");
    let dim = cols.len() - 2 - usize::from(has_label);
    for (j, c) in cols[2..2 + dim].iter().enumerate() {
        if *c != format!("dim_{j}") {
            return Err(malformed(header_line, format!("expected column dim_{j}, found {c:?}")));
        }
    }
    if dim == 0 {
        return Err(malformed(header_line, "no feature columns"));
    }
    if let Some(want) = layout.dim {
        if want != dim {
            return Err(DataError::Invalid(format!("file has dim {dim}, layout expects {want}")).into());
        }
    }
    if layout.require_labels && !has_label {
        return Err(DataError::Invalid("layout requires a label column".into()).into());
    }

    // agent -> object -> (features, label, line)
    let mut rows: BTreeMap<usize, BTreeMap<usize, Row>> = BTreeMap::new();
    let mut labels: BTreeMap<usize, (usize, u64)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols.len() {
            return Err(malformed(line, format!("expected {} fields, found {}", cols.len(), record.len())));
        }
        let parse_index = |i: usize| -> Result<usize> {
            record[i]
                .parse::<usize>()
                .map_err(|_| malformed(line, format!("{} is not a non-negative integer: {:?}", cols[i], &record[i])))
        };
        let agent = parse_index(0)?;
        let object = parse_index(1)?;
        if let Some(n) = layout.n_agents {
            if agent >= n {
                return Err(DataError::UnknownAgent { line, agent, n_agents: n }.into());
            }
        }
        let mut x = Vec::with_capacity(dim);
        for j in 0..dim {
            let v: f64 = record[2 + j]
                .parse()
                .map_err(|_| malformed(line, format!("dim_{j} is not a number: {:?}", &record[2 + j])))?;
            if !v.is_finite() {
                return Err(DataError::NonFinite { line, column: format!("dim_{j}") }.into());
            }
            x.push(v);
        }
        let label = if has_label { Some(parse_index(2 + dim)?) } else { None };
        if let Some(l) = label {
            match labels.get(&object) {
                Some(&(prev, _)) if prev != l => {
                    return Err(DataError::LabelConflict { line, object, label: l, previous: prev }.into())
                }
                Some(_) => {}
                None => {
                    labels.insert(object, (l, line));
                }
            }
        }
        if rows.entry(agent).or_default().insert(object, (x, label)).is_some() {
            return Err(DataError::Duplicate { line, agent, object }.into());
        }
    }
    if rows.is_empty() {
        return Err(DataError::Empty.into());
    }

    let n_agents = rows.keys().next_back().unwrap() + 1;
    if let Some(n) = layout.n_agents {
        if n_agents != n || rows.len() != n {
            return Err(DataError::Invalid(format!("file has {} agents, layout expects {n}", rows.len())).into());
        }
    }
    if let Some(missing) = (0..n_agents).find(|a| !rows.contains_key(a)) {
        return Err(DataError::Invalid(format!("agent {missing} has no rows")).into());
    }
    let n_objects = rows.values().map(|m| m.len()).max().unwrap();
    if let Some(want) = layout.n_objects {
        if want != n_objects {
            return Err(DataError::InconsistentCount { agent: 0, actual: n_objects, expected: want }.into());
        }
    }
    let mut features = Vec::with_capacity(n_agents);
    for (&agent, objects) in &rows {
        if objects.len() != n_objects {
            return Err(DataError::InconsistentCount { agent, actual: objects.len(), expected: n_objects }.into());
        }
        let mut block = Vec::with_capacity(n_objects * dim);
        for (expected, (&object, (x, _))) in objects.iter().enumerate() {
            if object != expected {
                return Err(DataError::MissingObject { agent, object: expected }.into());
            }
            block.extend_from_slice(x);
        }
        features.push(block);
    }
    let labels = has_label.then(|| (0..n_objects).map(|d| labels[&d].0).collect());
    Dataset::new(name, dim, features, labels, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_shape_and_cluster_means() {
        let n = 400;
        let ds = generate_synthetic(n, 1).unwrap();
        assert_eq!((ds.n_agents(), ds.dim(), ds.n_objects()), (4, 1, 2000));
        let labels = ds.labels().unwrap();
        for agent in 0..4 {
            for cluster in 0..5 {
                let xs: Vec<f64> =
                    (0..ds.n_objects()).filter(|&d| labels[d] == cluster).map(|d| ds.feature(agent, d)[0]).collect();
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                assert!((mean - SYNTHETIC_MEANS[cluster][agent]).abs() < 3.0 / (n as f64).sqrt());
            }
        }
    }

    #[test]
    fn synthetic_variance_is_unit() {
        let ds = generate_synthetic(4000, 2).unwrap();
        let labels = ds.labels().unwrap();
        for agent in 0..4 {
            for cluster in 0..5 {
                let xs: Vec<f64> =
                    (0..ds.n_objects()).filter(|&d| labels[d] == cluster).map(|d| ds.feature(agent, d)[0]).collect();
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
                assert!((var - 1.0).abs() < 0.1, "agent {agent} cluster {cluster}: {var}");
            }
        }
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        assert_eq!(generate_synthetic(10, 3).unwrap(), generate_synthetic(10, 3).unwrap());
        assert_ne!(
            generate_synthetic(10, 3).unwrap().agent_features(0),
            generate_synthetic(10, 4).unwrap().agent_features(0)
        );
        assert!(generate_synthetic(0, 3).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let ds = generate_synthetic(7, 11).unwrap();
        let text = to_feature_csv(&ds);
        let back = parse_feature_csv(&text, "x", &FeatureLayout::default()).unwrap();
        assert_eq!(back, ds);
        let fx = generate_fixture(&FixtureSpec { views_per_class: 3, ..Default::default() }, 5).unwrap();
        assert_eq!(parse_feature_csv(&to_feature_csv(&fx), "x", &FeatureLayout::default()).unwrap(), fx);
    }

    #[test]
    fn fixture_confounds_each_agent() {
        let spec = FixtureSpec::default();
        let ds = generate_fixture(&spec, 9).unwrap();
        assert_eq!(ds.n_objects(), spec.views_per_class * spec.n_classes);
        assert_eq!(ds.dim(), 10);
        let labels = ds.labels().unwrap();
        let class_mean = |agent: usize, class: usize| -> Vec<f64> {
            let idx: Vec<usize> = (0..ds.n_objects()).filter(|&d| labels[d] == class).collect();
            (0..ds.dim())
                .map(|j| idx.iter().map(|&d| ds.feature(agent, d)[j]).sum::<f64>() / idx.len() as f64)
                .collect()
        };
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        for agent in 0..4 {
            let same = dist(&class_mean(agent, agent), &class_mean(agent, agent + 1));
            assert!(same < 2.0 * spec.noise, "agent {agent} confound distance {same}");
            let other = (agent + 2) % spec.n_classes;
            assert!(dist(&class_mean(agent, agent), &class_mean(agent, other)) > spec.spread);
        }
    }

    fn layout() -> FeatureLayout {
        FeatureLayout::default()
    }

    fn err(text: &str, layout: &FeatureLayout) -> Error {
        parse_feature_csv(text, "t", layout).unwrap_err()
    }

    #[test]
    fn loader_accepts_free_row_order_and_missing_labels() {
        let text = "agent,object,dim_0,dim_1\n1,1,4,5\n0,1,2,3\n1,0,0.5,1\n0,0,0,1\n";
        let ds = parse_feature_csv(text, "t", &layout()).unwrap();
        assert_eq!(ds.n_agents(), 2);
        assert_eq!(ds.feature(0, 1), &[2.0, 3.0]);
        assert_eq!(ds.feature(1, 0), &[0.5, 1.0]);
        assert!(ds.labels().is_none());
        assert_eq!(ds.name, "t");
    }

    #[test]
    fn loader_errors_carry_line_numbers() {
        let e = err("agent,object,dim_0\n0,0,1\n0,1,abc\n", &layout());
        assert!(matches!(e, Error::Data(DataError::Malformed { line: 3, .. })), "{e}");
        let e = err("agent,object,dim_0\n0,0,1\n0,1,NaN\n", &layout());
        assert!(matches!(e, Error::Data(DataError::NonFinite { line: 3, .. })), "{e}");
        let e = err("agent,object,dim_0\n0,0,1\n0,0,2\n", &layout());
        assert!(matches!(e, Error::Data(DataError::Duplicate { line: 3, .. })), "{e}");
        let e = err("agent,object,dim_0\n0,0,1\n5,0,2\n", &FeatureLayout { n_agents: Some(2), ..layout() });
        assert!(matches!(e, Error::Data(DataError::UnknownAgent { line: 3, agent: 5, .. })), "{e}");
        let e = err("agent,object,dim_0\n0,0,1,7\n", &layout());
        assert!(matches!(e, Error::Data(DataError::Malformed { .. })), "{e}");
        let e = err("agent,obj,dim_0\n0,0,1\n", &layout());
        assert!(matches!(e, Error::Data(DataError::Malformed { line: 1, .. })), "{e}");
        let e = err("agent,object,dim_0,label\n0,0,1,0\n1,0,1,1\n", &layout());
        assert!(matches!(e, Error::Data(DataError::LabelConflict { line: 3, .. })), "{e}");
        let e = err("agent,object,dim_0\n", &layout());
        assert!(matches!(e, Error::Data(DataError::Empty)), "{e}");
        let e = err("agent,object,dim_0\n0,0,1\n", &FeatureLayout { require_labels: true, ..layout() });
        assert!(e.is_data());
    }

    #[test]
    fn loader_rejects_short_agent() {
        let ds = generate_synthetic(3, 1).unwrap();
        let text = to_feature_csv(&ds);
        // drop agent 2's last row
        let dropped: String = text
            .lines()
            .filter(|l| {
                *l != format!("2,{}", ds.n_objects() - 1) && !l.starts_with(&format!("2,{},", ds.n_objects() - 1))
            })
            .map(|l| format!("{l}\n"))
            .collect();
        let e = err(&dropped, &layout());
        assert!(matches!(e, Error::Data(DataError::InconsistentCount { agent: 2, .. })), "{e}");
    }

    #[test]
    fn loader_rejects_gap_in_objects() {
        let e = err("agent,object,dim_0\n0,0,1\n0,2,1\n1,0,1\n1,1,1\n", &layout());
        assert!(matches!(e, Error::Data(DataError::MissingObject { agent: 0, object: 1 })), "{e}");
    }

    #[test]
    fn ten_dim_fixture_file_loads_with_expected_objects() {
        let spec = FixtureSpec { n_classes: 7, views_per_class: 30, ..Default::default() };
        let ds = generate_fixture(&spec, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        save_feature_file(&ds, &path).unwrap();
        let want = FeatureLayout { n_agents: Some(4), dim: Some(10), n_objects: Some(30 * 7), require_labels: true };
        let back = load_feature_file(&path, &want).unwrap();
        assert_eq!(back.n_objects(), 30 * 7);
        assert_eq!(back.n_classes(), Some(7));
        assert_eq!(back, ds);
    }
}
