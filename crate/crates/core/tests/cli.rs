use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rmhng::data::{generate_fixture, save_feature_file, FixtureSpec};

const SMALL: &str = r#"
[dataset]
kind = "synthetic"
per_cluster = 10
seed = 2

[game]
n_signs = 5
iterations = 5
internal_iterations = 2

[experiment]
methods = ["RMHNG", "LL", "NO_COMMUNICATION"]
trials = 2
window = 2
seed = 1

[method.LL]
chain_length = 2
"#;

fn rmhng(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmhng")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_identical_csvs_for_the_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let outs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = rmhng(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--plots"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            assert!(String::from_utf8_lossy(&o.stdout).starts_with("method,agent,"));
            out
        })
        .collect();
    for file in ["summary.csv", "per_iteration.csv"] {
        let a = fs::read(outs[0].join(file)).unwrap();
        assert_eq!(a, fs::read(outs[1].join(file)).unwrap(), "{file}");
        assert!(!a.contains(&b'\r'));
    }
    let timing = fs::read_to_string(outs[0].join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 1 + 4);
    assert!(outs[0].join("ari.svg").exists() && outs[0].join("kappa.svg").exists());

    let other = dir.path().join("c");
    let o = rmhng(&["run", "--config", &cfg, "--out", other.to_str().unwrap(), "--seed", "99"]);
    assert!(o.status.success());
    assert_ne!(
        fs::read(outs[0].join("per_iteration.csv")).unwrap(),
        fs::read(other.join("per_iteration.csv")).unwrap()
    );
}

#[test]
fn method_flag_keeps_one_method_plus_gibbs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = rmhng(&["run", "--config", &cfg, "--method", "OS", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let methods: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(methods.len(), 2 * 5);
    assert!(methods.iter().all(|m| *m == "OS" || *m == "GIBBS"));
}

#[test]
fn timing_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("t");
    let o = rmhng(&["timing", "--config", &cfg, "--t", "1,2", "--m", "1,2,3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.cfg");
    assert_eq!(rmhng(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(rmhng(&["run", "--config", &cfg, "--method", "TELEPATHY"]).status.code(), Some(2));
    assert_eq!(rmhng(&["timing", "--config", &cfg, "--m", "9"]).status.code(), Some(2));

    let bad = write_config(dir.path(), &SMALL.replace("window = 2", "window = 50"));
    assert_eq!(rmhng(&["run", "--config", &bad]).status.code(), Some(2));
    let typo = write_config(dir.path(), &SMALL.replace("trials = 2", "trails = 2"));
    assert_eq!(rmhng(&["run", "--config", &typo]).status.code(), Some(2));
}

#[test]
fn validate_accepts_good_files_and_rejects_bad_ones_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("features.csv");
    let spec = FixtureSpec { views_per_class: 4, ..Default::default() };
    save_feature_file(&generate_fixture(&spec, 1).unwrap(), &good).unwrap();
    let o = rmhng(&["validate", "--features", good.to_str().unwrap(), "--agents", "4", "--dim", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("24 objects"));

    let wrong_dim = rmhng(&["validate", "--features", good.to_str().unwrap(), "--dim", "3"]);
    assert_eq!(wrong_dim.status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "agent,object,dim_0\n0,0,1.5\n0,1,oops\n").unwrap();
    let o = rmhng(&["validate", "--features", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));

    let missing = dir.path().join("absent.csv");
    assert_eq!(rmhng(&["validate", "--features", missing.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn config_can_point_at_a_feature_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec { views_per_class: 5, n_classes: 3, ..Default::default() };
    save_feature_file(&generate_fixture(&spec, 3).unwrap(), dir.path().join("f.csv")).unwrap();
    let cfg = write_config(
        dir.path(),
        "[dataset]\nkind = \"file\"\npath = \"f.csv\"\n[game]\nn_signs = 3\niterations = 3\n\
         [experiment]\nmethods = [\"OS\"]\ntrials = 1\nwindow = 1\n",
    );
    let out = dir.path().join("o");
    let o = rmhng(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = fs::read_to_string(out.join("per_iteration.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 3 * 4);
}
