//! Round trip through the CSV feature format: generate a 10-dimensional
//! 4-view fixture, save it, validate it, and run the game on the loaded file.
//!
//! cargo run --release --example feature_file [-- <path.csv>]

use rmhng::config::{DatasetSpec, ExperimentConfig};
use rmhng::data::{generate_fixture, load_feature_file, save_feature_file, FeatureLayout, FixtureSpec};
use rmhng::game::Method;
use rmhng::harness::run_experiment;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rmhng_fixture.csv"));

    let fixture = generate_fixture(&FixtureSpec::default(), 7)?;
    save_feature_file(&fixture, &path)?;
    let layout = FeatureLayout { n_agents: Some(4), dim: Some(10), require_labels: true, ..Default::default() };
    let loaded = load_feature_file(&path, &layout)?;
    assert_eq!(loaded, fixture);
    println!(
        "{}: {} agents x {} objects, dim {}, {} classes",
        path.display(),
        loaded.n_agents(),
        loaded.n_objects(),
        loaded.dim(),
        loaded.n_classes().unwrap()
    );

    let mut cfg = ExperimentConfig::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/features.cfg"))?;
    cfg.dataset = DatasetSpec::File { path: path.clone(), n_agents: Some(4), dim: Some(10) };
    cfg.experiment.trials = 2;
    cfg.methods = vec![Method::Os, Method::OsAndLl, Method::NoCommunication];
    let table = run_experiment(&cfg)?;
    for m in table.methods() {
        let r = table.overall(m).unwrap();
        println!(
            "{:<17} ARI {:.3}  kappa {}",
            m.name(),
            r.ari_mean.unwrap(),
            r.kappa_mean.map_or("-".into(), |k| format!("{k:.3}"))
        );
    }
    Ok(())
}
