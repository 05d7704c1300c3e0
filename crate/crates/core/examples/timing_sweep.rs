//! Seconds per iteration over T ∈ {1..4} and M ∈ {1, 2, 3} on the synthetic
//! benchmark, plus the log-log slope against T for each M.
//!
//! cargo run --release --example timing_sweep [-- <config>]

use rmhng::config::ExperimentConfig;
use rmhng::harness::{log_log_slope, run_timing_sweep};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.cfg").to_string());
    let cfg = ExperimentConfig::from_file(&path)?;
    let ts = [1, 2, 3, 4];
    let ms = [1, 2, 3];
    let rows = run_timing_sweep(&cfg, &ts, &ms)?;

    println!("{:>3} {:>3} {:>12} {:>10} {:>10}", "M", "T", "s/iter", "utter", "receive");
    for r in &rows {
        println!(
            "{:>3} {:>3} {:>12.6} {:>10} {:>10}",
            r.m, r.t, r.seconds_per_iteration, r.utterances_per_iteration, r.receives_per_iteration
        );
    }
    for m in ms {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.m == m).map(|r| (r.t as f64, r.seconds_per_iteration)).collect();
        println!("M={m}: slope of log time vs log T = {:.3}  (cost model T^{})", log_log_slope(&pts), m - 1);
    }
    let at = |t, m| rows.iter().find(|r| r.t == t && r.m == m).unwrap().seconds_per_iteration;
    println!("exact (T=4, M=3) / OS (T=1, M=3) time ratio: {:.1}", at(4, 3) / at(1, 3));
    Ok(())
}
