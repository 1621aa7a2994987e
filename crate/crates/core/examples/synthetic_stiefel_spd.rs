//! Metric-learning alignment over `St(d, r) × SPD(d)` driven from a config
//! file, with traces written to `out/synthetic`.

use std::path::Path;

use rhgd::experiment::config::ExperimentConfig;
use rhgd::experiment::run::run_experiment;

fn main() -> rhgd::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/synthetic.toml");
    let cfg = ExperimentConfig::load(&path)?;
    let result = run_experiment(&cfg, Path::new("out/synthetic"))?;
    for (file, trace) in &result.traces {
        let obj = trace.objectives();
        println!(
            "{}: F {:.6} -> {:.6} over {} iterations",
            file.display(),
            obj[0],
            obj[obj.len() - 1],
            trace.len()
        );
    }
    Ok(())
}
