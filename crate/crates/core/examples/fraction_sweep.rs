//! Runs every method on nested label fractions through the experiment
//! harness and prints the resulting `sweep.csv`.
//!
//! ```text
//! cargo run --release --example fraction_sweep -- [outdir]
//! ```

use dauto::experiment::{run_fraction_sweep, ExperimentConfig};

fn main() -> dauto::Result<()> {
    let outdir = std::env::args().nth(1).unwrap_or_else(|| "runs".into());
    let set = |k: &str, v: &str| (k.to_string(), v.to_string());
    let cfg = ExperimentConfig::load(
        None,
        &[
            set("task", "moons_sweep"),
            set("hidden", "32,8"),
            set("batch_size", "32"),
            set("max_epochs", "30"),
            set("lambda_grid", "0.1,1"),
            set("mu_grid", "0.1,1"),
            set("outdir", &outdir),
        ],
    )?;
    let report = run_fraction_sweep(&cfg)?;
    let sweep = cfg.task_dir().join("sweep.csv");
    print!(
        "{}",
        std::fs::read_to_string(&sweep).map_err(|e| dauto::Error::io(&sweep, e))?
    );
    eprintln!("{} files under {}", report.files.len(), cfg.task_dir().display());
    Ok(())
}
