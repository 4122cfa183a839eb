//! Compares no adaptation, DANN and DAuto on rotated two-moons.
//!
//! Each method picks (λ, μ) by target-dev accuracy, then reports held-out
//! target accuracy and the proxy 𝒜-distance between source and target
//! representations.
//!
//! ```text
//! cargo run --release --example two_moons -- [rotation_degrees] [seed]
//! ```

use dauto::data::{make_synthetic, SyntheticSpec};
use dauto::eval::proxy_a_distance_from_features;
use dauto::model::{grid_search, Architecture, Mode, TrainConfig};

fn main() -> dauto::Result<()> {
    let mut args = std::env::args().skip(1);
    let degrees: f64 = args.next().map_or(30.0, |a| a.parse().expect("rotation in degrees"));
    let seed: u64 = args.next().map_or(7, |a| a.parse().expect("integer seed"));

    let data = make_synthetic(&SyntheticSpec::two_moons(degrees, 500, seed))?;
    let arch = Architecture::new(2, vec![64, 32, 2], 2);
    let grid = [0.01, 0.1, 1.0, 10.0];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());

    let raw = proxy_a_distance_from_features(&data.source_unlabeled, &data.target_unlabeled, seed)?;
    println!("rotation {degrees}°, seed {seed}, proxy A-distance on inputs {raw:.3}");
    for mode in [Mode::NoAdapt, Mode::Dann, Mode::Dauto] {
        let base = TrainConfig {
            batch_size: 32,
            seed,
            mode,
            ..TrainConfig::default()
        };
        let g = grid_search(&arch, &data, &base, &grid, &grid, jobs)?;
        let pad = proxy_a_distance_from_features(
            &g.model.represent(&data.source_unlabeled)?,
            &g.model.represent(&data.target_unlabeled)?,
            seed,
        )?;
        println!(
            "{mode:>8}: test {:.3}  lambda {:<5} mu {:<5} best epoch {:>3}  proxy {pad:.3}",
            g.test_accuracy, g.best_config.lambda, g.best_config.mu, g.trace.best_epoch
        );
    }
    Ok(())
}
