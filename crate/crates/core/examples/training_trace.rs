//! Trains one DAuto model with fixed weights and prints its per-epoch trace
//! as CSV.
//!
//! ```text
//! cargo run --release --example training_trace -- [lambda] [mu]
//! ```

use dauto::data::{make_synthetic, SyntheticSpec};
use dauto::model::{fit, Architecture, Mode, TrainConfig};

fn main() -> dauto::Result<()> {
    let mut args = std::env::args().skip(1);
    let lambda: f64 = args.next().map_or(1.0, |a| a.parse().expect("lambda"));
    let mu: f64 = args.next().map_or(1.0, |a| a.parse().expect("mu"));

    let data = make_synthetic(&SyntheticSpec::two_moons(30.0, 500, 1))?;
    let cfg = TrainConfig {
        batch_size: 32,
        max_epochs: 40,
        ..TrainConfig::default()
    }
    .with_mode(Mode::Dauto, lambda, mu);
    let (_, trace) = fit(&Architecture::new(2, vec![64, 32, 2], 2), &data, &cfg)?;
    print!("{}", trace.to_csv());
    eprintln!(
        "stopped: {:?}, best epoch {} with dev accuracy {:.3}",
        trace.stop_reason,
        trace.best_epoch,
        trace.best_dev_accuracy().unwrap_or(f64::NAN)
    );
    Ok(())
}
