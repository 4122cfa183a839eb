//! Saves a trained model and reloads it bit for bit.

use dauto::data::{make_synthetic, SyntheticSpec};
use dauto::model::{fit, load_checkpoint, save_checkpoint, Architecture, TrainConfig};

fn main() -> dauto::Result<()> {
    let data = make_synthetic(&SyntheticSpec::two_moons(20.0, 200, 4))?;
    let cfg = TrainConfig {
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&Architecture::new(2, vec![16, 4], 2), &data, &cfg)?;

    let path = std::env::temp_dir().join("dauto-example.bin");
    save_checkpoint(&model, &path)?;
    let restored = load_checkpoint(&path)?;
    println!(
        "{} parameters written to {}; identical after reload: {}",
        model.num_params(),
        path.display(),
        restored == model
    );
    Ok(())
}
