//! Writes a 2-D PCA embedding of source and target representations to TSV.
//!
//! ```text
//! cargo run --release --example pca_embedding -- embed.tsv
//! ```

use dauto::data::{make_synthetic, SyntheticSpec};
use dauto::eval::{pca2, write_embedding_tsv};
use dauto::model::{fit, Architecture, Mode, TrainConfig};
use dauto::tensor::Matrix;

fn main() -> dauto::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "embed.tsv".into());
    let data = make_synthetic(&SyntheticSpec::two_moons(30.0, 300, 2))?;
    let cfg = TrainConfig {
        batch_size: 32,
        max_epochs: 30,
        ..TrainConfig::default()
    }
    .with_mode(Mode::Dauto, 1.0, 1.0);
    let (model, _) = fit(&Architecture::new(2, vec![32, 8], 2), &data, &cfg)?;

    let z = Matrix::vstack(
        &model.represent(&data.source_unlabeled)?,
        &model.represent(&data.target_unlabeled)?,
    )?;
    let pca = pca2(&z)?;
    let tags: Vec<&str> = (0..z.rows())
        .map(|i| {
            if i < data.source_unlabeled.rows() {
                "source"
            } else {
                "target"
            }
        })
        .collect();
    write_embedding_tsv(&out, &pca.coords, &tags)?;
    println!(
        "top-2 components explain {:.1}% of variance; wrote {out}",
        100.0 * (pca.variances[0] + pca.variances[1]) / pca.total_variance
    );
    Ok(())
}
