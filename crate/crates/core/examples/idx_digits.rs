//! Builds a "digit vs. others" binary task from IDX files.
//!
//! With a directory holding the MNIST training files, uses those; otherwise
//! writes and reads back a small synthetic IDX pair first.
//!
//! ```text
//! cargo run --release --example idx_digits -- [mnist_dir] [digit]
//! ```

use std::path::PathBuf;

use dauto::data::{binary_digit_task, load_idx, write_idx_images, write_idx_labels, DigitTask};
use dauto::tensor::{Matrix, Rng};

fn main() -> dauto::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().map(PathBuf::from);
    let digit: usize = args.next().map_or(3, |a| a.parse().expect("digit 0-9"));
    let (images, labels) = match dir {
        Some(d) => (d.join("train-images-idx3-ubyte"), d.join("train-labels-idx1-ubyte")),
        None => {
            let d = std::env::temp_dir().join("dauto-idx-example");
            std::fs::create_dir_all(&d).map_err(|e| dauto::Error::io(&d, e))?;
            let mut rng = Rng::new(0);
            let y: Vec<usize> = (0..6000).map(|i| i % 10).collect();
            let px: Vec<f64> = (0..y.len() * 64).map(|_| rng.uniform()).collect();
            write_idx_images(d.join("images"), &Matrix::from_vec(y.len(), 64, px)?, 8, 8)?;
            write_idx_labels(d.join("labels"), &y)?;
            (d.join("images"), d.join("labels"))
        }
    };
    let (x, y) = load_idx(&images, &labels)?;
    println!("loaded {} images of {} pixels", x.rows(), x.cols());

    let task = binary_digit_task(&x, &y, &DigitTask::train(digit, &[]), 1)?;
    let positives = task.y.iter().filter(|&&l| l == 1).count();
    println!("digit {digit} vs rest: {} rows, {positives} positives", task.len());
    Ok(())
}
