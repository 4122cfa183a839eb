//! AdaDelta on an ill-conditioned quadratic, with no learning-rate tuning.

use dauto::optim::{AdaDelta, Param};

fn main() -> dauto::Result<()> {
    let scales = [1.0, 10.0];
    let mut x = vec![3.0, -2.0];
    let mut opt = AdaDelta::default();
    for step in 0..=1000 {
        let grad: Vec<f64> = x.iter().zip(scales).map(|(v, s)| 2.0 * s * v).collect();
        if step % 200 == 0 {
            let f: f64 = x.iter().zip(scales).map(|(v, s)| s * v * v).sum();
            println!("step {step:>4}: x = [{:+.5}, {:+.5}]  f = {f:.3e}", x[0], x[1]);
        }
        opt.step(&mut [Param::new("x", &mut x)], &[grad])?;
    }
    Ok(())
}
