//! The reconstruction error of `g∘f` bounds the negative log-likelihood of a
//! kernel density estimate built on reconstructed references.

use dauto::kde::{Kernel, LinearPair, TransformedKde};
use dauto::tensor::{gaussian_init, Rng};

fn main() -> dauto::Result<()> {
    let mut rng = Rng::new(3);
    let refs = gaussian_init(&mut rng, 20, 5, 1.0)?;
    let pair = LinearPair {
        encode: gaussian_init(&mut rng, 2, 5, 0.5)?,
        decode: gaussian_init(&mut rng, 5, 2, 0.7)?,
    };
    println!("{:>6} {:>10} {:>10} {:>10}", "w", "-log p(x0)", "bound", "gap");
    for w in [2.0, 1.0, 0.5, 0.1, 0.01] {
        let kde = TransformedKde::new(Kernel::Gaussian, w, refs.clone(), &pair)?;
        let r = kde.bound_check(0)?;
        println!(
            "{w:>6} {:>10.4} {:>10.4} {:>10.2e}",
            r.nll_unnormalized, r.bound_value, r.gap
        );
    }
    let lap = TransformedKde::new(Kernel::Laplacian, 0.5, refs, &pair)?;
    let r = lap.bound_check_l1(0)?;
    println!(
        "laplacian w=0.5: -log p {:.4} <= {:.4}",
        r.nll_unnormalized, r.bound_value
    );
    Ok(())
}
