//! Pairwise paired t-tests between methods scored on the same tasks.

use dauto::eval::{paired_t_test, pvalue_matrix, pvalue_matrix_csv};

fn main() -> dauto::Result<()> {
    let baseline = [0.81, 0.77, 0.73, 0.76, 0.77, 0.83, 0.75, 0.78];
    let adversarial = [0.82, 0.77, 0.73, 0.77, 0.76, 0.83, 0.77, 0.79];
    let regularized = [0.83, 0.78, 0.75, 0.78, 0.78, 0.84, 0.78, 0.80];

    let r = paired_t_test(&regularized, &baseline)?;
    println!(
        "regularized vs baseline: t = {:.3}, df = {}, p = {:.4}\n",
        r.t, r.df, r.p
    );

    let m = pvalue_matrix(&[&baseline, &adversarial, &regularized])?;
    print!(
        "{}",
        pvalue_matrix_csv(&["baseline", "adversarial", "regularized"], &m)?
    );
    Ok(())
}
