//! Kernel density estimation over references pushed through `g∘f`.
//!
//! ```text
//! p̂(x) ∝ 1/(n·w) · Σᵢ K((x − g(f(xᵢ))) / w)
//! ```
//!
//! Kernels are left unnormalized (`K(0) = 1`), so `log p̂` here is only defined
//! up to an additive constant. Keeping only the `i = j` term of the sum gives
//! the reconstruction bound checked by [`TransformedKde::bound_check`]:
//!
//! ```text
//! −log p̂(xⱼ) ≤ ‖xⱼ − g(f(xⱼ))‖² / (2w²) + log(n·w)       (Gaussian)
//! −log p̂(xⱼ) ≤ ‖xⱼ − g(f(xⱼ))‖₁ / w    + log(n·w)        (Laplacian)
//! ```

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `K(u) = exp(−‖u‖²/2)`
    Gaussian,
    /// `K(u) = exp(−‖u‖₁)`
    Laplacian,
}

impl Kernel {
    fn log_kernel(self, u: impl Iterator<Item = f64>) -> f64 {
        match self {
            Kernel::Gaussian => -0.5 * u.map(|v| v * v).sum::<f64>(),
            Kernel::Laplacian => -u.map(f64::abs).sum::<f64>(),
        }
    }
}

/// The map `x ↦ g(f(x))` applied to a batch of rows.
pub trait Transform {
    fn transform(&self, x: &Matrix) -> Result<Matrix>;
}

/// `g∘f = I`; the estimator reduces to classical KDE.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Transform for Identity {
    fn transform(&self, x: &Matrix) -> Result<Matrix> {
        Ok(x.clone())
    }
}

/// Linear encoder/decoder pair: `f(x) = E·x`, `g(z) = D·z`.
#[derive(Debug, Clone)]
pub struct LinearPair {
    /// `(D × d)`
    pub encode: Matrix,
    /// `(d × D)`
    pub decode: Matrix,
}

impl Transform for LinearPair {
    fn transform(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul_transposed(&self.encode)?.matmul_transposed(&self.decode)
    }
}

impl<T: Transform + ?Sized> Transform for &T {
    fn transform(&self, x: &Matrix) -> Result<Matrix> {
        (**self).transform(x)
    }
}

/// Outcome of comparing `−log p̂(xⱼ)` with its reconstruction bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub index: usize,
    /// `−log p̂(xⱼ)` in the unnormalized convention.
    pub nll_unnormalized: f64,
    pub bound_value: f64,
    /// `bound_value − nll_unnormalized`.
    pub gap: f64,
    /// Weight on the reconstruction distance: `1/(2w²)` or `1/w`.
    pub lambda: f64,
    /// `log(n·w)`.
    pub c: f64,
}

/// Tolerance for the bound inequality.
pub const BOUND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TransformedKde<T> {
    kernel: Kernel,
    bandwidth: f64,
    references: Matrix,
    transform: T,
    centers: Matrix,
}

impl<T: Transform> TransformedKde<T> {
    pub fn new(kernel: Kernel, bandwidth: f64, references: Matrix, transform: T) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if references.rows() == 0 {
            return Err(Error::InvalidArgument("reference set is empty".into()));
        }
        let centers = transform.transform(&references)?;
        if centers.shape() != references.shape() {
            return Err(Error::shape("kde transform", references.shape(), centers.shape()));
        }
        Ok(Self {
            kernel,
            bandwidth,
            references,
            transform,
            centers,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn references(&self) -> &Matrix {
        &self.references
    }

    pub fn transform(&self) -> &T {
        &self.transform
    }

    /// Kernel centers `g(f(xᵢ))`.
    pub fn centers(&self) -> &Matrix {
        &self.centers
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        let w = self.bandwidth;
        (0..self.centers.rows())
            .map(|i| {
                let c = self.centers.row(i);
                self.kernel.log_kernel(x.iter().zip(c).map(|(a, b)| (a - b) / w))
            })
            .collect()
    }

    /// `log[(1/(n·w)) Σᵢ K((x − g(f(xᵢ)))/w)]`, evaluated via log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.references.cols() {
            return Err(Error::shape("kde_log_density", (1, x.len()), self.references.shape()));
        }
        let n = self.references.rows() as f64;
        Ok(log_sum_exp(&self.log_terms(x)) - (n * self.bandwidth).ln())
    }

    /// Gaussian-kernel bound at reference `j`.
    pub fn bound_check(&self, j: usize) -> Result<BoundReport> {
        if self.kernel != Kernel::Gaussian {
            return Err(Error::InvalidArgument(
                "squared-error bound requires the Gaussian kernel; use bound_check_l1".into(),
            ));
        }
        let w = self.bandwidth;
        self.report(j, 1.0 / (2.0 * w * w), |d| d * d)
    }

    /// Laplacian-kernel (ℓ1) bound at reference `j`.
    pub fn bound_check_l1(&self, j: usize) -> Result<BoundReport> {
        if self.kernel != Kernel::Laplacian {
            return Err(Error::InvalidArgument(
                "ℓ1 bound requires the Laplacian kernel; use bound_check".into(),
            ));
        }
        self.report(j, 1.0 / self.bandwidth, f64::abs)
    }

    fn report(&self, j: usize, lambda: f64, dist: impl Fn(f64) -> f64) -> Result<BoundReport> {
        if j >= self.references.rows() {
            return Err(Error::InvalidArgument(format!(
                "reference index {j} out of range ({} references)",
                self.references.rows()
            )));
        }
        let xj = self.references.row(j);
        let nll = -self.log_density(xj)?;
        let recon: f64 = xj.iter().zip(self.centers.row(j)).map(|(a, b)| dist(a - b)).sum();
        let c = (self.references.rows() as f64 * self.bandwidth).ln();
        let bound_value = lambda * recon + c;
        Ok(BoundReport {
            index: j,
            nll_unnormalized: nll,
            bound_value,
            gap: bound_value - nll,
            lambda,
            c,
        })
    }
}

/// Numerically stable `log Σ exp(vᵢ)`; `−∞` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{gaussian_init, Rng};

    #[test]
    fn single_reference_at_itself() {
        let kde = TransformedKde::new(Kernel::Gaussian, 0.3, Matrix::from_rows(&[[1.0, 2.0]]), Identity).unwrap();
        assert!((kde.log_density(&[1.0, 2.0]).unwrap() - (1.0f64 / 0.3).ln()).abs() < 1e-15);
        let r = kde.bound_check(0).unwrap();
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn two_reference_midpoint() {
        let kde = TransformedKde::new(Kernel::Gaussian, 1.0, Matrix::from_rows(&[[0.0], [2.0]]), Identity).unwrap();
        assert!((kde.log_density(&[1.0]).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_matches_naive_sum() {
        let mut rng = Rng::new(2);
        let refs = gaussian_init(&mut rng, 30, 3, 1.0).unwrap();
        let kde = TransformedKde::new(Kernel::Gaussian, 0.8, refs.clone(), Identity).unwrap();
        let x = [0.1, -0.2, 0.3];
        let naive: f64 = (0..refs.rows())
            .map(|i| {
                let sq: f64 = refs.row(i).iter().zip(&x).map(|(a, b)| ((a - b) / 0.8).powi(2)).sum();
                (-0.5 * sq).exp()
            })
            .sum::<f64>()
            / (30.0 * 0.8);
        assert!((kde.log_density(&x).unwrap() - naive.ln()).abs() < 1e-10);
    }

    #[test]
    fn tiny_bandwidth_does_not_underflow() {
        let refs = Matrix::from_rows(&[[0.0], [1.0]]);
        let kde = TransformedKde::new(Kernel::Gaussian, 1e-3, refs, Identity).unwrap();
        assert!(kde.log_density(&[0.5]).unwrap().is_finite());
    }

    #[test]
    fn rejects_bad_construction_and_wrong_kernel() {
        let refs = Matrix::from_rows(&[[0.0]]);
        assert!(TransformedKde::new(Kernel::Gaussian, 0.0, refs.clone(), Identity).is_err());
        assert!(TransformedKde::new(Kernel::Gaussian, 1.0, Matrix::zeros(0, 1), Identity).is_err());
        let g = TransformedKde::new(Kernel::Gaussian, 1.0, refs.clone(), Identity).unwrap();
        assert!(g.bound_check_l1(0).is_err());
        let l = TransformedKde::new(Kernel::Laplacian, 1.0, refs, Identity).unwrap();
        assert!(l.bound_check(0).is_err());
        assert!(l.bound_check_l1(3).is_err());
    }

    #[test]
    fn l1_bound_zero_reconstruction() {
        let refs = Matrix::from_rows(&[[0.0, 1.0], [3.0, -1.0], [2.0, 2.0]]);
        let kde = TransformedKde::new(Kernel::Laplacian, 0.5, refs, Identity).unwrap();
        for j in 0..3 {
            let r = kde.bound_check_l1(j).unwrap();
            assert_eq!(r.bound_value, (3.0f64 * 0.5).ln());
            assert!(r.gap >= -BOUND_TOLERANCE);
        }
    }

    #[test]
    fn tightening_when_own_term_dominates() {
        // Well-separated references and a near-identity transform: the j-th
        // center is always the closest one to xⱼ.
        let refs = Matrix::from_rows(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0], [3.0, 3.0]]);
        let pair = LinearPair {
            encode: Matrix::from_rows(&[[1.05, 0.0], [0.0, 0.97]]),
            decode: Matrix::identity(2),
        };
        let wide = TransformedKde::new(Kernel::Gaussian, 1.0, refs.clone(), &pair).unwrap();
        let narrow = TransformedKde::new(Kernel::Gaussian, 0.05, refs, &pair).unwrap();
        for j in 0..4 {
            assert!(narrow.bound_check(j).unwrap().gap < wide.bound_check(j).unwrap().gap);
        }
    }

    mod props {
        use super::*;
        use crate::tensor::Rng;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn permutation_invariance(seed in any::<u64>(), n in 2usize..12) {
                let mut rng = Rng::new(seed);
                let refs = gaussian_init(&mut rng, n, 3, 1.0).unwrap();
                let perm = rng.permutation(n);
                let shuffled = refs.select_rows(&perm);
                let x = [0.3, -0.1, 0.7];
                let a = TransformedKde::new(Kernel::Gaussian, 0.6, refs, Identity).unwrap();
                let b = TransformedKde::new(Kernel::Gaussian, 0.6, shuffled, Identity).unwrap();
                prop_assert!((a.log_density(&x).unwrap() - b.log_density(&x).unwrap()).abs() < 1e-12);
            }
        }
    }
}
