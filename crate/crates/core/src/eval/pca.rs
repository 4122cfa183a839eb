use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Convergence tolerance on the eigen-residual `‖Cv − λv‖`, relative to the trace.
pub const PCA_TOL: f64 = 1e-10;
pub const PCA_MAX_ITER: usize = 10_000;

/// Two-dimensional principal-component embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// Unit-norm, mutually orthogonal directions (rows). A zero row marks a
    /// missing component of a rank-deficient input.
    pub directions: [Vec<f64>; 2],
    /// Eigenvalues of the sample covariance for each direction.
    pub variances: [f64; 2],
    /// Total variance (trace of the covariance).
    pub total_variance: f64,
    /// `n × 2` projected coordinates.
    pub coords: Matrix,
    /// Fewer than two nonzero eigenvalues were found.
    pub rank_deficient: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn mat_vec(c: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..c.rows()).map(|r| dot(c.row(r), v)).collect()
}

/// Dominant eigenpair of a symmetric PSD matrix by power iteration.
fn power_iteration(c: &Matrix, start: Vec<f64>, scale: f64, orth: Option<&[f64]>) -> (Vec<f64>, f64) {
    let mut v = start;
    let project = |v: &mut Vec<f64>| {
        if let Some(u) = orth {
            let p = dot(v, u);
            v.iter_mut().zip(u).for_each(|(x, ui)| *x -= p * ui);
        }
    };
    project(&mut v);
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..PCA_MAX_ITER {
        let mut w = mat_vec(c, &v);
        project(&mut w);
        lambda = dot(&v, &w);
        let residual: f64 = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if normalize(&mut w) == 0.0 {
            return (v, 0.0);
        }
        v = w;
        if residual <= PCA_TOL * scale {
            break;
        }
    }
    (v, lambda)
}

/// Top-2 principal directions by power iteration with deflation.
pub fn pca2(x: &Matrix) -> Result<PcaProjection> {
    if x.rows() < 3 || x.cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca2 needs at least 3 rows and 2 columns, got {:?}",
            x.shape()
        )));
    }
    let d = x.cols();
    let mean = x.col_mean();
    let mut centered = x.clone();
    for r in 0..centered.rows() {
        centered.row_mut(r).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    let cov = centered
        .transposed_matmul(&centered)?
        .scale(1.0 / (x.rows() - 1) as f64);
    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    let scale = trace.max(f64::MIN_POSITIVE);
    let mut rng = Rng::new(0x5eed_9ca2);
    let start = |rng: &mut Rng| (0..d).map(|_| rng.normal()).collect::<Vec<_>>();

    let (v1, l1) = power_iteration(&cov, start(&mut rng), scale, None);
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated.set(i, j, cov.get(i, j) - l1 * v1[i] * v1[j]);
        }
    }
    let (mut v2, mut l2) = power_iteration(&deflated, start(&mut rng), scale, Some(&v1));

    let nonzero = |l: f64| l > 1e-12 * scale && trace > 0.0;
    let mut dirs = [v1, v2.clone()];
    let rank_deficient = !nonzero(l1) || !nonzero(l2);
    if !nonzero(l1) {
        dirs[0] = vec![0.0; d];
    }
    if rank_deficient {
        v2 = vec![0.0; d];
        l2 = 0.0;
        dirs[1] = v2;
    }
    let coords = {
        let mut m = Matrix::zeros(x.rows(), 2);
        for r in 0..x.rows() {
            m.set(r, 0, dot(centered.row(r), &dirs[0]));
            m.set(r, 1, dot(centered.row(r), &dirs[1]));
        }
        m
    };
    Ok(PcaProjection {
        mean,
        variances: [l1.max(0.0), l2.max(0.0)],
        total_variance: trace,
        directions: dirs,
        coords,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gaussian_init;

    /// Cyclic Jacobi eigensolver for small symmetric matrices.
    fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
        let n = a.rows();
        let mut a = a.clone();
        let mut v = Matrix::identity(n);
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j).powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.get(k, p), a.get(k, q));
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.get(p, k), a.get(q, k));
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v.get(k, p), v.get(k, q));
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        ((0..n).map(|i| a.get(i, i)).collect(), v)
    }

    #[test]
    fn axis_aligned_variance() {
        let x = Matrix::from_rows(&[[-2.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.5, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        let p = pca2(&x).unwrap();
        assert!((p.directions[0][0].abs() - 1.0).abs() < 1e-10);
        assert!(p.rank_deficient);
        assert!(p.coords.as_slice().iter().skip(1).step_by(2).all(|&v| v == 0.0));
    }

    #[test]
    fn isotropic_gaussian_captures_all_variance() {
        let x = gaussian_init(&mut Rng::new(3), 10_000, 2, 1.0).unwrap();
        let p = pca2(&x).unwrap();
        assert!(((p.variances[0] + p.variances[1]) - p.total_variance).abs() < 1e-8 * p.total_variance);
        assert!((p.total_variance - 2.0).abs() < 0.1);
    }

    #[test]
    fn matches_jacobi_oracle() {
        let mut rng = Rng::new(17);
        // Anisotropic 5-D data so the top two eigenvalues are well separated.
        let base = gaussian_init(&mut rng, 400, 5, 1.0).unwrap();
        let scales = [3.0, 2.0, 1.0, 0.5, 0.25];
        let mix = gaussian_init(&mut rng, 5, 5, 1.0).unwrap();
        let mut x = base.clone();
        for r in 0..x.rows() {
            for (v, s) in x.row_mut(r).iter_mut().zip(scales) {
                *v *= s;
            }
        }
        let x = x.matmul(&mix).unwrap();
        let p = pca2(&x).unwrap();

        let mean = x.col_mean();
        let mut c = x.clone();
        for r in 0..c.rows() {
            c.row_mut(r).iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
        }
        let cov = c.transposed_matmul(&c).unwrap().scale(1.0 / 399.0);
        let (vals, vecs) = jacobi_eigen(&cov);
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for k in 0..2 {
            let oracle: Vec<f64> = (0..5).map(|i| vecs.get(i, order[k])).collect();
            let cos = dot(&oracle, &p.directions[k]).abs();
            assert!((1.0 - cos).abs() < 1e-6, "component {k}: |cos| = {cos}");
            assert!((vals[order[k]] - p.variances[k]).abs() < 1e-6 * vals[order[0]]);
        }
        assert!((dot(&p.directions[0], &p.directions[0]) - 1.0).abs() < 1e-10);
        assert!(dot(&p.directions[0], &p.directions[1]).abs() < 1e-10);
    }

    #[test]
    fn rotation_invariance_up_to_sign() {
        let mut rng = Rng::new(23);
        let mut x = gaussian_init(&mut rng, 300, 3, 1.0).unwrap();
        for r in 0..x.rows() {
            x.row_mut(r)[0] *= 4.0;
            x.row_mut(r)[1] *= 2.0;
        }
        let (s, c) = 0.7f64.sin_cos();
        let rot = Matrix::from_rows(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        let a = pca2(&x).unwrap();
        let b = pca2(&x.matmul(&rot).unwrap()).unwrap();
        for k in 0..2 {
            let sign = if a.coords.get(0, k) * b.coords.get(0, k) < 0.0 {
                -1.0
            } else {
                1.0
            };
            for r in 0..x.rows() {
                assert!((a.coords.get(r, k) - sign * b.coords.get(r, k)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_tiny_inputs() {
        assert!(pca2(&Matrix::zeros(2, 3)).is_err());
        assert!(pca2(&Matrix::zeros(5, 1)).is_err());
        let constant = pca2(&Matrix::filled(4, 2, 1.0)).unwrap();
        assert!(constant.rank_deficient);
    }
}
