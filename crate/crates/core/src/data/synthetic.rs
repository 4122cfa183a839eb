//! Desk-scale two-domain problems with a known source→target transform.

use super::{split_dev_test, DomainPairDataset, LabeledSet};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Center of the two-moons point cloud; rotations pivot here.
pub const MOONS_CENTER: [f64; 2] = [0.5, 0.25];

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Interleaved half circles; the target is rotated by `degrees` about
    /// [`MOONS_CENTER`].
    TwoMoonsRotation { degrees: f64 },
    /// Class 0 centered at `(−1, 0)`, class 1 at `(1, 0)`; the target is
    /// translated by `shift`.
    GaussianBlobsShift { shift: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub generator: Generator,
    /// Labeled source rows, unlabeled target rows and labeled target rows
    /// (split into dev/test) each receive this many samples.
    pub samples_per_domain: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn two_moons(degrees: f64, samples_per_domain: usize, seed: u64) -> Self {
        Self {
            generator: Generator::TwoMoonsRotation { degrees },
            samples_per_domain,
            noise: 0.1,
            seed,
        }
    }
}

impl Generator {
    /// Maps a source-domain point to the target domain.
    pub fn forward(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Generator::TwoMoonsRotation { degrees } => rotate(p, degrees),
            Generator::GaussianBlobsShift { shift } => [p[0] + shift[0], p[1] + shift[1]],
        }
    }

    /// Maps a target-domain point back to the source domain.
    pub fn inverse(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Generator::TwoMoonsRotation { degrees } => rotate(p, -degrees),
            Generator::GaussianBlobsShift { shift } => [p[0] - shift[0], p[1] - shift[1]],
        }
    }

    fn sample_base(&self, rng: &mut Rng, noise: f64) -> ([f64; 2], usize) {
        let label = rng.below(2);
        let p = match self {
            Generator::TwoMoonsRotation { .. } => {
                let t = std::f64::consts::PI * rng.uniform();
                if label == 0 {
                    [t.cos(), t.sin()]
                } else {
                    [1.0 - t.cos(), 0.5 - t.sin()]
                }
            }
            Generator::GaussianBlobsShift { .. } => [if label == 0 { -1.0 } else { 1.0 }, 0.0],
        };
        ([p[0] + noise * rng.normal(), p[1] + noise * rng.normal()], label)
    }

    fn sample(&self, rng: &mut Rng, n: usize, noise: f64, target: bool) -> LabeledSet {
        let mut data = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let (p, label) = self.sample_base(rng, noise);
            let p = if target { self.forward(p) } else { p };
            data.extend_from_slice(&p);
            y.push(label);
        }
        LabeledSet {
            x: Matrix::from_vec(n, 2, data).expect("sized"),
            y,
        }
    }
}

fn rotate(p: [f64; 2], degrees: f64) -> [f64; 2] {
    let (s, c) = degrees.to_radians().sin_cos();
    let (dx, dy) = (p[0] - MOONS_CENTER[0], p[1] - MOONS_CENTER[1]);
    [MOONS_CENTER[0] + c * dx - s * dy, MOONS_CENTER[1] + s * dx + c * dy]
}

/// Generates a source domain and a transformed target domain.
///
/// The labeled source rows double as the unlabeled source pool. Target rows
/// come from two independent draws: one unlabeled training pool and one
/// labeled pool split 50/50 into dev and test.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<DomainPairDataset> {
    if spec.samples_per_domain < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 samples per domain, got {}",
            spec.samples_per_domain
        )));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise std must be >= 0, got {}",
            spec.noise
        )));
    }
    let finite = match spec.generator {
        Generator::TwoMoonsRotation { degrees } => degrees.is_finite(),
        Generator::GaussianBlobsShift { shift } => shift.iter().all(|v| v.is_finite()),
    };
    if !finite {
        return Err(Error::InvalidArgument("non-finite transform parameter".into()));
    }
    let root = Rng::new(spec.seed);
    let n = spec.samples_per_domain;
    let g = &spec.generator;
    let source = g.sample(&mut root.split(0), n, spec.noise, false);
    let target_pool = g.sample(&mut root.split(1), n, spec.noise, true);
    let target_eval = g.sample(&mut root.split(2), n, spec.noise, true);
    let (target_dev, target_test) = split_dev_test(&target_eval, root.split(3).next_u64());
    Ok(DomainPairDataset {
        source_unlabeled: source.x.clone(),
        source_labeled: source,
        target_unlabeled: target_pool.x,
        target_dev,
        target_test,
        dim: 2,
        num_classes: 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_cov(x: &Matrix) -> ([f64; 2], [f64; 3]) {
        let n = x.rows() as f64;
        let m = x.col_mean();
        let mut c = [0.0; 3];
        for r in 0..x.rows() {
            let (a, b) = (x.get(r, 0) - m[0], x.get(r, 1) - m[1]);
            c[0] += a * a;
            c[1] += a * b;
            c[2] += b * b;
        }
        ([m[0], m[1]], c.map(|v| v / (n - 1.0)))
    }

    #[test]
    fn zero_rotation_means_agree() {
        let ds = make_synthetic(&SyntheticSpec::two_moons(0.0, 2000, 5)).unwrap();
        let (ms, cs) = mean_cov(&ds.source_labeled.x);
        let (mt, _) = mean_cov(&ds.target_unlabeled);
        let n = 2000.0f64;
        for k in 0..2 {
            let sd = cs[if k == 0 { 0 } else { 2 }].sqrt();
            assert!((ms[k] - mt[k]).abs() < 4.0 * sd * (2.0 / n).sqrt());
        }
    }

    #[test]
    fn half_turn_swaps_the_moons() {
        // Rotating the outer moon (cos t, sin t) by 180° about (0.5, 0.25)
        // gives (1 − cos t, 0.5 − sin t), exactly the inner moon.
        let ds = make_synthetic(&SyntheticSpec {
            noise: 0.05,
            ..SyntheticSpec::two_moons(180.0, 1000, 1)
        })
        .unwrap();
        // Nearest-moon-curve classifier: perfect on noise-free source.
        let outer = |p: &[f64]| ((p[0].powi(2) + p[1].powi(2)).sqrt() - 1.0).abs();
        let inner = |p: &[f64]| (((p[0] - 1.0).powi(2) + (p[1] - 0.5).powi(2)).sqrt() - 1.0).abs();
        let classify = |p: &[f64]| usize::from(inner(p) < outer(p));
        let acc = |set: &LabeledSet| {
            (0..set.len()).filter(|&r| classify(set.x.row(r)) == set.y[r]).count() as f64 / set.len() as f64
        };
        assert!(acc(&ds.source_labeled) > 0.95);
        assert!(acc(&ds.target_test) <= 0.5);
    }

    #[test]
    fn inverse_transform_recovers_source_distribution() {
        for g in [
            Generator::TwoMoonsRotation { degrees: 30.0 },
            Generator::GaussianBlobsShift { shift: [1.5, -0.5] },
        ] {
            let spec = SyntheticSpec {
                generator: g.clone(),
                samples_per_domain: 4000,
                noise: 0.1,
                seed: 9,
            };
            let ds = make_synthetic(&spec).unwrap();
            let mut back = ds.target_unlabeled.clone();
            for r in 0..back.rows() {
                let p = g.inverse([back.get(r, 0), back.get(r, 1)]);
                back.row_mut(r).copy_from_slice(&p);
            }
            let (ms, cs) = mean_cov(&ds.source_labeled.x);
            let (mb, cb) = mean_cov(&back);
            let n = 4000.0f64;
            assert!((ms[0] - mb[0]).abs() < 4.0 * (cs[0] * 2.0 / n).sqrt());
            assert!((ms[1] - mb[1]).abs() < 4.0 * (cs[2] * 2.0 / n).sqrt());
            for k in 0..3 {
                // Var of a sample (co)variance ≲ 2σ⁴/n for these light-tailed clouds.
                let scale = (cs[0].max(cs[2])) * (2.0 * 2.0 / n).sqrt();
                assert!((cs[k] - cb[k]).abs() < 4.0 * scale, "cov {k}: {} vs {}", cs[k], cb[k]);
            }
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = SyntheticSpec::two_moons(30.0, 50, 3);
        assert_eq!(make_synthetic(&spec).unwrap(), make_synthetic(&spec).unwrap());
        assert!(make_synthetic(&SyntheticSpec::two_moons(30.0, 3, 3)).is_err());
        assert!(make_synthetic(&SyntheticSpec { noise: -1.0, ..spec }).is_err());
        let ds = make_synthetic(&SyntheticSpec::two_moons(30.0, 50, 3)).unwrap();
        ds.validate().unwrap();
        assert_eq!(ds.target_dev.len() + ds.target_test.len(), 50);
    }
}
