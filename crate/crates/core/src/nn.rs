//! Layers with hand-written forward and backward passes.
//!
//! Every backward here returns the exact analytic gradient of a batch-mean
//! loss; callers pass upstream gradients that already include the `1/batch`
//! factor (the loss functions below produce them that way).

use crate::error::{Error, Result};
use crate::tensor::{gaussian_init, Matrix, Rng};

/// Clamp applied to the true-class probability inside [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Fully connected layer `y = x · Wᵀ + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    cache: Option<Matrix>,
}

/// Gradients produced by [`AffineLayer::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub d_weight: Matrix,
    pub d_bias: Vec<f64>,
    pub d_input: Matrix,
}

impl AffineLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape("AffineLayer::new", weight.shape(), (1, bias.len())));
        }
        Ok(Self {
            weight,
            bias,
            cache: None,
        })
    }

    /// Gaussian weights with std `1/√fan_in`, zero bias.
    pub fn init(rng: &mut Rng, in_dim: usize, out_dim: usize) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer dims must be positive, got {in_dim} -> {out_dim}"
            )));
        }
        let std = 1.0 / (in_dim as f64).sqrt();
        Self::new(gaussian_init(rng, out_dim, in_dim, std)?, vec![0.0; out_dim])
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            cache: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Forward pass that does not touch the backward cache.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::shape("affine_forward", x.shape(), self.weight.shape()));
        }
        x.matmul_transposed(&self.weight)?.add_row_broadcast(&self.bias)
    }

    /// Forward pass; caches `x` for the next [`backward`](Self::backward).
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let y = self.apply(x)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&self, d_out: &Matrix) -> Result<LayerGrads> {
        let x = self.cache.as_ref().ok_or(Error::BackwardBeforeForward("AffineLayer"))?;
        if d_out.rows() != x.rows() || d_out.cols() != self.out_dim() {
            return Err(Error::shape(
                "affine_backward",
                d_out.shape(),
                (x.rows(), self.out_dim()),
            ));
        }
        Ok(LayerGrads {
            d_weight: d_out.transposed_matmul(x)?,
            d_bias: d_out.col_sum().into_vec(),
            d_input: d_out.matmul(&self.weight)?,
        })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

pub fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Masks `d_out` where the forward input was `≤ 0`.
pub fn relu_backward(x: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    if x.shape() != d_out.shape() {
        return Err(Error::shape("relu_backward", x.shape(), d_out.shape()));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(d_out.as_slice())
        .map(|(&xi, &g)| if xi > 0.0 { g } else { 0.0 })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

pub fn sigmoid_forward(x: &Matrix) -> Matrix {
    x.map(|v| {
        if v >= 0.0 {
            1.0 / (1.0 + (-v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        }
    })
}

/// Takes the sigmoid *output* `y` and returns `d_out · y(1−y)`.
pub fn sigmoid_backward(y: &Matrix, d_out: &Matrix) -> Result<Matrix> {
    if y.shape() != d_out.shape() {
        return Err(Error::shape("sigmoid_backward", y.shape(), d_out.shape()));
    }
    let data = y
        .as_slice()
        .iter()
        .zip(d_out.as_slice())
        .map(|(&s, &g)| g * s * (1.0 - s))
        .collect();
    Matrix::from_vec(y.rows(), y.cols(), data)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_forward(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// One-hot encoding of class indices.
pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), num_classes);
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {num_classes} classes"
            )));
        }
        m.set(i, y, 1.0);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    /// Batch mean of `−log p(true class)`.
    pub loss: f64,
    /// Gradient w.r.t. the softmax *logits*: `(probs − labels)/batch`.
    pub d_logits: Matrix,
    /// Set when some true-class probability fell below [`PROB_FLOOR`].
    pub clamped: bool,
}

pub fn cross_entropy(probs: &Matrix, labels: &Matrix) -> Result<CrossEntropy> {
    if probs.shape() != labels.shape() {
        return Err(Error::shape("cross_entropy", probs.shape(), labels.shape()));
    }
    let batch = probs.rows();
    if batch == 0 {
        return Err(Error::InvalidArgument("cross_entropy on an empty batch".into()));
    }
    let mut loss = 0.0;
    let mut clamped = false;
    for r in 0..batch {
        for (p, t) in probs.row(r).iter().zip(labels.row(r)) {
            if *t != 0.0 {
                if *p < PROB_FLOOR {
                    clamped = true;
                }
                loss -= t * p.max(PROB_FLOOR).ln();
            }
        }
    }
    let inv = 1.0 / batch as f64;
    let d_logits = probs.sub(labels)?.scale(inv);
    Ok(CrossEntropy {
        loss: loss * inv,
        d_logits,
        clamped,
    })
}

/// Distance used by the reconstruction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconNorm {
    /// `‖x − x̂‖²`, matching a Gaussian kernel.
    SquaredL2,
    /// `‖x − x̂‖₁`, matching a Laplacian kernel.
    L1,
}

/// Batch-mean reconstruction distance and its gradient w.r.t. `x_hat`.
///
/// The ℓ1 subgradient is 0 where `x_hat == x`.
pub fn recon_loss(x: &Matrix, x_hat: &Matrix, norm: ReconNorm) -> Result<(f64, Matrix)> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape("recon_loss", x.shape(), x_hat.shape()));
    }
    let batch = x.rows().max(1) as f64;
    let diff = x_hat.sub(x)?;
    let (loss, grad) = match norm {
        ReconNorm::SquaredL2 => (diff.frobenius_sq(), diff.scale(2.0 / batch)),
        ReconNorm::L1 => (
            diff.as_slice().iter().map(|d| d.abs()).sum(),
            diff.map(|d| {
                if d > 0.0 {
                    1.0 / batch
                } else if d < 0.0 {
                    -1.0 / batch
                } else {
                    0.0
                }
            }),
        ),
    };
    Ok((loss / batch, grad))
}

/// Identity on the way forward, `−μ·g` on the way back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradReversal {
    pub mu: f64,
}

impl GradReversal {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be finite and >= 0, got {mu}")));
        }
        Ok(Self { mu })
    }

    pub fn forward(&self, z: &Matrix) -> Matrix {
        z.clone()
    }

    pub fn backward(&self, d_out: &Matrix) -> Matrix {
        d_out.scale(-self.mu)
    }
}

/// Inverted-dropout mask: kept units are scaled by `1/(1−rate)`.
pub fn dropout_mask(rng: &mut Rng, rows: usize, cols: usize, rate: f64) -> Matrix {
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rng: &mut Rng, r: usize, c: usize) -> Matrix {
        gaussian_init(rng, r, c, 1.0).unwrap()
    }

    /// Central differences of a scalar function of a matrix.
    fn numeric_grad(x: &Matrix, f: impl Fn(&Matrix) -> f64) -> Matrix {
        let h = 1e-5;
        let mut g = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.as_slice().len() {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[i] -= h;
            g.as_mut_slice()[i] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        let diff = a.sub(b).unwrap().frobenius_sq().sqrt();
        diff / a.frobenius_sq().sqrt().max(b.frobenius_sq().sqrt()).max(1e-12)
    }

    #[test]
    fn affine_identity_forward() {
        let mut layer = AffineLayer::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 2.0]]);
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn affine_backward_requires_forward() {
        let layer = AffineLayer::zeros(2, 3);
        assert!(matches!(
            layer.backward(&Matrix::zeros(1, 3)),
            Err(Error::BackwardBeforeForward(_))
        ));
    }

    #[test]
    fn affine_gradients_match_finite_differences() {
        let mut rng = Rng::new(11);
        let mut layer = AffineLayer::init(&mut rng, 4, 3).unwrap();
        let x = random(&mut rng, 5, 4);
        let probe = random(&mut rng, 5, 3);
        // Scalar loss: Σ probe ⊙ y, so dL/dy = probe.
        layer.forward(&x).unwrap();
        let grads = layer.backward(&probe).unwrap();
        let loss_x = |xx: &Matrix| {
            layer
                .apply(xx)
                .unwrap()
                .hadamard(&probe)
                .unwrap()
                .as_slice()
                .iter()
                .sum::<f64>()
        };
        assert!(rel_err(&grads.d_input, &numeric_grad(&x, loss_x)) < 1e-6);
        let w0 = layer.weight.clone();
        let loss_w = |w: &Matrix| {
            let l = AffineLayer::new(w.clone(), layer.bias.clone()).unwrap();
            l.apply(&x)
                .unwrap()
                .hadamard(&probe)
                .unwrap()
                .as_slice()
                .iter()
                .sum::<f64>()
        };
        assert!(rel_err(&grads.d_weight, &numeric_grad(&w0, loss_w)) < 1e-6);
        assert_eq!(grads.d_bias, probe.col_sum().into_vec());
    }

    #[test]
    fn relu_cases() {
        let x = Matrix::from_rows(&[[-1.0, 0.0, 2.0]]);
        assert_eq!(relu_forward(&x).as_slice(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&Matrix::from_rows(&[[-1.0, 2.0]]), &Matrix::from_rows(&[[5.0, 7.0]])).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 7.0]);
    }

    #[test]
    fn relu_finite_differences_away_from_kink() {
        let mut rng = Rng::new(5);
        let x = random(&mut rng, 4, 4).map(|v| if v.abs() < 1e-3 { 0.5 } else { v });
        let probe = random(&mut rng, 4, 4);
        let analytic = relu_backward(&x, &probe).unwrap();
        let numeric = numeric_grad(&x, |xx| {
            relu_forward(xx).hadamard(&probe).unwrap().as_slice().iter().sum()
        });
        assert!(rel_err(&analytic, &numeric) < 1e-6);
    }

    #[test]
    fn sigmoid_finite_differences() {
        let mut rng = Rng::new(6);
        let x = random(&mut rng, 3, 4);
        let probe = random(&mut rng, 3, 4);
        let y = sigmoid_forward(&x);
        let analytic = sigmoid_backward(&y, &probe).unwrap();
        let numeric = numeric_grad(&x, |xx| {
            sigmoid_forward(xx).hadamard(&probe).unwrap().as_slice().iter().sum()
        });
        assert!(rel_err(&analytic, &numeric) < 1e-6);
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(
            softmax_forward(&Matrix::from_rows(&[[0.0, 0.0]])).as_slice(),
            &[0.5, 0.5]
        );
        assert_eq!(
            softmax_forward(&Matrix::from_rows(&[[1000.0, 1000.0]])).as_slice(),
            &[0.5, 0.5]
        );
        let mut rng = Rng::new(8);
        let p = softmax_forward(&random(&mut rng, 10, 5).scale(10.0));
        for r in 0..p.rows() {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_cases() {
        let probs = Matrix::from_rows(&[[0.5, 0.5]]);
        let labels = one_hot(&[1], 2).unwrap();
        let ce = cross_entropy(&probs, &labels).unwrap();
        assert!((ce.loss - std::f64::consts::LN_2).abs() < 1e-15);
        let exact = cross_entropy(&labels, &labels).unwrap();
        assert_eq!(exact.loss, 0.0);
        assert!(!exact.clamped);
        let zero = cross_entropy(&one_hot(&[0], 2).unwrap(), &labels).unwrap();
        assert!(zero.clamped);
        assert!((zero.loss + PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_logit_gradient_through_softmax() {
        let mut rng = Rng::new(9);
        let logits = random(&mut rng, 6, 4);
        let labels = one_hot(&[0, 3, 1, 2, 2, 0], 4).unwrap();
        let ce = cross_entropy(&softmax_forward(&logits), &labels).unwrap();
        let numeric = numeric_grad(&logits, |l| cross_entropy(&softmax_forward(l), &labels).unwrap().loss);
        assert!(rel_err(&ce.d_logits, &numeric) < 1e-6);
    }

    #[test]
    fn recon_loss_cases() {
        let x = Matrix::from_rows(&[[0.0, 0.0]]);
        let xh = Matrix::from_rows(&[[3.0, 4.0]]);
        assert_eq!(recon_loss(&x, &x, ReconNorm::SquaredL2).unwrap().0, 0.0);
        assert_eq!(recon_loss(&x, &xh, ReconNorm::SquaredL2).unwrap().0, 25.0);
        let (l1, g1) = recon_loss(&x, &xh, ReconNorm::L1).unwrap();
        assert_eq!(l1, 7.0);
        assert_eq!(g1.as_slice(), &[1.0, 1.0]);
        let (_, tie) = recon_loss(&x, &x, ReconNorm::L1).unwrap();
        assert!(tie.as_slice().iter().all(|&v| v == 0.0));
        assert!(recon_loss(&x, &Matrix::zeros(1, 3), ReconNorm::L1).is_err());
    }

    #[test]
    fn recon_loss_gradient_finite_differences() {
        let mut rng = Rng::new(10);
        let x = random(&mut rng, 4, 3);
        let xh = random(&mut rng, 4, 3);
        let (_, g) = recon_loss(&x, &xh, ReconNorm::SquaredL2).unwrap();
        let numeric = numeric_grad(&xh, |h| recon_loss(&x, h, ReconNorm::SquaredL2).unwrap().0);
        assert!(rel_err(&g, &numeric) < 1e-6);
        let (_, g1) = recon_loss(&x, &xh, ReconNorm::L1).unwrap();
        let numeric1 = numeric_grad(&xh, |h| recon_loss(&x, h, ReconNorm::L1).unwrap().0);
        assert!(rel_err(&g1, &numeric1) < 1e-6);
    }

    #[test]
    fn grl_definition() {
        let d = Matrix::from_rows(&[[2.0, -3.0]]);
        let off = GradReversal::new(0.0).unwrap().backward(&d);
        assert!(off.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(GradReversal::new(1.0).unwrap().backward(&d).as_slice(), &[-2.0, 3.0]);
        let z = Matrix::from_rows(&[[1.5, -0.25]]);
        assert_eq!(GradReversal::new(3.0).unwrap().forward(&z), z);
        assert!(GradReversal::new(-1.0).is_err());
    }

    /// Bilinear toy: representation `z = a·x`, domain logit `s = b·z`.
    /// `L_d(a, b)` is the logistic loss of separating `x = +1` (domain 1)
    /// from `x = −1` (domain 0), i.e. `softplus(−a·b)` per instance.
    /// `∂L/∂b = −a·σ(−ab)` and `∂L/∂a = −b·σ(−ab)`, so with `a, b > 0` both
    /// true gradients are negative: stepping `b` down its gradient lowers
    /// `L_d`, while the reversed gradient pushes `a` the other way and raises it.
    #[test]
    fn grl_flips_the_encoder_update_on_bilinear_toy() {
        let loss = |a: f64, b: f64| (1.0 + (-a * b).exp()).ln();
        let (a, b) = (0.8f64, 0.6f64);
        let sig = 1.0 / (1.0 + (a * b).exp());
        let d_head = -a * sig;
        let d_z = -b * sig;
        let grl = GradReversal::new(1.0).unwrap();
        let d_enc = grl.backward(&Matrix::from_rows(&[[d_z]])).get(0, 0);
        let lr = 0.1;
        assert!(loss(a, b - lr * d_head) < loss(a, b));
        assert!(loss(a - lr * d_enc, b) > loss(a, b));
    }

    mod props {
        use super::*;
        use crate::tensor::Rng;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn softmax_shift_invariant(seed in any::<u64>(), c in -50.0f64..50.0) {
                let mut rng = Rng::new(seed);
                let x = random(&mut rng, 3, 5);
                let a = softmax_forward(&x);
                let b = softmax_forward(&x.map(|v| v + c));
                for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!((p - q).abs() < 1e-12);
                }
            }

            #[test]
            fn grl_backward_is_exact_negation(seed in any::<u64>(), mu in 0.0f64..5.0) {
                let mut rng = Rng::new(seed);
                let d = random(&mut rng, 3, 4);
                let g = GradReversal::new(mu).unwrap().backward(&d);
                for (x, y) in g.as_slice().iter().zip(d.as_slice()) {
                    prop_assert_eq!(*x, -mu * y);
                }
            }
        }
    }
}
