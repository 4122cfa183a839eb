//! The DAuto network: encoder `f`, mirrored decoder `g`, label predictor `h`
//! and a domain classifier behind a gradient-reversal layer.
//!
//! ```text
//!            ┌─> predictor h ─> softmax ─> L_y        (labeled source)
//! x ─> f ─> z ─> decoder g ───> x̂ ───────> L_r        (unlabeled, both domains)
//!            └─> GRL(μ) ─> domain head ─> softmax ─> L_d
//! ```
//!
//! With `λ = μ = 0` only the predictor path is active and the model is a plain
//! MLP classifier.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use train::{
    fit, grid_search, train, EpochRecord, GridCell, GridResult, Mode, StopReason, TrainConfig, TrainTrace,
};

use crate::error::{Error, Result};
use crate::nn::{
    cross_entropy, dropout_mask, one_hot, recon_loss, relu_backward, relu_forward, softmax_forward, AffineLayer,
    GradReversal, ReconNorm,
};
use crate::optim::Param;
use crate::tensor::{Matrix, Rng};

/// Layer topology shared by every method in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_dim: usize,
    /// Encoder widths; the last one is the representation size.
    pub hidden: Vec<usize>,
    pub num_classes: usize,
    /// Dropout on encoder activations during training, in `[0, 1)`.
    pub dropout: f64,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden,
            num_classes,
            dropout: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "architecture needs a positive input dim and at least one positive hidden layer, got {} / {:?}",
                self.input_dim, self.hidden
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must lie in [0,1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Size of the shared representation `z`.
    pub fn representation_dim(&self) -> usize {
        *self.hidden.last().expect("validated")
    }
}

/// What [`DautoModel::forward`] should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Want {
    /// Class probabilities `h(f(x))`.
    Predict,
    /// Reconstruction `g(f(x))`.
    Reconstruct,
    /// Domain probabilities `h̃(f(x))`.
    Domain,
    /// The representation `f(x)` itself.
    Represent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DautoModel {
    arch: Architecture,
    pub encoder: Vec<AffineLayer>,
    /// Mirror of the encoder; the final layer is linear.
    pub decoder: Vec<AffineLayer>,
    pub predictor: AffineLayer,
    pub domain_head: AffineLayer,
}

/// Loss weights for one evaluation of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
    pub weight_decay: f64,
}

/// Gradient of one affine layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub d_weight: Matrix,
    pub d_bias: Vec<f64>,
}

impl ParamGrad {
    fn zeros_like(layer: &AffineLayer) -> Self {
        Self {
            d_weight: Matrix::zeros(layer.out_dim(), layer.in_dim()),
            d_bias: vec![0.0; layer.out_dim()],
        }
    }
}

/// Gradients for every parameter, laid out like [`DautoModel::params_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct DautoGrads {
    pub encoder: Vec<ParamGrad>,
    pub decoder: Vec<ParamGrad>,
    pub predictor: ParamGrad,
    pub domain_head: ParamGrad,
}

impl DautoGrads {
    fn layers(&self) -> impl Iterator<Item = &ParamGrad> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain(std::iter::once(&self.predictor))
            .chain(std::iter::once(&self.domain_head))
    }

    /// Flat buffers in parameter order (weight then bias, layer by layer).
    pub fn flatten(&self) -> Vec<Vec<f64>> {
        self.layers()
            .flat_map(|g| [g.d_weight.as_slice().to_vec(), g.d_bias.clone()])
            .collect()
    }
}

/// The three loss terms of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub label: f64,
    pub recon: f64,
    pub domain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointLoss {
    /// `L_y + λL_r + μL_d (+ weight decay)`; the sign flip on `L_d` lives in
    /// the gradient reversal, not here.
    pub total: f64,
    pub parts: LossParts,
    pub grads: DautoGrads,
}

/// Labeled rows with class indices.
#[derive(Debug, Clone, Copy)]
pub struct LabeledBatch<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
}

/// Unlabeled rows tagged `0` (source) or `1` (target).
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledBatch<'a> {
    pub x: &'a Matrix,
    pub domains: &'a [usize],
}

struct EncoderTrace {
    pre_activations: Vec<Matrix>,
    masks: Vec<Option<Matrix>>,
}

impl DautoModel {
    /// Fresh model with `N(0, 1/fan_in)` weights and zero biases.
    pub fn new(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        let mut dims = vec![arch.input_dim];
        dims.extend(&arch.hidden);
        let encoder = dims
            .windows(2)
            .map(|w| AffineLayer::init(rng, w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        let decoder = dims
            .windows(2)
            .rev()
            .map(|w| AffineLayer::init(rng, w[1], w[0]))
            .collect::<Result<Vec<_>>>()?;
        let z = arch.representation_dim();
        let predictor = AffineLayer::init(rng, z, arch.num_classes)?;
        let domain_head = AffineLayer::init(rng, z, 2)?;
        Ok(Self {
            arch,
            encoder,
            decoder,
            predictor,
            domain_head,
        })
    }

    /// Assembles a model from explicit layers, checking the topology.
    pub fn from_layers(
        arch: Architecture,
        encoder: Vec<AffineLayer>,
        decoder: Vec<AffineLayer>,
        predictor: AffineLayer,
        domain_head: AffineLayer,
    ) -> Result<Self> {
        arch.validate()?;
        let mut dims = vec![arch.input_dim];
        dims.extend(&arch.hidden);
        let enc_ok = encoder.len() == dims.len() - 1
            && encoder
                .iter()
                .zip(dims.windows(2))
                .all(|(l, w)| l.in_dim() == w[0] && l.out_dim() == w[1]);
        let dec_ok = decoder.len() == dims.len() - 1
            && decoder
                .iter()
                .zip(dims.windows(2).rev())
                .all(|(l, w)| l.in_dim() == w[1] && l.out_dim() == w[0]);
        let z = arch.representation_dim();
        let heads_ok = predictor.in_dim() == z
            && predictor.out_dim() == arch.num_classes
            && domain_head.in_dim() == z
            && domain_head.out_dim() == 2;
        if !(enc_ok && dec_ok && heads_ok) {
            return Err(Error::InvalidArgument(format!(
                "layers do not match architecture {:?}",
                arch
            )));
        }
        Ok(Self {
            arch,
            encoder,
            decoder,
            predictor,
            domain_head,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.arch.input_dim {
            return Err(Error::shape(
                "model forward",
                x.shape(),
                (x.rows(), self.arch.input_dim),
            ));
        }
        Ok(())
    }

    /// `f(x)` without dropout.
    pub fn represent(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.encoder {
            h = relu_forward(&layer.apply(&h)?);
        }
        Ok(h)
    }

    fn decode(&self, z: &Matrix) -> Result<Matrix> {
        let mut h = z.clone();
        let last = self.decoder.len() - 1;
        for (i, layer) in self.decoder.iter().enumerate() {
            h = layer.apply(&h)?;
            if i != last {
                h = relu_forward(&h);
            }
        }
        Ok(h)
    }

    /// Inference-mode forward pass; dropout is never applied here.
    pub fn forward(&self, x: &Matrix, want: Want) -> Result<Matrix> {
        let z = self.represent(x)?;
        match want {
            Want::Represent => Ok(z),
            Want::Predict => Ok(softmax_forward(&self.predictor.apply(&z)?)),
            Want::Reconstruct => self.decode(&z),
            Want::Domain => Ok(softmax_forward(&self.domain_head.apply(&z)?)),
        }
    }

    /// Most likely class per row.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.forward(x, Want::Predict)?.argmax_rows())
    }

    fn encode_train(&mut self, x: &Matrix, mut dropout: Option<&mut Rng>) -> Result<(Matrix, EncoderTrace)> {
        let rate = self.arch.dropout;
        let mut trace = EncoderTrace {
            pre_activations: Vec::with_capacity(self.encoder.len()),
            masks: Vec::with_capacity(self.encoder.len()),
        };
        let mut h = x.clone();
        for layer in &mut self.encoder {
            let a = layer.forward(&h)?;
            h = relu_forward(&a);
            let mask = match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => {
                    let m = dropout_mask(rng, h.rows(), h.cols(), rate);
                    h = h.hadamard(&m)?;
                    Some(m)
                }
                _ => None,
            };
            trace.pre_activations.push(a);
            trace.masks.push(mask);
        }
        Ok((h, trace))
    }

    fn encode_backward(&self, trace: &EncoderTrace, d_z: Matrix) -> Result<Vec<ParamGrad>> {
        let mut grads = Vec::with_capacity(self.encoder.len());
        let mut d = d_z;
        for (i, layer) in self.encoder.iter().enumerate().rev() {
            if let Some(mask) = &trace.masks[i] {
                d = d.hadamard(mask)?;
            }
            d = relu_backward(&trace.pre_activations[i], &d)?;
            let g = layer.backward(&d)?;
            d = g.d_input;
            grads.push(ParamGrad {
                d_weight: g.d_weight,
                d_bias: g.d_bias,
            });
        }
        grads.reverse();
        Ok(grads)
    }

    /// Loss terms and exact gradients of the joint objective on one step.
    ///
    /// The labeled and unlabeled batches share a single encoder pass (rows
    /// stacked labeled-first). The unlabeled batch is only touched when
    /// `λ > 0` or `μ > 0`; the domain head only when `μ > 0`. Encoder
    /// gradients from the domain head arrive through the reversal layer, so
    /// the encoder descends `L_y + λL_r − μL_d` while the domain head descends
    /// `L_d`.
    pub fn joint_loss(
        &mut self,
        labeled: LabeledBatch<'_>,
        unlabeled: Option<UnlabeledBatch<'_>>,
        weights: LossWeights,
        dropout: Option<&mut Rng>,
    ) -> Result<JointLoss> {
        let LossWeights {
            lambda,
            mu,
            weight_decay,
        } = weights;
        if labeled.x.rows() == 0 || labeled.x.rows() != labeled.y.len() {
            return Err(Error::InvalidArgument(format!(
                "labeled batch has {} rows and {} labels",
                labeled.x.rows(),
                labeled.y.len()
            )));
        }
        self.check_input(labeled.x)?;
        let use_unlabeled = lambda > 0.0 || mu > 0.0;
        let unlabeled = if use_unlabeled {
            let u = unlabeled
                .ok_or_else(|| Error::InvalidArgument("λ or μ is positive but no unlabeled batch was given".into()))?;
            self.check_input(u.x)?;
            if u.x.rows() != u.domains.len() || u.x.rows() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "unlabeled batch has {} rows and {} domain tags",
                    u.x.rows(),
                    u.domains.len()
                )));
            }
            if mu > 0.0 && !(u.domains.contains(&0) && u.domains.contains(&1)) {
                return Err(Error::DomainLossUndefined);
            }
            Some(u)
        } else {
            None
        };

        let n_lab = labeled.x.rows();
        let stacked = match unlabeled {
            Some(u) => Matrix::vstack(labeled.x, u.x)?,
            None => labeled.x.clone(),
        };
        let (z_all, trace) = self.encode_train(&stacked, dropout)?;
        let (z_lab, z_unl) = z_all.split_rows(n_lab);

        // Label path.
        let logits = self.predictor.forward(&z_lab)?;
        let ce = cross_entropy(&softmax_forward(&logits), &one_hot(labeled.y, self.arch.num_classes)?)?;
        let pred_g = self.predictor.backward(&ce.d_logits)?;
        let mut d_z_unl = Matrix::zeros(z_unl.rows(), z_unl.cols());
        let mut parts = LossParts {
            label: ce.loss,
            ..LossParts::default()
        };

        // Reconstruction path.
        let mut decoder_grads: Vec<ParamGrad> = self.decoder.iter().map(ParamGrad::zeros_like).collect();
        if let (Some(u), true) = (unlabeled, lambda > 0.0) {
            let last = self.decoder.len() - 1;
            let mut pre = Vec::with_capacity(self.decoder.len());
            let mut h = z_unl.clone();
            for (i, layer) in self.decoder.iter_mut().enumerate() {
                let a = layer.forward(&h)?;
                h = if i == last { a.clone() } else { relu_forward(&a) };
                pre.push(a);
            }
            let (lr_loss, d_xhat) = recon_loss(u.x, &h, ReconNorm::SquaredL2)?;
            parts.recon = lr_loss;
            let mut d = d_xhat.scale(lambda);
            for (i, layer) in self.decoder.iter().enumerate().rev() {
                if i != last {
                    d = relu_backward(&pre[i], &d)?;
                }
                let g = layer.backward(&d)?;
                d = g.d_input;
                decoder_grads[i] = ParamGrad {
                    d_weight: g.d_weight,
                    d_bias: g.d_bias,
                };
            }
            d_z_unl.add_assign(&d)?;
        }

        // Adversarial domain path.
        let mut domain_grad = ParamGrad::zeros_like(&self.domain_head);
        if let (Some(u), true) = (unlabeled, mu > 0.0) {
            let grl = GradReversal::new(mu)?;
            let dom_logits = self.domain_head.forward(&grl.forward(&z_unl))?;
            let dce = cross_entropy(&softmax_forward(&dom_logits), &one_hot(u.domains, 2)?)?;
            parts.domain = dce.loss;
            let g = self.domain_head.backward(&dce.d_logits)?;
            d_z_unl.add_assign(&grl.backward(&g.d_input))?;
            domain_grad = ParamGrad {
                d_weight: g.d_weight,
                d_bias: g.d_bias,
            };
        }

        let d_z = if unlabeled.is_some() {
            Matrix::vstack(&pred_g.d_input, &d_z_unl)?
        } else {
            pred_g.d_input
        };
        let encoder_grads = self.encode_backward(&trace, d_z)?;

        let mut grads = DautoGrads {
            encoder: encoder_grads,
            decoder: decoder_grads,
            predictor: ParamGrad {
                d_weight: pred_g.d_weight,
                d_bias: pred_g.d_bias,
            },
            domain_head: domain_grad,
        };
        let mut total = parts.label + lambda * parts.recon + mu * parts.domain;
        if weight_decay > 0.0 {
            let mut penalty = 0.0;
            let layers = self
                .encoder
                .iter()
                .chain(&self.decoder)
                .chain([&self.predictor, &self.domain_head]);
            let slots = grads
                .encoder
                .iter_mut()
                .chain(grads.decoder.iter_mut())
                .chain([&mut grads.predictor, &mut grads.domain_head]);
            for (layer, slot) in layers.zip(slots) {
                penalty += layer.weight.frobenius_sq();
                slot.d_weight.add_assign(&layer.weight.scale(weight_decay))?;
            }
            total += 0.5 * weight_decay * penalty;
        }
        Ok(JointLoss { total, parts, grads })
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = (String, &mut AffineLayer)> {
        let enc = self
            .encoder
            .iter_mut()
            .enumerate()
            .map(|(i, l)| (format!("encoder.{i}"), l));
        let dec = self
            .decoder
            .iter_mut()
            .enumerate()
            .map(|(i, l)| (format!("decoder.{i}"), l));
        enc.chain(dec)
            .chain(std::iter::once(("predictor".to_string(), &mut self.predictor)))
            .chain(std::iter::once(("domain_head".to_string(), &mut self.domain_head)))
    }

    /// Every parameter tensor, named, in checkpoint order.
    pub fn params_mut(&mut self) -> Vec<Param<'_>> {
        self.layers_mut()
            .flat_map(|(name, layer)| {
                let AffineLayer { weight, bias, .. } = layer;
                [
                    Param::new(format!("{name}.weight"), weight.as_mut_slice()),
                    Param::new(format!("{name}.bias"), bias.as_mut_slice()),
                ]
            })
            .collect()
    }

    /// Read-only flat view matching [`params_mut`](Self::params_mut).
    pub fn param_values(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .chain([&self.predictor, &self.domain_head])
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.param_values().iter().map(|p| p.len()).sum()
    }

    /// Drops every layer's cached activations.
    pub fn clear_caches(&mut self) {
        for (_, l) in self.layers_mut() {
            l.clear_cache();
        }
    }
}
