//! Mini-batch training with AdaDelta, early stopping on target-dev accuracy,
//! and the (λ, μ) grid search used for model selection.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use super::{Architecture, DautoModel, LabeledBatch, LossParts, LossWeights, UnlabeledBatch};
use crate::data::DomainPairDataset;
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::optim::AdaDelta;
use crate::tensor::{Matrix, Rng};

/// Which terms of the joint objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// `λ = μ = 0`: a plain MLP on labeled source data.
    NoAdapt,
    /// `λ = 0`: adversarial domain confusion only.
    Dann,
    /// `μ = 0`: reconstruction regularizer only.
    AeOnly,
    /// Both terms.
    Dauto,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::NoAdapt, Mode::AeOnly, Mode::Dann, Mode::Dauto];

    pub fn uses_reconstruction(self) -> bool {
        matches!(self, Mode::AeOnly | Mode::Dauto)
    }

    pub fn uses_adversary(self) -> bool {
        matches!(self, Mode::Dann | Mode::Dauto)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::NoAdapt => "no_adapt",
            Mode::Dann => "dann",
            Mode::AeOnly => "ae_only",
            Mode::Dauto => "dauto",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Reconstruction weight λ.
    pub lambda: f64,
    /// Adversarial weight μ.
    pub mu: f64,
    pub lr: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// ℓ2 penalty `½·wd·Σ‖W‖²` on weight matrices.
    pub weight_decay: f64,
    pub mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            mu: 0.0,
            lr: 1.0,
            rho: 0.95,
            epsilon: 1e-6,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            weight_decay: 0.0,
            mode: Mode::NoAdapt,
        }
    }
}

impl TrainConfig {
    /// `self` with `mode`, zeroing whichever of λ/μ the mode disables.
    pub fn with_mode(&self, mode: Mode, lambda: f64, mu: f64) -> Self {
        Self {
            mode,
            lambda: if mode.uses_reconstruction() { lambda } else { 0.0 },
            mu: if mode.uses_adversary() { mu } else { 0.0 },
            ..self.clone()
        }
    }

    /// Every problem with the configuration, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (name, v) in [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                p.push(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !self.mode.uses_reconstruction() && self.lambda != 0.0 {
            p.push(format!("mode {} requires lambda = 0, got {}", self.mode, self.lambda));
        }
        if !self.mode.uses_adversary() && self.mu != 0.0 {
            p.push(format!("mode {} requires mu = 0, got {}", self.mode, self.mu));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            p.push(format!("rho must lie in (0,1), got {}", self.rho));
        }
        if !(self.epsilon > 0.0) {
            p.push(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            p.push(format!("lr must be > 0, got {}", self.lr));
        }
        if self.batch_size == 0 {
            p.push("batch_size must be > 0".into());
        }
        if self.max_epochs == 0 {
            p.push("max_epochs must be > 0".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    fn weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            mu: self.mu,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
}

/// Per-epoch losses (means over the epoch's steps) and dev accuracy.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_label: f64,
    pub loss_recon: f64,
    pub loss_domain: f64,
    pub dev_accuracy: Option<f64>,
    pub wall_seconds: f64,
}

/// Wall time is excluded from equality.
impl PartialEq for EpochRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epoch == other.epoch
            && self.loss_label.to_bits() == other.loss_label.to_bits()
            && self.loss_recon.to_bits() == other.loss_recon.to_bits()
            && self.loss_domain.to_bits() == other.loss_domain.to_bits()
            && self.dev_accuracy.map(f64::to_bits) == other.dev_accuracy.map(f64::to_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the returned parameters.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    /// Description of the weight initialization, for reproducibility.
    pub init: String,
}

impl TrainTrace {
    pub fn best_dev_accuracy(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch).and_then(|e| e.dev_accuracy)
    }

    /// CSV without wall-clock columns, so reruns compare byte for byte.
    pub fn to_csv(&self) -> String {
        use crate::eval::format_sig6;
        let mut out = String::from("epoch,loss_label,loss_recon,loss_domain,dev_accuracy,best\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.epoch,
                format_sig6(e.loss_label),
                format_sig6(e.loss_recon),
                format_sig6(e.loss_domain),
                e.dev_accuracy.map(format_sig6).unwrap_or_default(),
                u8::from(e.epoch == self.best_epoch)
            ));
        }
        out
    }
}

/// Cycles through a pool in freshly shuffled order.
struct PoolSampler {
    rng: Rng,
    order: Vec<usize>,
    pos: usize,
}

impl PoolSampler {
    fn new(rng: Rng, n: usize) -> Self {
        Self {
            rng,
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.pos = 0;
            }
            let room = (k - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + room]);
            self.pos += room;
        }
        out
    }
}

const STREAM_INIT: u64 = 0;
const STREAM_LABELED: u64 = 1;
const STREAM_SOURCE_UNLABELED: u64 = 2;
const STREAM_TARGET_UNLABELED: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

/// Trains `model` and returns the parameters from the best dev epoch.
///
/// Each epoch runs `⌈max(n_labeled, n_target_unlabeled) / batch⌉` steps for
/// every mode, so methods differ only in their objective. Labeled batches,
/// each unlabeled pool and dropout draw from separate seeded streams; a step's
/// unlabeled batch is half source, half target.
pub fn train(model: DautoModel, data: &DomainPairDataset, cfg: &TrainConfig) -> Result<(DautoModel, TrainTrace)> {
    train_with_init(model, data, cfg, String::from("caller-supplied"))
}

fn train_with_init(
    mut model: DautoModel,
    data: &DomainPairDataset,
    cfg: &TrainConfig,
    init: String,
) -> Result<(DautoModel, TrainTrace)> {
    cfg.validate()?;
    data.validate()?;
    if data.dim != model.architecture().input_dim || data.num_classes != model.architecture().num_classes {
        return Err(Error::InvalidArgument(format!(
            "dataset (dim {}, {} classes) does not fit architecture {:?}",
            data.dim,
            data.num_classes,
            model.architecture()
        )));
    }
    let n_lab = data.source_labeled.len();
    if n_lab == 0 {
        return Err(Error::InsufficientData("no labeled source instances".into()));
    }
    let use_unlabeled = cfg.lambda > 0.0 || cfg.mu > 0.0;
    if use_unlabeled && (data.source_unlabeled.rows() == 0 || data.target_unlabeled.rows() == 0) {
        return Err(Error::InsufficientData(
            "λ or μ is positive but an unlabeled pool is empty".into(),
        ));
    }
    if cfg.patience > 0 && data.target_dev.is_empty() {
        return Err(Error::InsufficientData(
            "early stopping needs a nonempty dev split".into(),
        ));
    }

    let root = Rng::new(cfg.seed);
    let mut labeled = PoolSampler::new(root.split(STREAM_LABELED), n_lab);
    let mut src_unl = PoolSampler::new(root.split(STREAM_SOURCE_UNLABELED), data.source_unlabeled.rows());
    let mut tgt_unl = PoolSampler::new(root.split(STREAM_TARGET_UNLABELED), data.target_unlabeled.rows());
    let mut dropout_rng = root.split(STREAM_DROPOUT);
    let mut opt = AdaDelta::new(cfg.rho, cfg.epsilon, cfg.lr)?;

    let batch = cfg.batch_size;
    let steps = n_lab.max(data.target_unlabeled.rows()).div_ceil(batch);
    let half = (batch / 2).max(1);
    let domains: Vec<usize> = (0..batch.max(2)).map(|i| usize::from(i >= half)).collect();
    let weights = cfg.weights();

    let mut trace = TrainTrace {
        epochs: Vec::new(),
        best_epoch: 0,
        stop_reason: StopReason::MaxEpochs,
        init,
    };
    let mut best: Option<(f64, DautoModel)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.max_epochs {
        let start = Instant::now();
        let mut sums = LossParts::default();
        for _ in 0..steps {
            let idx = labeled.take(batch);
            let xl = data.source_labeled.x.select_rows(&idx);
            let yl: Vec<usize> = idx.iter().map(|&i| data.source_labeled.y[i]).collect();
            let xu = if use_unlabeled {
                let s = data.source_unlabeled.select_rows(&src_unl.take(half));
                let t = data.target_unlabeled.select_rows(&tgt_unl.take(domains.len() - half));
                Some(Matrix::vstack(&s, &t)?)
            } else {
                None
            };
            let loss = model.joint_loss(
                LabeledBatch { x: &xl, y: &yl },
                xu.as_ref().map(|x| UnlabeledBatch { x, domains: &domains }),
                weights,
                Some(&mut dropout_rng),
            )?;
            if !loss.total.is_finite() {
                trace.epochs.push(EpochRecord {
                    epoch,
                    loss_label: loss.parts.label,
                    loss_recon: loss.parts.recon,
                    loss_domain: loss.parts.domain,
                    dev_accuracy: None,
                    wall_seconds: start.elapsed().as_secs_f64(),
                });
                return Err(Error::Diverged {
                    epoch,
                    trace: Box::new(trace),
                });
            }
            sums.label += loss.parts.label;
            sums.recon += loss.parts.recon;
            sums.domain += loss.parts.domain;
            opt.step(&mut model.params_mut(), &loss.grads.flatten())?;
        }
        model.clear_caches();

        let dev_accuracy = if data.target_dev.is_empty() {
            None
        } else {
            Some(accuracy(&model.predict(&data.target_dev.x)?, &data.target_dev.y)?)
        };
        let n = steps as f64;
        trace.epochs.push(EpochRecord {
            epoch,
            loss_label: sums.label / n,
            loss_recon: sums.recon / n,
            loss_domain: sums.domain / n,
            dev_accuracy,
            wall_seconds: start.elapsed().as_secs_f64(),
        });

        let score = dev_accuracy.unwrap_or(f64::NEG_INFINITY);
        let improved = best.as_ref().is_none_or(|(b, _)| score > *b);
        if improved && dev_accuracy.is_some() {
            best = Some((score, model.clone()));
            trace.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if dev_accuracy.is_none() {
            trace.best_epoch = epoch;
        }
        if cfg.patience > 0 && since_best >= cfg.patience {
            trace.stop_reason = StopReason::EarlyStopped;
            break;
        }
    }
    let model = match best {
        Some((_, m)) => m,
        None => model,
    };
    Ok((model, trace))
}

/// Initializes a model from `cfg.seed` and trains it.
pub fn fit(arch: &Architecture, data: &DomainPairDataset, cfg: &TrainConfig) -> Result<(DautoModel, TrainTrace)> {
    let mut init_rng = Rng::new(cfg.seed).split(STREAM_INIT);
    let model = DautoModel::new(arch.clone(), &mut init_rng)?;
    let init = format!("gaussian std=1/sqrt(fan_in), zero bias, seed={}", cfg.seed);
    train_with_init(model, data, cfg, init)
}

/// One (λ, μ) cell of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub lambda: f64,
    pub mu: f64,
    pub seed: u64,
    /// Dev accuracy at the cell's best epoch.
    pub dev_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub best: usize,
    pub best_config: TrainConfig,
    pub model: DautoModel,
    pub trace: TrainTrace,
    /// Held-out target test accuracy of the selected cell only.
    pub test_accuracy: f64,
}

/// Trains one model per (λ, μ) cell and selects by target-dev accuracy.
///
/// Grids are masked by `base.mode` (a disabled term collapses to `{0}`).
/// Cell `i` (λ-major order) uses seed `base.seed + i`, so results do not
/// depend on `jobs`. Failing cells are recorded and skipped.
pub fn grid_search(
    arch: &Architecture,
    data: &DomainPairDataset,
    base: &TrainConfig,
    lambda_grid: &[f64],
    mu_grid: &[f64],
    jobs: usize,
) -> Result<GridResult> {
    if lambda_grid.is_empty() || mu_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must be nonempty".into()));
    }
    let lambdas: Vec<f64> = if base.mode.uses_reconstruction() {
        lambda_grid.to_vec()
    } else {
        vec![0.0]
    };
    let mus: Vec<f64> = if base.mode.uses_adversary() {
        mu_grid.to_vec()
    } else {
        vec![0.0]
    };
    let configs: Vec<TrainConfig> = lambdas
        .iter()
        .flat_map(|&l| mus.iter().map(move |&m| (l, m)))
        .enumerate()
        .map(|(i, (l, m))| TrainConfig {
            seed: base.seed.wrapping_add(i as u64),
            ..base.with_mode(base.mode, l, m)
        })
        .collect();

    let run = |cfg: &TrainConfig| fit(arch, data, cfg);
    let results: Vec<Result<(DautoModel, TrainTrace)>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| configs.par_iter().map(run).collect())
    } else {
        configs.iter().map(run).collect()
    };

    let mut cells = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, f64)> = None;
    let mut outcomes = Vec::with_capacity(configs.len());
    for (i, (cfg, res)) in configs.iter().zip(results).enumerate() {
        let (dev, error, outcome) = match res {
            Ok((model, trace)) => (trace.best_dev_accuracy(), None, Some((model, trace))),
            Err(e) => (None, Some(e.to_string()), None),
        };
        if outcome.is_some() {
            let score = dev.unwrap_or(f64::NEG_INFINITY);
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        cells.push(GridCell {
            lambda: cfg.lambda,
            mu: cfg.mu,
            seed: cfg.seed,
            dev_accuracy: dev,
            error,
        });
        outcomes.push(outcome);
    }
    let Some((best, _)) = best else {
        let errors = cells.iter().filter_map(|c| c.error.clone()).collect();
        return Err(Error::Config(errors));
    };
    let (model, trace) = outcomes.swap_remove(best).expect("best cell succeeded");
    let test_accuracy = if data.target_test.is_empty() {
        f64::NAN
    } else {
        accuracy(&model.predict(&data.target_test.x)?, &data.target_test.y)?
    };
    Ok(GridResult {
        best_config: configs[best].clone(),
        cells,
        best,
        model,
        trace,
        test_accuracy,
    })
}
