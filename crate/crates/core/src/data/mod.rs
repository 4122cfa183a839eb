//! Datasets: file loaders, synthetic domain pairs and sampling protocols.

mod idx;
mod sparse;
mod synthetic;

pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use sparse::{load_sparse_text, parse_sparse_text, SparseOptions, SparseText};
pub use synthetic::{make_synthetic, Generator, SyntheticSpec};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Rows paired with class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl LabeledSet {
    pub fn new(x: Matrix, y: Vec<usize>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            x: Matrix::zeros(0, dim),
            y: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// Everything one source→target adaptation run needs.
///
/// Only `source_labeled` carries labels used for training; the target labels
/// in `target_dev`/`target_test` are reserved for model selection and scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPairDataset {
    pub source_labeled: LabeledSet,
    pub source_unlabeled: Matrix,
    pub target_unlabeled: Matrix,
    pub target_dev: LabeledSet,
    pub target_test: LabeledSet,
    pub dim: usize,
    pub num_classes: usize,
}

impl DomainPairDataset {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let shapes = [
            ("source_labeled", self.source_labeled.x.cols()),
            ("source_unlabeled", self.source_unlabeled.cols()),
            ("target_unlabeled", self.target_unlabeled.cols()),
            ("target_dev", self.target_dev.x.cols()),
            ("target_test", self.target_test.x.cols()),
        ];
        for (name, cols) in shapes {
            if cols != self.dim {
                problems.push(format!("{name} has dimension {cols}, expected {}", self.dim));
            }
        }
        for (name, set) in [
            ("source_labeled", &self.source_labeled),
            ("target_dev", &self.target_dev),
            ("target_test", &self.target_test),
        ] {
            if set.x.rows() != set.y.len() {
                problems.push(format!("{name} has {} rows but {} labels", set.x.rows(), set.y.len()));
            }
            if let Some(bad) = set.y.iter().find(|&&y| y >= self.num_classes) {
                problems.push(format!("{name} contains label {bad} >= {}", self.num_classes));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Splits `set` into disjoint dev/test halves by a seeded shuffle.
///
/// Dev receives `⌈n/2⌉` rows; both halves keep the original row order.
pub fn split_dev_test(set: &LabeledSet, seed: u64) -> (LabeledSet, LabeledSet) {
    let mut perm = Rng::new(seed).permutation(set.len());
    let half = set.len().div_ceil(2);
    let (dev, test) = perm.split_at_mut(half);
    dev.sort_unstable();
    test.sort_unstable();
    (set.select(dev), set.select(test))
}

fn class_indices(y: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in y.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    by_class
}

/// Row indices kept by [`subsample_labels`], sorted ascending.
///
/// Each class is shuffled once by a stream derived from `seed` and the first
/// `round(fraction · count)` members are kept, so smaller fractions select
/// subsets of larger ones.
pub fn stratified_indices(y: &[usize], fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "label fraction must lie in (0,1], got {fraction}"
        )));
    }
    let root = Rng::new(seed);
    let mut kept = Vec::new();
    for (class, mut members) in class_indices(y) {
        root.split(class as u64).shuffle(&mut members);
        let take = (fraction * members.len() as f64).round() as usize;
        if take == 0 {
            return Err(Error::InsufficientData(format!(
                "fraction {fraction} leaves class {class} ({} instances) empty",
                members.len()
            )));
        }
        kept.extend_from_slice(&members[..take]);
    }
    kept.sort_unstable();
    Ok(kept)
}

/// Class-stratified subsample of the labeled source set; unlabeled pools and
/// target splits are untouched.
pub fn subsample_labels(ds: &DomainPairDataset, fraction: f64, seed: u64) -> Result<DomainPairDataset> {
    let kept = stratified_indices(&ds.source_labeled.y, fraction, seed)?;
    Ok(DomainPairDataset {
        source_labeled: ds.source_labeled.select(&kept),
        ..ds.clone()
    })
}

/// A "digit `positive` vs. other digits" binary task.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitTask {
    pub positive: usize,
    /// Digits never used as negatives (the positive digit is always excluded).
    pub excluded: Vec<usize>,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Accept fewer than `n_negative` negatives and use all available.
    pub fill_negatives: bool,
}

impl DigitTask {
    /// 500 positives and 500 negatives, as in the training-set protocol.
    pub fn train(positive: usize, excluded: &[usize]) -> Self {
        Self {
            positive,
            excluded: excluded.to_vec(),
            n_positive: 500,
            n_negative: 500,
            fill_negatives: false,
        }
    }

    /// 750 positives with negatives filled up to 750 from what is available.
    pub fn test(positive: usize, excluded: &[usize]) -> Self {
        Self {
            n_positive: 750,
            n_negative: 750,
            fill_negatives: true,
            ..Self::train(positive, excluded)
        }
    }
}

/// Builds a binary task: label 1 for digit `positive`, label 0 for digits
/// outside `excluded ∪ {positive}`. Output rows are in a seeded random order.
pub fn binary_digit_task(x: &Matrix, y: &[usize], task: &DigitTask, seed: u64) -> Result<LabeledSet> {
    let DigitTask {
        positive,
        ref excluded,
        n_positive,
        n_negative,
        fill_negatives,
    } = *task;
    if x.rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&d| d > 9) {
        return Err(Error::InvalidArgument(format!("digit label {bad} outside 0..=9")));
    }
    let root = Rng::new(seed);
    let mut pos: Vec<usize> = (0..y.len()).filter(|&i| y[i] == positive).collect();
    let mut neg: Vec<usize> = (0..y.len())
        .filter(|&i| y[i] != positive && !excluded.contains(&y[i]))
        .collect();
    if pos.len() < n_positive {
        return Err(Error::InsufficientData(format!(
            "requested {n_positive} instances of digit {positive}, only {} available",
            pos.len()
        )));
    }
    if neg.len() < n_negative && !fill_negatives {
        return Err(Error::InsufficientData(format!(
            "requested {n_negative} negatives, only {} available outside {excluded:?}",
            neg.len()
        )));
    }
    root.split(0).shuffle(&mut pos);
    root.split(1).shuffle(&mut neg);
    pos.truncate(n_positive);
    neg.truncate(n_negative);
    let mut rows: Vec<(usize, usize)> = pos
        .into_iter()
        .map(|i| (i, 1))
        .chain(neg.into_iter().map(|i| (i, 0)))
        .collect();
    root.split(2).shuffle(&mut rows);
    let idx: Vec<usize> = rows.iter().map(|r| r.0).collect();
    LabeledSet::new(x.select_rows(&idx), rows.iter().map(|r| r.1).collect())
}
