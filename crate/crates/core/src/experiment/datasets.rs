use std::path::Path;

use super::config::{DatasetSource, ExperimentConfig, IDX_FILES};
use crate::data::{
    binary_digit_task, load_idx, load_sparse_text, make_synthetic, split_dev_test, DigitTask, DomainPairDataset,
    LabeledSet, SparseOptions,
};
use crate::error::{Error, Result};
use crate::tensor::Rng;

/// Domain data loaded once and reused across source→target pairs.
#[derive(Debug, Clone)]
pub enum DomainPools {
    Synthetic,
    Digits {
        train: LabeledSet,
        test: LabeledSet,
        digits: Vec<usize>,
    },
    /// `(name, train, test)` per domain, labels already mapped to `0..num_classes`.
    Domains {
        domains: Vec<(String, LabeledSet, LabeledSet)>,
        num_classes: usize,
    },
}

fn load_idx_pair(dir: &Path, images: &str, labels: &str) -> Result<LabeledSet> {
    let (x, y) = load_idx(dir.join(images), dir.join(labels))?;
    LabeledSet::new(x, y)
}

impl DomainPools {
    pub fn load(source: &DatasetSource) -> Result<Self> {
        let [tr_img, tr_lab, te_img, te_lab] = IDX_FILES;
        match source {
            DatasetSource::Synthetic { .. } => Ok(Self::Synthetic),
            DatasetSource::IdxDigits { dir, digits } => Ok(Self::Digits {
                train: load_idx_pair(dir, tr_img, tr_lab)?,
                test: load_idx_pair(dir, te_img, te_lab)?,
                digits: digits.clone(),
            }),
            DatasetSource::IdxDomains { dir, domains } => {
                let mut out = Vec::with_capacity(domains.len());
                for name in domains {
                    let d = dir.join(name);
                    out.push((
                        name.clone(),
                        load_idx_pair(&d, tr_img, tr_lab)?,
                        load_idx_pair(&d, te_img, te_lab)?,
                    ));
                }
                let num_classes = out
                    .iter()
                    .flat_map(|(_, a, b)| a.y.iter().chain(&b.y))
                    .max()
                    .map_or(0, |m| m + 1);
                Ok(Self::Domains {
                    domains: out,
                    num_classes,
                })
            }
            DatasetSource::Sparse {
                dir,
                dim,
                tf_normalize,
                domains,
            } => {
                let opts = SparseOptions {
                    tf_normalize: *tf_normalize,
                };
                let mut raw = Vec::with_capacity(domains.len());
                for name in domains {
                    let train = load_sparse_text(dir.join(format!("{name}.train")), *dim, opts)?;
                    let test = load_sparse_text(dir.join(format!("{name}.test")), *dim, opts)?;
                    raw.push((name.clone(), train, test));
                }
                // One label vocabulary across all files keeps classes aligned.
                let mut vocab: Vec<i64> = raw
                    .iter()
                    .flat_map(|(_, a, b)| a.labels.iter().chain(&b.labels).copied())
                    .collect();
                vocab.sort_unstable();
                vocab.dedup();
                let map = |labels: &[i64]| -> Vec<usize> {
                    labels
                        .iter()
                        .map(|l| vocab.binary_search(l).expect("in vocab"))
                        .collect()
                };
                let domains = raw
                    .into_iter()
                    .map(|(name, a, b)| {
                        Ok((
                            name,
                            LabeledSet::new(a.x, map(&a.labels))?,
                            LabeledSet::new(b.x, map(&b.labels))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Domains {
                    domains,
                    num_classes: vocab.len(),
                })
            }
        }
    }
}

fn require<'a>(sel: Option<&'a str>, role: &str) -> Result<&'a str> {
    sel.ok_or_else(|| Error::Config(vec![format!("{role} domain must be set for this dataset")]))
}

/// Assembles the dataset for one source→target pair.
///
/// Sampling seeds derive from the experiment seed, so every method sees the
/// same instances. Target rows are split 50/50 into dev and test.
pub fn build_dataset(
    cfg: &ExperimentConfig,
    pools: &DomainPools,
    source: Option<&str>,
    target: Option<&str>,
) -> Result<DomainPairDataset> {
    let seed = cfg.train.seed;
    let root = Rng::new(seed).split(0xda7a);
    let sub = |k: u64| root.split(k).next_u64();
    let ds = match pools {
        DomainPools::Synthetic => {
            let spec = cfg
                .dataset
                .synthetic_spec(seed)
                .ok_or_else(|| Error::InvalidArgument("synthetic pools need a synthetic dataset".into()))?;
            make_synthetic(&spec)?
        }
        DomainPools::Digits { train, test, digits } => {
            let parse = |s: &str, role: &str| -> Result<usize> {
                s.parse::<usize>()
                    .ok()
                    .filter(|d| digits.contains(d))
                    .ok_or_else(|| Error::Config(vec![format!("{role} `{s}` is not one of {digits:?}")]))
            };
            let s = parse(require(source, "source")?, "source")?;
            let t = parse(require(target, "target")?, "target")?;
            let source_labeled = binary_digit_task(&train.x, &train.y, &DigitTask::train(s, digits), sub(0))?;
            let target_pool = binary_digit_task(&train.x, &train.y, &DigitTask::train(t, digits), sub(1))?;
            let target_eval = binary_digit_task(&test.x, &test.y, &DigitTask::test(t, digits), sub(2))?;
            let (target_dev, target_test) = split_dev_test(&target_eval, sub(3));
            DomainPairDataset {
                dim: train.x.cols(),
                num_classes: 2,
                source_unlabeled: source_labeled.x.clone(),
                source_labeled,
                target_unlabeled: target_pool.x,
                target_dev,
                target_test,
            }
        }
        DomainPools::Domains { domains, num_classes } => {
            let find = |sel: Option<&str>, role: &str| -> Result<&(String, LabeledSet, LabeledSet)> {
                let name = require(sel, role)?;
                domains
                    .iter()
                    .find(|(n, _, _)| n == name)
                    .ok_or_else(|| Error::Config(vec![format!("unknown {role} domain `{name}`")]))
            };
            let (_, s_train, _) = find(source, "source")?;
            let (_, t_train, t_test) = find(target, "target")?;
            if s_train.x.cols() != t_train.x.cols() {
                return Err(Error::shape("build_dataset", s_train.x.shape(), t_train.x.shape()));
            }
            let (target_dev, target_test) = split_dev_test(t_test, sub(3));
            DomainPairDataset {
                dim: s_train.x.cols(),
                num_classes: *num_classes,
                source_labeled: s_train.clone(),
                source_unlabeled: s_train.x.clone(),
                target_unlabeled: t_train.x.clone(),
                target_dev,
                target_test,
            }
        }
    };
    ds.validate()?;
    Ok(ds)
}
