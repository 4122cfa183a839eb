//! `key = value` experiment configuration with flag overrides.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment.
//! Overrides (typically from command-line flags) replace file values. The
//! resolved configuration echoes back to the same format, so a run can be
//! reproduced from its echo alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{Generator, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{Architecture, Mode, TrainConfig};

/// Where domain data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Generated two-domain problem; its seed is the experiment seed.
    Synthetic {
        generator: Generator,
        samples: usize,
        noise: f64,
    },
    /// Binary "digit i vs. others" tasks from one IDX image set under `dir`.
    /// `source`/`target` select digits from `digits`.
    IdxDigits { dir: PathBuf, digits: Vec<usize> },
    /// Multi-class domains, each an IDX image set under `dir/<domain>/`.
    IdxDomains { dir: PathBuf, domains: Vec<String> },
    /// Sparse text domains stored as `dir/<domain>.train` and `dir/<domain>.test`.
    Sparse {
        dir: PathBuf,
        dim: usize,
        tf_normalize: bool,
        domains: Vec<String>,
    },
}

impl DatasetSource {
    pub fn kind(&self) -> &'static str {
        match self {
            DatasetSource::Synthetic { .. } => "synthetic",
            DatasetSource::IdxDigits { .. } => "idx_digits",
            DatasetSource::IdxDomains { .. } => "idx_domains",
            DatasetSource::Sparse { .. } => "sparse",
        }
    }

    /// Domain names usable as `source`/`target`, in configured order.
    pub fn domain_names(&self) -> Vec<String> {
        match self {
            DatasetSource::Synthetic { .. } => Vec::new(),
            DatasetSource::IdxDigits { digits, .. } => digits.iter().map(usize::to_string).collect(),
            DatasetSource::IdxDomains { domains, .. } | DatasetSource::Sparse { domains, .. } => domains.clone(),
        }
    }

    /// The synthetic spec for a given seed, if this source is synthetic.
    pub fn synthetic_spec(&self, seed: u64) -> Option<SyntheticSpec> {
        match self {
            DatasetSource::Synthetic {
                generator,
                samples,
                noise,
            } => Some(SyntheticSpec {
                generator: generator.clone(),
                samples_per_domain: *samples,
                noise: *noise,
                seed,
            }),
            _ => None,
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: String,
    pub dataset: DatasetSource,
    pub source: Option<String>,
    pub target: Option<String>,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub modes: Vec<Mode>,
    pub lambda_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Optimizer and schedule settings; `mode`, `lambda` and `mu` are set per run.
    pub train: TrainConfig,
    pub jobs: usize,
    pub outdir: PathBuf,
}

/// `{10^-8, …, 10^2}`.
pub fn default_grid() -> Vec<f64> {
    (-8..=2).map(|e| 10f64.powi(e)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: "two_moons".into(),
            dataset: DatasetSource::Synthetic {
                generator: Generator::TwoMoonsRotation { degrees: 30.0 },
                samples: 500,
                noise: 0.1,
            },
            source: None,
            target: None,
            hidden: vec![32],
            dropout: 0.0,
            modes: Mode::ALL.to_vec(),
            lambda_grid: default_grid(),
            mu_grid: default_grid(),
            fractions: vec![0.2, 0.5, 0.8, 1.0],
            train: TrainConfig::default(),
            jobs: 1,
            outdir: PathBuf::from("runs"),
        }
    }
}

const COMMON_KEYS: &[&str] = &[
    "task",
    "dataset",
    "hidden",
    "dropout",
    "modes",
    "lambda_grid",
    "mu_grid",
    "fractions",
    "lr",
    "rho",
    "epsilon",
    "batch_size",
    "max_epochs",
    "patience",
    "weight_decay",
    "seed",
    "jobs",
    "outdir",
];

fn dataset_keys(kind: &str) -> &'static [&'static str] {
    match kind {
        "synthetic" => &["generator", "rotation", "shift", "samples", "noise"],
        "idx_digits" => &["data_dir", "digits", "source", "target"],
        "idx_domains" => &["data_dir", "domains", "source", "target"],
        "sparse" => &["data_dir", "domains", "sparse_dim", "tf_normalize", "source", "target"],
        _ => &[],
    }
}

/// Raw `key → value` pairs before resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().replace('-', "_");
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Sets `key` (dashes normalized to underscores), replacing any value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.replace('-', "_"), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_raw(self)
    }
}

/// Collects parse problems instead of stopping at the first.
struct Resolver<'a> {
    raw: &'a RawConfig,
    problems: Vec<String>,
}

impl Resolver<'_> {
    fn scalar<T: FromStr>(&mut self, key: &str, default: T) -> T {
        match self.raw.get(key) {
            None => default,
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.problems.push(format!("{key}: cannot parse `{v}`"));
                default
            }),
        }
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Vec<T> {
        let Some(v) = self.raw.get(key) else {
            return default;
        };
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim) {
            match item.parse() {
                Ok(x) if !item.is_empty() => out.push(x),
                _ => {
                    self.problems.push(format!("{key}: cannot parse list item `{item}`"));
                    return default;
                }
            }
        }
        out
    }

    fn required_path(&mut self, key: &str) -> PathBuf {
        match self.raw.get(key) {
            Some(v) => PathBuf::from(v),
            None => {
                self.problems.push(format!("{key} is required for this dataset"));
                PathBuf::new()
            }
        }
    }
}

impl ExperimentConfig {
    /// Resolves raw pairs, reporting every problem at once.
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let d = Self::default();
        let mut r = Resolver {
            raw,
            problems: Vec::new(),
        };
        let kind = raw.get("dataset").unwrap_or("synthetic").to_string();
        let allowed = dataset_keys(&kind);
        if allowed.is_empty() {
            r.problems.push(format!(
                "dataset `{kind}` is not one of synthetic, idx_digits, idx_domains, sparse"
            ));
        }
        for key in raw.entries.keys() {
            // Misplaced source/target selectors are reported by `problems`.
            let selector = key == "source" || key == "target";
            if !selector && !COMMON_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
                if dataset_keys("synthetic")
                    .iter()
                    .chain(dataset_keys("sparse"))
                    .chain(dataset_keys("idx_digits"))
                    .any(|k| k == key)
                {
                    r.problems
                        .push(format!("key `{key}` does not apply to dataset `{kind}`"));
                } else {
                    r.problems.push(format!("unknown key `{key}`"));
                }
            }
        }

        let dataset = match kind.as_str() {
            "idx_digits" => DatasetSource::IdxDigits {
                dir: r.required_path("data_dir"),
                digits: r.list("digits", vec![3, 7, 8, 9]),
            },
            "idx_domains" => DatasetSource::IdxDomains {
                dir: r.required_path("data_dir"),
                domains: r.list("domains", Vec::new()),
            },
            "sparse" => DatasetSource::Sparse {
                dir: r.required_path("data_dir"),
                dim: r.scalar("sparse_dim", 0),
                tf_normalize: r.scalar("tf_normalize", false),
                domains: r.list("domains", Vec::new()),
            },
            _ => {
                let generator = match raw.get("generator").unwrap_or("two_moons") {
                    "two_moons" => Generator::TwoMoonsRotation {
                        degrees: r.scalar("rotation", 30.0),
                    },
                    "blobs" => {
                        let s: Vec<f64> = r.list("shift", vec![1.0, 0.0]);
                        if s.len() != 2 {
                            r.problems.push(format!("shift needs 2 components, got {}", s.len()));
                        }
                        Generator::GaussianBlobsShift {
                            shift: [s.first().copied().unwrap_or(0.0), s.get(1).copied().unwrap_or(0.0)],
                        }
                    }
                    other => {
                        r.problems
                            .push(format!("generator `{other}` is not two_moons or blobs"));
                        Generator::TwoMoonsRotation { degrees: 0.0 }
                    }
                };
                if matches!(generator, Generator::TwoMoonsRotation { .. }) && raw.get("shift").is_some() {
                    r.problems.push("shift applies only to generator = blobs".into());
                }
                if matches!(generator, Generator::GaussianBlobsShift { .. }) && raw.get("rotation").is_some() {
                    r.problems.push("rotation applies only to generator = two_moons".into());
                }
                DatasetSource::Synthetic {
                    generator,
                    samples: r.scalar("samples", 500),
                    noise: r.scalar("noise", 0.1),
                }
            }
        };

        let modes: Vec<String> = r.list("modes", Mode::ALL.iter().map(|m| m.name().to_string()).collect());
        let modes: Vec<Mode> = modes
            .iter()
            .filter_map(|m| match m.parse::<Mode>() {
                Ok(m) => Some(m),
                Err(e) => {
                    r.problems.push(format!("modes: {e}"));
                    None
                }
            })
            .collect();
        let train = TrainConfig {
            lr: r.scalar("lr", d.train.lr),
            rho: r.scalar("rho", d.train.rho),
            epsilon: r.scalar("epsilon", d.train.epsilon),
            batch_size: r.scalar("batch_size", d.train.batch_size),
            max_epochs: r.scalar("max_epochs", d.train.max_epochs),
            patience: r.scalar("patience", d.train.patience),
            weight_decay: r.scalar("weight_decay", d.train.weight_decay),
            seed: r.scalar("seed", d.train.seed),
            ..TrainConfig::default()
        };
        let cfg = Self {
            task: raw.get("task").map_or(d.task.clone(), str::to_string),
            dataset,
            source: raw.get("source").map(str::to_string),
            target: raw.get("target").map(str::to_string),
            hidden: r.list("hidden", d.hidden.clone()),
            dropout: r.scalar("dropout", d.dropout),
            modes,
            lambda_grid: r.list("lambda_grid", d.lambda_grid.clone()),
            mu_grid: r.list("mu_grid", d.mu_grid.clone()),
            fractions: r.list("fractions", d.fractions.clone()),
            train,
            jobs: r.scalar("jobs", d.jobs),
            outdir: raw.get("outdir").map_or(d.outdir.clone(), PathBuf::from),
        };
        let mut problems = r.problems;
        problems.extend(cfg.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Parses `path`, applies `overrides`, and resolves.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut raw = match path {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        for (k, v) in overrides {
            raw.set(k, v.clone());
        }
        raw.resolve()
    }

    /// Semantic problems of an already-typed configuration.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.task.is_empty() || self.task.contains(['/', '\\']) || self.task.starts_with('.') {
            p.push(format!("task `{}` must be a plain directory name", self.task));
        }
        if let Err(e) = self.architecture(2, 2).validate() {
            p.push(e.to_string());
        }
        if self.hidden.last().is_some_and(|&h| h < 2) {
            p.push("the last hidden layer needs at least 2 units for the embedding export".into());
        }
        if self.modes.is_empty() {
            p.push("modes must list at least one method".into());
        }
        let mut seen = self.modes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.modes.len() {
            p.push("modes must not repeat".into());
        }
        for (name, grid) in [("lambda_grid", &self.lambda_grid), ("mu_grid", &self.mu_grid)] {
            if grid.is_empty() {
                p.push(format!("{name} must be nonempty"));
            }
            if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                p.push(format!("{name} values must be finite and >= 0"));
            }
        }
        if self.modes.iter().any(|m| m.uses_reconstruction()) && self.lambda_grid.iter().all(|&v| v == 0.0) {
            p.push("modes ae_only/dauto need a positive value in lambda_grid".into());
        }
        if self.modes.iter().any(|m| m.uses_adversary()) && self.mu_grid.iter().all(|&v| v == 0.0) {
            p.push("modes dann/dauto need a positive value in mu_grid".into());
        }
        if self.fractions.is_empty()
            || self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0))
            || self.fractions.windows(2).any(|w| w[0] >= w[1])
        {
            p.push("fractions must be strictly ascending values in (0, 1]".into());
        }
        if self.jobs == 0 {
            p.push("jobs must be >= 1".into());
        }
        p.extend(self.train.problems());

        match &self.dataset {
            DatasetSource::Synthetic { samples, noise, .. } => {
                if self.source.is_some() || self.target.is_some() {
                    p.push("source/target do not apply to synthetic datasets".into());
                }
                if *samples < 4 {
                    p.push(format!("samples must be >= 4, got {samples}"));
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    p.push(format!("noise must be finite and >= 0, got {noise}"));
                }
            }
            other => {
                let names = other.domain_names();
                if names.is_empty() {
                    p.push(format!("dataset {} needs a nonempty domain/digit list", other.kind()));
                }
                for (role, sel) in [("source", &self.source), ("target", &self.target)] {
                    if let Some(s) = sel {
                        if !names.contains(s) {
                            p.push(format!("{role} `{s}` is not one of {names:?}"));
                        }
                    }
                }
                match other {
                    DatasetSource::IdxDigits { dir, digits } => {
                        if digits.iter().any(|&d| d > 9) {
                            p.push("digits must lie in 0..=9".into());
                        }
                        for f in IDX_FILES {
                            check_file(&mut p, &dir.join(f));
                        }
                    }
                    DatasetSource::IdxDomains { dir, domains } => {
                        for dom in domains {
                            for f in IDX_FILES {
                                check_file(&mut p, &dir.join(dom).join(f));
                            }
                        }
                    }
                    DatasetSource::Sparse { dir, dim, domains, .. } => {
                        if *dim == 0 {
                            p.push("sparse_dim must be > 0".into());
                        }
                        for dom in domains {
                            for ext in ["train", "test"] {
                                check_file(&mut p, &dir.join(format!("{dom}.{ext}")));
                            }
                        }
                    }
                    DatasetSource::Synthetic { .. } => unreachable!(),
                }
            }
        }
        p
    }

    pub fn architecture(&self, input_dim: usize, num_classes: usize) -> Architecture {
        Architecture::new(input_dim, self.hidden.clone(), num_classes).with_dropout(self.dropout)
    }

    /// The directory holding every output of this experiment.
    pub fn task_dir(&self) -> PathBuf {
        self.outdir.join(&self.task)
    }

    /// Canonical `key = value` text that resolves back to `self`.
    pub fn echo(&self) -> String {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut o = format!("# dauto {}\n", env!("CARGO_PKG_VERSION"));
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        kv("task", self.task.clone());
        kv("dataset", self.dataset.kind().into());
        match &self.dataset {
            DatasetSource::Synthetic {
                generator,
                samples,
                noise,
            } => {
                match generator {
                    Generator::TwoMoonsRotation { degrees } => {
                        kv("generator", "two_moons".into());
                        kv("rotation", degrees.to_string());
                    }
                    Generator::GaussianBlobsShift { shift } => {
                        kv("generator", "blobs".into());
                        kv("shift", list(shift));
                    }
                }
                kv("samples", samples.to_string());
                kv("noise", noise.to_string());
            }
            DatasetSource::IdxDigits { dir, digits } => {
                kv("data_dir", dir.display().to_string());
                kv("digits", list(digits));
            }
            DatasetSource::IdxDomains { dir, domains } => {
                kv("data_dir", dir.display().to_string());
                kv("domains", domains.join(","));
            }
            DatasetSource::Sparse {
                dir,
                dim,
                tf_normalize,
                domains,
            } => {
                kv("data_dir", dir.display().to_string());
                kv("domains", domains.join(","));
                kv("sparse_dim", dim.to_string());
                kv("tf_normalize", tf_normalize.to_string());
            }
        }
        if let Some(s) = &self.source {
            kv("source", s.clone());
        }
        if let Some(t) = &self.target {
            kv("target", t.clone());
        }
        kv("hidden", list(&self.hidden));
        kv("dropout", self.dropout.to_string());
        kv(
            "modes",
            self.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        kv("lambda_grid", list(&self.lambda_grid));
        kv("mu_grid", list(&self.mu_grid));
        kv("fractions", list(&self.fractions));
        kv("lr", self.train.lr.to_string());
        kv("rho", self.train.rho.to_string());
        kv("epsilon", self.train.epsilon.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("max_epochs", self.train.max_epochs.to_string());
        kv("patience", self.train.patience.to_string());
        kv("weight_decay", self.train.weight_decay.to_string());
        kv("seed", self.train.seed.to_string());
        kv("jobs", self.jobs.to_string());
        kv("outdir", self.outdir.display().to_string());
        o
    }
}

/// Standard IDX file names inside a dataset directory.
pub const IDX_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

fn check_file(problems: &mut Vec<String>, path: &Path) {
    if !path.is_file() {
        problems.push(format!("missing file {}", path.display()));
    }
}
