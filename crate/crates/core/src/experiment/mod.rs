//! Experiment drivers: single source→target comparisons, label-fraction
//! sweeps and all-pairs domain matrices.
//!
//! Every file lands under `<outdir>/<task>/`. Per-method outputs go to
//! `<scope>/<method>/{trace.csv, report.csv, model.bin, embed.tsv}`, where
//! `<scope>` is empty for single runs, `fraction-<f>` for sweeps and
//! `<source>-to-<target>` for matrices.

mod config;
mod datasets;

pub use config::{default_grid, DatasetSource, ExperimentConfig, RawConfig, IDX_FILES};
pub use datasets::{build_dataset, DomainPools};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{subsample_labels, DomainPairDataset};
use crate::error::{Error, Result};
use crate::eval::{
    format_sig6, paired_t_test, pca2, proxy_a_distance_from_features, pvalue_matrix_csv, write_embedding_tsv, MatrixCsv,
};
use crate::model::{grid_search, save_checkpoint, GridCell, Mode};
use crate::tensor::Matrix;

/// Outcome of one method on one source→target dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    /// `""` for single runs, `fraction-<f>` or `<source>-to-<target>` otherwise.
    pub scope: String,
    pub method: Mode,
    pub fraction: f64,
    pub test_accuracy: f64,
    pub dev_accuracy: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub best_epoch: usize,
    /// Proxy 𝒜-distance between source and target inputs.
    pub proxy_before: f64,
    /// Proxy 𝒜-distance between source and target representations.
    pub proxy_after: f64,
    /// Directory with this method's trace, grid report, checkpoint and embedding.
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub results: Vec<MethodResult>,
    /// `(scope, method, cell)` for every grid cell trained.
    pub grid: Vec<(String, Mode, GridCell)>,
    /// Failed methods or grid cells; empty iff every run completed.
    pub failures: Vec<String>,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
    pub version: &'static str,
}

impl RunReport {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            results: Vec::new(),
            grid: Vec::new(),
            failures: Vec::new(),
            files: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }

    fn write(&mut self, path: PathBuf, contents: &str) -> Result<()> {
        ensure_parent(&path)?;
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn results_for(&self, scope: &str) -> impl Iterator<Item = &MethodResult> {
        let scope = scope.to_string();
        self.results.iter().filter(move |r| r.scope == scope)
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn grid_csv(cells: &[GridCell]) -> String {
    let mut out = String::from("lambda,mu,seed,dev_accuracy,error\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_sig6(c.lambda),
            format_sig6(c.mu),
            c.seed,
            c.dev_accuracy.map(format_sig6).unwrap_or_default(),
            csv_field(c.error.as_deref().unwrap_or_default())
        );
    }
    out
}

fn accuracy_csv<'a>(results: impl Iterator<Item = &'a MethodResult>) -> String {
    let mut out = String::from("method,test_accuracy,dev_accuracy,lambda,mu,best_epoch,proxy_a_input,proxy_a_repr\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            format_sig6(r.test_accuracy),
            r.dev_accuracy.map(format_sig6).unwrap_or_default(),
            format_sig6(r.lambda),
            format_sig6(r.mu),
            r.best_epoch,
            format_sig6(r.proxy_before),
            format_sig6(r.proxy_after)
        );
    }
    out
}

/// Stacked source/target representations, tagged for the embedding export.
fn representation_pair(model: &crate::model::DautoModel, ds: &DomainPairDataset) -> Result<(Matrix, Matrix)> {
    Ok((
        model.represent(&ds.source_unlabeled)?,
        model.represent(&ds.target_unlabeled)?,
    ))
}

/// Runs every configured method on `ds`, writing outputs under `scope_dir`.
fn run_methods(
    cfg: &ExperimentConfig,
    ds: &DomainPairDataset,
    scope: &str,
    fraction: f64,
    report: &mut RunReport,
) -> Result<()> {
    let scope_dir = cfg.task_dir().join(scope);
    let arch = cfg.architecture(ds.dim, ds.num_classes);
    let seed = cfg.train.seed;
    let proxy_before = proxy_a_distance_from_features(&ds.source_unlabeled, &ds.target_unlabeled, seed)?;
    for &mode in &cfg.modes {
        let base = cfg.train.with_mode(mode, 0.0, 0.0);
        let label = if scope.is_empty() {
            mode.name().to_string()
        } else {
            format!("{scope}/{mode}")
        };
        let grid = match grid_search(&arch, ds, &base, &cfg.lambda_grid, &cfg.mu_grid, cfg.jobs) {
            Ok(g) => g,
            Err(e) => {
                report.failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        for c in &grid.cells {
            if let Some(e) = &c.error {
                report
                    .failures
                    .push(format!("{label} cell lambda={} mu={}: {e}", c.lambda, c.mu));
            }
            report.grid.push((scope.to_string(), mode, c.clone()));
        }
        let dir = scope_dir.join(mode.name());
        report.write(dir.join("trace.csv"), &grid.trace.to_csv())?;
        report.write(dir.join("report.csv"), &grid_csv(&grid.cells))?;
        let ckpt = dir.join("model.bin");
        save_checkpoint(&grid.model, &ckpt)?;
        report.files.push(ckpt);

        let (zs, zt) = representation_pair(&grid.model, ds)?;
        let proxy_after = proxy_a_distance_from_features(&zs, &zt, seed)?;
        let stacked = Matrix::vstack(&zs, &zt)?;
        let tags: Vec<&str> = (0..stacked.rows())
            .map(|i| if i < zs.rows() { "source" } else { "target" })
            .collect();
        let embed = dir.join("embed.tsv");
        write_embedding_tsv(&embed, &pca2(&stacked)?.coords, &tags)?;
        report.files.push(embed);

        report.results.push(MethodResult {
            scope: scope.to_string(),
            method: mode,
            fraction,
            test_accuracy: grid.test_accuracy,
            dev_accuracy: grid.trace.best_dev_accuracy(),
            lambda: grid.best_config.lambda,
            mu: grid.best_config.mu,
            best_epoch: grid.trace.best_epoch,
            proxy_before,
            proxy_after,
            dir,
        });
    }
    Ok(())
}

fn start(cfg: &ExperimentConfig) -> Result<RunReport> {
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let mut report = RunReport::new(cfg);
    report.write(cfg.task_dir().join("config.txt"), &cfg.echo())?;
    Ok(report)
}

/// Trains every configured method on one source→target pair from identical
/// seeds and architectures, then writes `accuracy.csv`.
///
/// Non-synthetic datasets need both `source` and `target`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut report = start(cfg)?;
    let pools = DomainPools::load(&cfg.dataset)?;
    let ds = build_dataset(cfg, &pools, cfg.source.as_deref(), cfg.target.as_deref())?;
    run_methods(cfg, &ds, "", 1.0, &mut report)?;
    let csv = accuracy_csv(report.results_for(""));
    report.write(cfg.task_dir().join("accuracy.csv"), &csv)?;
    Ok(report)
}

/// Repeats [`run_experiment`] on nested label subsamples and writes a
/// long-format `sweep.csv` with columns `method,fraction,accuracy`.
pub fn run_fraction_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut report = start(cfg)?;
    let pools = DomainPools::load(&cfg.dataset)?;
    let full = build_dataset(cfg, &pools, cfg.source.as_deref(), cfg.target.as_deref())?;
    for &f in &cfg.fractions {
        let scope = format!("fraction-{f}");
        match subsample_labels(&full, f, cfg.train.seed) {
            Ok(ds) => run_methods(cfg, &ds, &scope, f, &mut report)?,
            Err(e) => report.failures.push(format!("{scope}: {e}")),
        }
        let csv = accuracy_csv(report.results_for(&scope));
        report.write(cfg.task_dir().join(&scope).join("accuracy.csv"), &csv)?;
    }
    let mut sweep = String::from("method,fraction,accuracy\n");
    for &mode in &cfg.modes {
        for r in report.results.iter().filter(|r| r.method == mode) {
            let _ = writeln!(
                sweep,
                "{},{},{}",
                mode,
                format_sig6(r.fraction),
                format_sig6(r.test_accuracy)
            );
        }
    }
    report.write(cfg.task_dir().join("sweep.csv"), &sweep)?;
    Ok(report)
}

/// Trains every method on every ordered (source, target) pair of the
/// configured domains. The diagonal trains on the target domain's own labels.
///
/// Writes `matrix-<method>.csv` (rows: source, columns: target), a long
/// `accuracy.csv`, and `pvalues.csv` from paired t-tests over the cells.
pub fn run_digit_matrix(cfg: &ExperimentConfig) -> Result<RunReport> {
    let names = cfg.dataset.domain_names();
    if names.is_empty() {
        return Err(Error::Config(
            vec!["a domain matrix needs idx or sparse domains".into()],
        ));
    }
    let mut report = start(cfg)?;
    let pools = DomainPools::load(&cfg.dataset)?;
    let mut long = String::from("source,target,method,test_accuracy\n");
    for s in &names {
        for t in &names {
            let scope = format!("{s}-to-{t}");
            match build_dataset(cfg, &pools, Some(s), Some(t)) {
                Ok(ds) => run_methods(cfg, &ds, &scope, 1.0, &mut report)?,
                Err(e) => report.failures.push(format!("{scope}: {e}")),
            }
            for r in report.results_for(&scope) {
                let _ = writeln!(long, "{s},{t},{},{}", r.method, format_sig6(r.test_accuracy));
            }
        }
    }
    report.write(cfg.task_dir().join("accuracy.csv"), &long)?;

    let mut scores: Vec<Vec<f64>> = Vec::new();
    for &mode in &cfg.modes {
        let mut values = Vec::with_capacity(names.len() * names.len());
        for s in &names {
            for t in &names {
                let scope = format!("{s}-to-{t}");
                let acc = report
                    .results_for(&scope)
                    .find(|r| r.method == mode)
                    .map_or(f64::NAN, |r| r.test_accuracy);
                values.push(acc);
            }
        }
        let m = MatrixCsv {
            corner: "source".into(),
            row_names: names.clone(),
            col_names: names.clone(),
            values: Matrix::from_vec(names.len(), names.len(), values.clone())?,
        };
        report.write(cfg.task_dir().join(format!("matrix-{mode}.csv")), &m.to_csv())?;
        scores.push(values);
    }
    if scores.len() >= 2 && names.len() * names.len() >= 2 && scores.iter().flatten().all(|v| v.is_finite()) {
        let k = scores.len();
        let mut p = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                p.set(i, j, paired_t_test(&scores[i], &scores[j])?.p);
            }
        }
        let methods: Vec<&str> = cfg.modes.iter().map(|m| m.name()).collect();
        report.write(cfg.task_dir().join("pvalues.csv"), &pvalue_matrix_csv(&methods, &p)?)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(outdir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            task: "moons".into(),
            hidden: vec![6, 3],
            lambda_grid: vec![0.1],
            mu_grid: vec![0.1],
            fractions: vec![0.5, 1.0],
            train: crate::model::TrainConfig {
                max_epochs: 3,
                ..Default::default()
            },
            dataset: DatasetSource::Synthetic {
                generator: crate::data::Generator::TwoMoonsRotation { degrees: 30.0 },
                samples: 40,
                noise: 0.1,
            },
            outdir: outdir.to_path_buf(),
            ..Default::default()
        }
    }

    #[test]
    fn experiment_layout_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let report = run_experiment(&cfg).unwrap();
        assert!(report.success(), "{:?}", report.failures);
        let csv = fs::read_to_string(dir.path().join("moons/accuracy.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4);
        for m in Mode::ALL {
            for f in ["trace.csv", "report.csv", "model.bin", "embed.tsv"] {
                assert!(dir.path().join("moons").join(m.name()).join(f).is_file());
            }
        }
        assert!(report.files.iter().all(|f| f.starts_with(dir.path())));
    }

    #[test]
    fn single_mode_single_row() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            modes: vec![Mode::NoAdapt],
            ..small(dir.path())
        };
        run_experiment(&cfg).unwrap();
        let csv = fs::read_to_string(dir.path().join("moons/accuracy.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("no_adapt,"));
    }

    #[test]
    fn sweep_rows_are_methods_times_fractions() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let report = run_fraction_sweep(&cfg).unwrap();
        assert!(report.success());
        let csv = fs::read_to_string(dir.path().join("moons/sweep.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("method,fraction,accuracy"));
        assert_eq!(csv.lines().count(), 1 + 4 * 2);
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            fractions: vec![],
            modes: vec![],
            ..small(dir.path())
        };
        let Err(Error::Config(p)) = run_experiment(&cfg) else {
            panic!()
        };
        assert!(p.len() >= 2);
        assert!(fs::read_dir(dir.path()).unwrap().next().is_none());
    }
}
