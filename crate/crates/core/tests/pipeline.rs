use std::path::Path;
use std::process::Command;

use dauto::data::{make_synthetic, write_idx_images, write_idx_labels, Generator, SyntheticSpec};
use dauto::eval::{accuracy, parse_matrix_csv};
use dauto::experiment::{run_digit_matrix, run_experiment, ExperimentConfig};
use dauto::kde::{Kernel, Transform, TransformedKde};
use dauto::model::{
    fit, load_checkpoint, Architecture, DautoModel, LabeledBatch, LossWeights, Mode, TrainConfig, UnlabeledBatch, Want,
};
use dauto::optim::{sgd_step, Param};
use dauto::tensor::{Matrix, Rng};

fn overrides(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// 4×4 "digits": each class lights a different pair of pixels.
fn write_digit_fixture(dir: &Path, per_digit: usize, images: &str, labels: &str, seed: u64) {
    let mut rng = Rng::new(seed);
    let mut data = Vec::new();
    let mut y = Vec::new();
    for i in 0..10 * per_digit {
        let d = i % 10;
        for p in 0..16 {
            let on = p == d || p == d + 6;
            data.push(if on { 0.8 } else { 0.1 } + 0.1 * rng.uniform());
        }
        y.push(d);
    }
    let x = Matrix::from_vec(y.len(), 16, data).unwrap();
    write_idx_images(dir.join(images), &x, 4, 4).unwrap();
    write_idx_labels(dir.join(labels), &y).unwrap();
}

#[test]
fn digit_matrix_on_idx_fixture() {
    let data = tempfile::tempdir().unwrap();
    write_digit_fixture(
        data.path(),
        520,
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        1,
    );
    write_digit_fixture(data.path(), 760, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", 2);
    let out = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(
        None,
        &overrides(&[
            ("task", "digits"),
            ("dataset", "idx_digits"),
            ("data_dir", data.path().to_str().unwrap()),
            ("digits", "3,9"),
            ("hidden", "8,4"),
            ("modes", "no_adapt,dauto"),
            ("lambda_grid", "0.1"),
            ("mu_grid", "0.1"),
            ("max_epochs", "2"),
            ("outdir", out.path().to_str().unwrap()),
        ]),
    )
    .unwrap();
    let report = run_digit_matrix(&cfg).unwrap();
    assert!(report.success(), "{:?}", report.failures);
    assert_eq!(report.results.len(), 2 * 4);
    for mode in ["no_adapt", "dauto"] {
        let text = std::fs::read_to_string(cfg.task_dir().join(format!("matrix-{mode}.csv"))).unwrap();
        let m = parse_matrix_csv(&text).unwrap();
        assert_eq!(m.corner, "source");
        assert_eq!(m.row_names, ["3", "9"]);
        assert_eq!(m.values.shape(), (2, 2));
        assert!(m.values.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let p = parse_matrix_csv(&std::fs::read_to_string(cfg.task_dir().join("pvalues.csv")).unwrap()).unwrap();
    assert_eq!(p.col_names, ["no_adapt", "dauto"]);
    let long = std::fs::read_to_string(cfg.task_dir().join("accuracy.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 8);
}

#[test]
fn checkpoint_reproduces_reported_accuracy() {
    let out = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::load(
        None,
        &overrides(&[
            ("task", "ckpt"),
            ("samples", "100"),
            ("hidden", "8,2"),
            ("modes", "dauto"),
            ("lambda_grid", "0.1"),
            ("mu_grid", "0.1"),
            ("max_epochs", "5"),
            ("outdir", out.path().to_str().unwrap()),
        ]),
    )
    .unwrap();
    let report = run_experiment(&cfg).unwrap();
    let r = &report.results[0];
    let model = load_checkpoint(r.dir.join("model.bin")).unwrap();
    let ds = make_synthetic(&cfg.dataset.synthetic_spec(cfg.train.seed).unwrap()).unwrap();
    let acc = accuracy(&model.predict(&ds.target_test.x).unwrap(), &ds.target_test.y).unwrap();
    assert_eq!(acc, r.test_accuracy);
}

#[test]
fn separable_blobs_are_learned() {
    let spec = SyntheticSpec {
        generator: Generator::GaussianBlobsShift { shift: [0.0, 0.0] },
        samples_per_domain: 200,
        noise: 0.1,
        seed: 3,
    };
    let data = make_synthetic(&spec).unwrap();
    let arch = Architecture::new(2, vec![8], 2);
    let cfg = TrainConfig {
        max_epochs: 50,
        patience: 0,
        ..TrainConfig::default()
    };
    let (model, _) = fit(&arch, &data, &cfg).unwrap();
    let train_acc = accuracy(&model.predict(&data.source_labeled.x).unwrap(), &data.source_labeled.y).unwrap();
    assert_eq!(train_acc, 1.0);

    let (adapted, _) = fit(&arch, &data, &cfg.with_mode(Mode::Dauto, 1e-3, 1e-3)).unwrap();
    let test = |m: &DautoModel| accuracy(&m.predict(&data.target_test.x).unwrap(), &data.target_test.y).unwrap();
    assert!(test(&adapted) >= test(&model) - 0.02);
}

struct Autoencoder<'a>(&'a DautoModel);

impl Transform for Autoencoder<'_> {
    fn transform(&self, x: &Matrix) -> dauto::Result<Matrix> {
        self.0.forward(x, Want::Reconstruct)
    }
}

#[test]
fn trained_autoencoder_bounds_kde_likelihood() {
    let data = make_synthetic(&SyntheticSpec::two_moons(30.0, 60, 5)).unwrap();
    let cfg = TrainConfig {
        max_epochs: 20,
        patience: 0,
        ..TrainConfig::default()
    }
    .with_mode(Mode::AeOnly, 1.0, 0.0);
    let (model, _) = fit(&Architecture::new(2, vec![8, 2], 2), &data, &cfg).unwrap();
    let refs = data.target_unlabeled.clone();
    for w in [0.05, 0.3, 2.0] {
        let kde = TransformedKde::new(Kernel::Gaussian, w, refs.clone(), Autoencoder(&model)).unwrap();
        let recon = model.forward(&refs, Want::Reconstruct).unwrap();
        for j in 0..refs.rows() {
            let r = kde.bound_check(j).unwrap();
            let dist: f64 = refs
                .row(j)
                .iter()
                .zip(recon.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(r.gap >= -1e-12, "w={w} j={j} gap={}", r.gap);
            assert!((r.bound_value - (dist / (2.0 * w * w) + (refs.rows() as f64 * w).ln())).abs() < 1e-9);
        }
    }
}

#[test]
fn joint_objective_pushes_encoder_against_domain_head() {
    let data = make_synthetic(&SyntheticSpec::two_moons(60.0, 40, 9)).unwrap();
    let mut model = DautoModel::new(Architecture::new(2, vec![6, 3], 2), &mut Rng::new(4)).unwrap();
    let u = Matrix::vstack(&data.source_unlabeled, &data.target_unlabeled).unwrap();
    let tags: Vec<usize> = (0..u.rows()).map(|i| usize::from(i >= 40)).collect();
    let weights = LossWeights {
        lambda: 0.0,
        mu: 1.0,
        weight_decay: 0.0,
    };
    let domain_loss = |m: &mut DautoModel| {
        m.joint_loss(
            LabeledBatch {
                x: &data.source_labeled.x,
                y: &data.source_labeled.y,
            },
            Some(UnlabeledBatch { x: &u, domains: &tags }),
            weights,
            None,
        )
        .unwrap()
    };
    let start = domain_loss(&mut model);
    let before = start.parts.domain;

    let mut head_only = model.clone();
    let g = &start.grads.domain_head;
    let dh = &mut head_only.domain_head;
    sgd_step(
        &mut [Param::new("w", dh.weight.as_mut_slice()), Param::new("b", &mut dh.bias)],
        &[g.d_weight.as_slice().to_vec(), g.d_bias.clone()],
        0.05,
    )
    .unwrap();
    assert!(domain_loss(&mut head_only).parts.domain < before);

    let mut encoder_only = model.clone();
    let mut params = Vec::new();
    let mut grads = Vec::new();
    for (layer, g) in encoder_only.encoder.iter_mut().zip(&start.grads.encoder) {
        params.push(Param::new("w", layer.weight.as_mut_slice()));
        params.push(Param::new("b", &mut layer.bias));
        grads.push(g.d_weight.as_slice().to_vec());
        grads.push(g.d_bias.clone());
    }
    sgd_step(&mut params, &grads, 0.05).unwrap();
    assert!(domain_loss(&mut encoder_only).parts.domain > before);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dauto"))
}

#[test]
fn cli_exit_codes_and_config_echo() {
    let bad = cli().args(["config", "--set", "max_epochs=0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let unknown = cli().args(["run", "--set", "no_such_key=1"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let echo = cli()
        .args(["config", "--seed", "9", "--mode", "dann"])
        .output()
        .unwrap();
    assert!(echo.status.success());
    let text = String::from_utf8(echo.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("echo.txt");
    std::fs::write(&path, &text).unwrap();
    let again = cli()
        .args(["config", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);

    let run = cli()
        .args([
            "run",
            "--mode",
            "no_adapt",
            "--task",
            "tiny",
            "--set",
            "samples=60",
            "--set",
            "max_epochs=2",
        ])
        .args(["--outdir", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.path().join("tiny/accuracy.csv").is_file());
    assert!(dir.path().join("tiny/config.txt").is_file());
}
