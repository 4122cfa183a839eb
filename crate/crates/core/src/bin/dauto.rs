use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dauto::experiment::{run_digit_matrix, run_experiment, run_fraction_sweep, ExperimentConfig, RunReport};
use dauto::Error;

#[derive(Parser)]
#[command(name = "dauto", version, about = "Train and compare domain-adaptation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare methods on one source→target pair.
    Run(Flags),
    /// Repeat a run over nested label fractions.
    Sweep(Flags),
    /// Run every source×target pair of the configured domains.
    Matrix(Flags),
    /// Validate and print the resolved configuration.
    Config(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated methods: no_adapt, ae_only, dann, dauto.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    mu_grid: Option<String>,
    #[arg(long)]
    fractions: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, env = "DAUTO_OUTDIR")]
    outdir: Option<PathBuf>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    target: Option<String>,
    /// Any other config key, e.g. `--set max_epochs=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Flags {
    fn overrides(&self) -> Result<Vec<(String, String)>, Error> {
        let mut o = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        let named = [
            ("task", self.task.clone()),
            ("modes", self.mode.clone()),
            ("lambda_grid", self.lambda_grid.clone()),
            ("mu_grid", self.mu_grid.clone()),
            ("fractions", self.fractions.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("jobs", self.jobs.map(|v| v.to_string())),
            ("outdir", self.outdir.as_ref().map(|p| p.display().to_string())),
            ("source", self.source.clone()),
            ("target", self.target.clone()),
        ];
        o.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        Ok(o)
    }

    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        ExperimentConfig::load(self.config.as_deref(), &self.overrides()?)
    }
}

fn summarize(report: &RunReport) {
    for r in &report.results {
        let scope = if r.scope.is_empty() { "-" } else { &r.scope };
        println!(
            "{scope}\t{}\ttest={:.4}\tlambda={:e}\tmu={:e}\t{}",
            r.method,
            r.test_accuracy,
            r.lambda,
            r.mu,
            r.dir.display()
        );
    }
    for f in &report.failures {
        eprintln!("FAILED {f}");
    }
}

type Runner = fn(&ExperimentConfig) -> dauto::Result<RunReport>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (flags, runner): (&Flags, Option<Runner>) = match &cli.command {
        Command::Run(f) => (f, Some(run_experiment)),
        Command::Sweep(f) => (f, Some(run_fraction_sweep)),
        Command::Matrix(f) => (f, Some(run_digit_matrix)),
        Command::Config(f) => (f, None),
    };
    let cfg = match flags.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let Some(run) = runner else {
        print!("{}", cfg.echo());
        return ExitCode::SUCCESS;
    };
    match run(&cfg) {
        Ok(report) => {
            summarize(&report);
            if report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
