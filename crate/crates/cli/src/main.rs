use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use paneitz_cli::{convergence_table, resolve_out_dir, run, sweep, write_outputs, ConfigError, ExperimentConfig, Task};
use serde_json::json;

/// Q-curvature and Paneitz-operator experiments on symmetric backgrounds.
#[derive(Parser)]
#[command(name = "paneitz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature fields of the background.
    Curvature(Common),
    /// Conformal covariance residual of the Paneitz operator.
    CovarianceTest(Common),
    /// Estimates of Y, Y4, Y4+ and Y4*.
    Invariants(Common),
    /// Subcritical starter and the lambda0 search.
    Starter(Common),
    /// Continuation from lambda0 to 0; writes the path CSV.
    Continue(Common),
    /// Bochner, total-Q and quadratic-form identities.
    Identities(Common),
    /// Runs a JSON array of configs in parallel.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (JSON); defaults to the round S^6 when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides PANEITZ_OUT_DIR and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(r) = self.resolution {
            cfg.resolution = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Curvature(c) => single(Task::Curvature, &c),
        Command::CovarianceTest(c) => single(Task::CovarianceTest, &c),
        Command::Invariants(c) => single(Task::Invariants, &c),
        Command::Starter(c) => single(Task::Starter, &c),
        Command::Continue(c) => single(Task::Continue, &c),
        Command::Identities(c) => single(Task::Identities, &c),
        Command::Sweep(c) => many(&c),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| c.downcast_ref::<ConfigError>().is_some());
            ExitCode::from(if config_error { EXIT_CONFIG } else { EXIT_FAILED })
        }
    }
}

fn single(task: Task, args: &Common) -> anyhow::Result<u8> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(task),
    };
    cfg.task = task;
    args.apply(&mut cfg);
    let outcome = run(&cfg)?;
    let dir = resolve_out_dir(args.out.as_deref(), &cfg);
    let written = write_outputs(&outcome, &dir).with_context(|| format!("writing outputs to {}", dir.display()))?;
    summarize(&outcome.report, &written);
    Ok(if outcome.report.passed() { 0 } else { EXIT_FAILED })
}

fn summarize(report: &paneitz_cli::RunReport, written: &[PathBuf]) {
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:<24} measured {:.3e} ({:?} {:.1e})", c.name, c.measured, c.comparison, c.tolerance);
    }
    if let Some(e) = &report.error {
        println!("ERROR {}: {}", e.kind, e.message);
    }
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn many(args: &Common) -> anyhow::Result<u8> {
    let path = args.config.as_deref().context("sweep needs --config with a JSON array of configs")?;
    let mut configs = ExperimentConfig::load_list(path)?;
    for c in &mut configs {
        args.apply(c);
    }
    let base = match (&args.out, configs.first()) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => resolve_out_dir(None, c),
        (None, None) => resolve_out_dir(None, &ExperimentConfig::new(Task::Curvature)),
    };
    let results = sweep(&configs);
    let mut entries = Vec::new();
    let mut reports = Vec::new();
    let mut code = 0;
    for (i, r) in results.iter().enumerate() {
        let dir = base.join(format!("run-{i:03}"));
        match r {
            Ok(outcome) => {
                write_outputs(outcome, &dir).with_context(|| format!("writing {}", dir.display()))?;
                if !outcome.report.passed() {
                    code = EXIT_FAILED;
                }
                entries.push(json!({ "index": i, "task": outcome.report.config.task, "status": outcome.report.status, "dir": dir }));
                reports.push(&outcome.report);
            }
            Err(e) => {
                code = EXIT_FAILED;
                entries.push(json!({ "index": i, "status": "invalid_config", "error": e.to_string() }));
            }
        }
    }
    let summary = json!({ "runs": entries, "covariance_convergence": convergence_table(&reports) });
    write_summary(&base, &summary)?;
    println!("{} runs, summary in {}", results.len(), base.join("sweep.json").display());
    Ok(code)
}

fn write_summary(dir: &Path, summary: &serde_json::Value) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(dir.join("sweep.json"), text)?;
    Ok(())
}
