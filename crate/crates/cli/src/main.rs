//! `smnl`: solve tiered offers, run simulations and check the implementation.

mod output;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use smnl::simulator::{experiment_preset, run_experiment, Aggregate, ExperimentConfig};
use smnl::verify::{fast_checks, VerifyOptions, VERIFY_SEED};
use smnl::{solve_two_tier, Catalog, Execution};

use output::{write_artifacts, Manifest};

/// Exit code for failed checks; errors in input or output use 1.
const CHECK_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "smnl", version, about = "Tiered recommendations under the sequential multinomial logit model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal two-tier offer for a catalog file.
    Solve {
        catalog: PathBuf,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// One replication of every scenario and policy in a config (or manifest).
    Simulate {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        /// Output directory.
        #[arg(long, env = "SMNL_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Replicated experiment: a preset number (1, 2, 3), a config or a manifest.
    Experiment {
        which: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long, env = "SMNL_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Fast correctness checks; exits with 2 if any fails.
    Verify {
        /// Directory with catalog fixtures; built-in copies are used otherwise.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, default_value_t = VERIFY_SEED)]
        seed: u64,
        /// Confidence-bound constant under test.
        #[arg(long, hide = true)]
        ucb_scale: Option<f64>,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Solve { catalog, json } => solve(&catalog, json),
        Command::Simulate {
            config,
            seed,
            horizon,
            out,
            sequential,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.replications = 1;
            override_config(&mut cfg, seed, horizon);
            simulate(&cfg, "simulate", out, sequential, false)
        }
        Command::Experiment {
            which,
            reps,
            seed,
            horizon,
            out,
            sequential,
        } => {
            let mut cfg = match which.parse::<u8>() {
                Ok(n) => experiment_preset(n)?,
                Err(_) => load_config(Path::new(&which))?,
            };
            if let Some(r) = reps {
                cfg.replications = r;
            }
            override_config(&mut cfg, seed, horizon);
            simulate(&cfg, "experiment", out, sequential, true)
        }
        Command::Verify {
            fixtures,
            seed,
            ucb_scale,
            json,
        } => {
            let mut opts = VerifyOptions {
                fixtures,
                seed,
                ..VerifyOptions::default()
            };
            if let Some(c) = ucb_scale {
                opts.ucb_scale = c;
            }
            verify(&opts, json)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

#[derive(Serialize)]
struct SolveOutput {
    tier1: Vec<u32>,
    tier2: Vec<u32>,
    expected_profit: f64,
    threshold_tier1: Option<f64>,
    threshold_tier2: Option<f64>,
    proven_optimal: bool,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn solve(path: &Path, json: bool) -> Result<ExitCode> {
    let catalog: Catalog =
        serde_json::from_str(&read(path)?).with_context(|| format!("invalid catalog {}", path.display()))?;
    let r = solve_two_tier(&catalog)?;
    if json {
        let out = SolveOutput {
            tier1: r.offer.tier(0).iter().map(|p| p.0).collect(),
            tier2: r.offer.tier(1).iter().map(|p| p.0).collect(),
            expected_profit: r.expected_profit,
            threshold_tier1: finite(r.thresholds.0),
            threshold_tier2: finite(r.thresholds.1),
            proven_optimal: r.proven_optimal,
        };
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        let th = |x: f64| finite(x).map_or("none".to_string(), |v| format!("{v}"));
        println!("offer: {}", r.offer.normalized());
        println!("expected profit: {:.6}", r.expected_profit);
        println!("tier 1 threshold: {}", th(r.thresholds.0));
        println!("tier 2 threshold: {}", th(r.thresholds.1));
        if !r.proven_optimal {
            println!("warning: search limit reached; offer is the best found, not proven optimal");
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Reads a config file, or the config stored in a manifest.
fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))?;
    let cfg = if value.get("tool").is_some() && value.get("config").is_some() {
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))?;
        m.config
    } else {
        ExperimentConfig::from_json(&text).with_context(|| format!("invalid config {}", path.display()))?
    };
    cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

fn override_config(cfg: &mut ExperimentConfig, seed: Option<u64>, horizon: Option<u64>) {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
}

fn simulate(
    cfg: &ExperimentConfig,
    command: &str,
    out: Option<PathBuf>,
    sequential: bool,
    mean_curves: bool,
) -> Result<ExitCode> {
    cfg.validate()?;
    let exec = if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out = out.unwrap_or_else(|| PathBuf::from("smnl-out").join(output::slug(&cfg.name)));
    // Fail on an unusable directory before spending time on the runs.
    fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let aggs = run_experiment(cfg, exec)?;
    let manifest = write_artifacts(&out, command, cfg, &aggs, mean_curves)?;
    print_table(cfg, &aggs);
    println!("wrote {} files to {}", manifest.files.len() + 1, out.display());
    Ok(ExitCode::SUCCESS)
}

fn print_table(cfg: &ExperimentConfig, aggs: &[Aggregate]) {
    println!(
        "{}: horizon {}, {} replication(s), seed {}",
        cfg.name, cfg.horizon, cfg.replications, cfg.seed
    );
    println!("{:<24} {:<24} {:>12} {:>10}", "scenario", "policy", "mean regret", "std dev");
    for a in aggs {
        println!(
            "{:<24} {:<24} {:>12.2} {:>10.2}",
            a.scenario, a.policy, a.final_regret.mean, a.final_regret.std_dev
        );
    }
}

fn verify(opts: &VerifyOptions, json: bool) -> Result<ExitCode> {
    let reports = fast_checks(opts);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            println!("{}", r.line());
        }
        println!("{}/{} checks passed", reports.len() - failed.len(), reports.len());
    }
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed checks: {}", failed.join(", "));
        Ok(ExitCode::from(CHECK_FAILED))
    }
}
