//! `bench`: run Monte Carlo regret experiments, probe 0/1 streams with the
//! change-point detector, evaluate environment detectability, and materialize
//! environments as segment CSVs.

use std::io::Read;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use cascade_bandits::changepoint::first_detection;
use cascade_bandits::env;
use cascade_bandits::harness::{self, output, ExperimentConfig};

#[derive(Parser)]
#[command(name = "bench", about = "Benchmark harness for piecewise-stationary cascading bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a config file
    Run {
        /// JSON or key=value config file
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores; BENCH_WORKERS overrides)
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Feed a whitespace-separated 0/1 stream to the change-point detector
    Detect {
        /// Stream file; standard input when omitted
        file: Option<PathBuf>,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 1)]
        check_period: usize,
    },
    /// Report whether the configured environment's segments are long enough
    /// for reliable change detection
    CheckAssumption {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write an environment to a segment CSV
    MakeEnv {
        /// "synthetic" or "hard"
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Item count (hard only)
        #[arg(long)]
        l: Option<usize>,
        /// List length (hard only)
        #[arg(long)]
        k: Option<usize>,
        /// Block count (hard only)
        #[arg(long)]
        n: Option<usize>,
        /// Horizon (hard only)
        #[arg(long)]
        t: Option<u64>,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, workers } => run(&config, workers),
        Command::Detect { file, delta, stride, check_period } => detect(file, delta, stride, check_period),
        Command::CheckAssumption { config } => check_assumption(&config),
        Command::MakeEnv { kind, seed, out, l, k, n, t } => make_env(&kind, seed, &out, l, k, n, t),
    }
}

fn worker_count(flag: Option<usize>) -> anyhow::Result<usize> {
    if let Ok(raw) = std::env::var("BENCH_WORKERS") {
        let n: usize = raw
            .parse()
            .with_context(|| format!("BENCH_WORKERS = {raw:?} is not a thread count"))?;
        if n < 1 {
            bail!("BENCH_WORKERS must be at least 1");
        }
        return Ok(n);
    }
    Ok(flag
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1))
}

fn run(config_path: &PathBuf, workers: Option<usize>) -> anyhow::Result<()> {
    let config = ExperimentConfig::from_file(config_path)?;
    let workers = worker_count(workers)?;
    let summary = harness::run_experiment(&config, workers)?;

    println!(
        "{} on {} (L={}, K={}, T={}, {} segments), {} trials, {} workers",
        summary.config.policy,
        summary.config.environment,
        summary.environment.l,
        summary.environment.k,
        summary.environment.t,
        summary.environment.segments,
        summary.trials,
        workers,
    );
    println!(
        "T-step regret: {:.2} +/- {:.2}",
        summary.regret_mean, summary.regret_std
    );
    if !summary.detections.is_empty() {
        println!("detections (change_point -> mean slot +/- std, missed):");
        for det in &summary.detections {
            match (det.mean_slot, det.std_slot) {
                (Some(mean), Some(std)) => println!(
                    "  {:>8} -> {:.2} +/- {:.2}, missed {}/{}",
                    det.change_point, mean, std, det.missed, summary.trials
                ),
                _ => println!(
                    "  {:>8} -> never detected ({} trials)",
                    det.change_point, summary.trials
                ),
            }
        }
        println!(
            "false alarms: {} total ({:.3} per trial)",
            summary.false_alarms.total, summary.false_alarms.mean_per_trial
        );
    }
    if let Some(dir) = &summary.config.output_dir {
        let written = output::emit_outputs(&summary, std::path::Path::new(dir))?;
        for path in written {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn detect(file: Option<PathBuf>, delta: f64, stride: usize, check_period: usize) -> anyhow::Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        bail!("delta = {delta} outside (0, 1)");
    }
    if stride < 1 || check_period < 1 {
        bail!("stride and check-period must be at least 1");
    }
    let text = match &file {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading stream {}", path.display()))?,
        None => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .context("reading stream from standard input")?;
            buf
        }
    };
    let mut stream = Vec::new();
    for (i, token) in text.split_whitespace().enumerate() {
        match token {
            "0" => stream.push(false),
            "1" => stream.push(true),
            other => bail!("token {} is {other:?}, expected 0 or 1", i + 1),
        }
    }
    match first_detection(stream, delta, stride, check_period) {
        Some(index) => println!("{index}"),
        None => println!("none"),
    }
    Ok(())
}

fn check_assumption(config_path: &PathBuf) -> anyhow::Result<()> {
    let config = ExperimentConfig::from_file(config_path)?;
    config.validate()?;
    let spec = config.build_environment()?;
    let params = config.resolve(&spec)?;
    let report = env::check_detectability(&spec, params.p, params.delta)?;

    println!(
        "environment: L={}, K={}, T={}, {} segments; p={:.6}, delta={:.6e}",
        spec.l(),
        spec.k(),
        spec.t(),
        spec.n_segments(),
        params.p,
        params.delta,
    );
    println!("threshold at horizon: {:.3}", report.beta_horizon);
    println!("change budgets (index, largest shift, slots needed):");
    for b in &report.budgets {
        println!("  {:>3}  {:.4}  {:.0}", b.index, b.largest_shift, b.budget);
    }
    if report.checks.is_empty() {
        println!("single segment: nothing to check");
    } else {
        println!("segment length checks:");
        for c in &report.checks {
            println!(
                "  segment {:>3}: length {:>8} needs {:>12.0}  {}",
                c.segment,
                c.length,
                c.required,
                if c.ok { "ok" } else { "TOO SHORT" }
            );
        }
    }
    println!("satisfied: {}", report.satisfied);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn make_env(
    kind: &str,
    seed: u64,
    out: &PathBuf,
    l: Option<usize>,
    k: Option<usize>,
    n: Option<usize>,
    t: Option<u64>,
) -> anyhow::Result<()> {
    let spec = match kind {
        "synthetic" => {
            if l.is_some() || k.is_some() || n.is_some() || t.is_some() {
                bail!("the synthetic environment has a fixed shape; --l/--k/--n/--t apply to --kind hard");
            }
            env::make_synthetic(seed)
        }
        "hard" => env::make_hard_instance(
            l.unwrap_or(10),
            k.unwrap_or(3),
            n.unwrap_or(10),
            t.unwrap_or(25000),
            seed,
        )?,
        other => bail!("unknown kind {other:?}; expected synthetic or hard"),
    };
    env::write_segments_csv(&spec, out)?;
    println!(
        "wrote {} ({} segments, L={}, T={})",
        out.display(),
        spec.n_segments(),
        spec.l(),
        spec.t()
    );
    Ok(())
}
