use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use blockstream::metrics::PredictMode;
use blockstream_cli::commands::{self, Input, SimulateOptions};
use blockstream_cli::config::{RawConfig, RunConfig};
use blockstream_cli::io::EventSource;
use clap::{Args, Parser, Subcommand};

/// Streaming community detection on timestamped directed interactions.
#[derive(Parser)]
#[command(name = "blockstream", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a block point-process network: events.csv, edges.csv, truth.json.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Model parameters as JSON (defaults to the built-in three-class reference).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Comma-separated class proportions.
        #[arg(long, value_delimiter = ',')]
        pi: Option<Vec<f64>>,
    },
    /// One pass over the training events with the windowed online estimator.
    FitOnline(FitArgs),
    /// Full-data variational EM on the training events.
    FitBatch(FitArgs),
    /// Expected per-pair counts on the held-out period.
    Predict {
        #[arg(long)]
        fit: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        /// Per-pair predictions as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte Carlo paths for Hawkes models instead of the analytic mean.
        #[arg(long)]
        mc_paths: Option<usize>,
        /// Seed for the Monte Carlo mode.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Scores a fit against ground truth and/or held-out events.
    Evaluate {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Report JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Online vs batch on the same split: time, link-prediction RMSE, log-likelihood ratio.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        input: InputArgs,
        /// CSV table (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "fit.json")]
    out: PathBuf,
    /// Per-window (online) or per-iteration (batch) trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct InputArgs {
    /// Events file: CSV `src,dst,t` or, with `--format snap`, `src dst unix-time`.
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Edge list CSV `src,dst`; derived from the training events when omitted.
    #[arg(long)]
    edges: Option<PathBuf>,
}

impl InputArgs {
    fn input(&self) -> Result<Input> {
        Ok(Input {
            source: EventSource::new(self.events.clone(), &self.format)?,
            edges: self.edges.clone(),
        })
    }
}

/// Settings from an optional key=value file, overridden by `--set` and then by the named flags.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    /// Number of dense nodes (uneven degree scenario).
    #[arg(long)]
    dense: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    period: Option<String>,
    /// Hawkes trim radius.
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    train_fraction: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    init: Option<String>,
    /// Per-window parameter change bound, or `none`.
    #[arg(long)]
    step_ratio: Option<String>,
    #[arg(long)]
    eps_floor: Option<String>,
    #[arg(long)]
    freeze_pi: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut raw = match &self.config {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        for pair in &self.set {
            raw.set_pair(pair)?;
        }
        let flags = [
            ("model", &self.model),
            ("k", &self.k),
            ("dt", &self.dt),
            ("t", &self.t),
            ("seed", &self.seed),
            ("m", &self.m),
            ("degree", &self.degree),
            ("dense", &self.dense),
            ("schedule", &self.schedule),
            ("alpha", &self.alpha),
            ("c", &self.c),
            ("h", &self.h),
            ("period", &self.period),
            ("r", &self.r),
            ("train_fraction", &self.train_fraction),
            ("max_iters", &self.max_iters),
            ("tol", &self.tol),
            ("init", &self.init),
            ("step_ratio", &self.step_ratio),
            ("eps_floor", &self.eps_floor),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set(key, v.clone())?;
            }
        }
        if self.freeze_pi {
            raw.set("freeze_pi", "true")?;
        }
        RunConfig::try_from(&raw)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(std::io::stdout().flush()?)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out_dir,
            params,
            pi,
        } => {
            let truth = commands::simulate(&config.resolve()?, &SimulateOptions { params, pi }, &out_dir)?;
            eprintln!("simulated {} events into {}", truth.events.len(), out_dir.display());
        }
        Command::FitOnline(a) => {
            let fit = commands::fit_online(&a.config.resolve()?, &a.input.input()?, &a.out, a.trace.as_deref())?;
            eprintln!("online fit on {} events written to {}", fit.n_train, a.out.display());
        }
        Command::FitBatch(a) => {
            let fit = commands::fit_batch(&a.config.resolve()?, &a.input.input()?, &a.out, a.trace.as_deref())?;
            eprintln!("batch fit on {} events written to {}", fit.n_train, a.out.display());
        }
        Command::Predict {
            fit,
            input,
            out,
            mc_paths,
            seed,
        } => {
            let mode = match mc_paths {
                Some(paths) => PredictMode::MonteCarlo { paths, seed },
                None => PredictMode::Analytic,
            };
            let lp = commands::predict(&fit, &input.input()?, out.as_deref(), mode)?;
            let summary = serde_json::json!({
                "rmse": lp.rmse()?,
                "pairs": lp.pairs.len(),
                "t_start": lp.t_start,
                "t_end": lp.t_end,
                "unseen_test_events": lp.unseen,
            });
            println!("{summary}");
        }
        Command::Evaluate {
            fit,
            truth,
            events,
            format,
            edges,
            out,
        } => {
            let input = events
                .map(|e| -> Result<Input> {
                    Ok(Input {
                        source: EventSource::new(e, &format)?,
                        edges,
                    })
                })
                .transpose()?;
            let report = commands::evaluate(&fit, truth.as_deref(), input.as_ref())?;
            write_out(out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        }
        Command::Compare { config, input, out } => {
            let mut buf = Vec::new();
            commands::compare(&config.resolve()?, &input.input()?, &mut buf)?;
            write_out(out.as_deref(), &String::from_utf8(buf)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(blockstream_cli::EXIT_OK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(blockstream_cli::exit_code(&e))
        }
    }
}
