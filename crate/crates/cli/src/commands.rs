//! Subcommand implementations, independent of argument parsing.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use blockstream::batch::batch_fit;
use blockstream::likelihood::complete_loglik;
use blockstream::metrics::{aligned_mae, intensity_recovery, nmi, predict_counts, r_dense, rmse, EvalReport, PredictMode};
use blockstream::model::argmax_rows;
use blockstream::online::{HistoryStore, OnlineLearner, WindowRecord};
use blockstream::simulate::{generate, reference_params, reference_pi, DegreeScenario, GroundTruth};
use blockstream::window::WindowStream;
use blockstream::{Event, ModelKind, ModelParams};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{self, EventSource, Split};

/// Persisted result of `fit-online` / `fit-batch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub model: ModelKind,
    pub method: String,
    pub params: ModelParams,
    pub pi: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    pub z_hat: Vec<usize>,
    pub config: RunConfig,
    /// End of the training period.
    pub t_split: f64,
    pub n_train: usize,
}

impl FitOutput {
    fn new(method: &str, params: ModelParams, pi: &Array1<f64>, tau: &Array2<f64>, config: &RunConfig, split: &Split) -> Self {
        Self {
            model: params.kind(),
            method: method.into(),
            params,
            pi: pi.to_vec(),
            tau: tau.rows().into_iter().map(|r| r.to_vec()).collect(),
            z_hat: argmax_rows(tau),
            config: config.clone(),
            t_split: split.t_split,
            n_train: split.n_train,
        }
    }

    pub fn tau_matrix(&self) -> Result<Array2<f64>> {
        let k = self.pi.len();
        if self.tau.iter().any(|r| r.len() != k) {
            bail!("fit output: tau rows must have {k} entries");
        }
        Ok(Array2::from_shape_vec((self.tau.len(), k), self.tau.iter().flatten().copied().collect())?)
    }
}

/// Input events plus the options that shape the train split.
#[derive(Debug, Clone)]
pub struct Input {
    pub source: EventSource,
    pub edges: Option<PathBuf>,
}

impl Input {
    fn split(&self, cfg: &RunConfig) -> Result<Split> {
        io::split_train_test(&self.source, cfg.train_fraction, self.edges.as_deref(), cfg.m)
    }
}

/// Training horizon: the split time, or with no held-out data the configured `t`.
fn train_horizon(cfg: &RunConfig, split: &Split) -> f64 {
    if split.n_train == split.n_total {
        cfg.t.unwrap_or(split.t_max).max(split.t_max)
    } else {
        split.t_split
    }
}

fn test_horizon(cfg: &RunConfig, split: &Split) -> f64 {
    cfg.t.unwrap_or(split.t_max).max(split.t_max)
}

struct TraceWriter(Option<csv::Writer<File>>);

impl TraceWriter {
    fn create(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self(None)) };
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["window", "n_events", "eta", "elbo_norm", "loglik_norm"])?;
        Ok(Self(Some(w)))
    }

    fn row(&mut self, window: usize, n_events: usize, eta: Option<f64>, elbo: f64, loglik: Option<f64>) -> Result<()> {
        if let Some(w) = &mut self.0 {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                window.to_string(),
                n_events.to_string(),
                opt(eta),
                elbo.to_string(),
                opt(loglik),
            ])?;
        }
        Ok(())
    }

    fn record(&mut self, r: &WindowRecord) -> Result<()> {
        self.row(r.window, r.n_events, Some(r.eta), r.elbo_norm, Some(r.loglik_norm))
    }

    fn finish(self) -> Result<()> {
        if let Some(mut w) = self.0 {
            w.flush()?;
        }
        Ok(())
    }
}

/// Streams the training events through the online learner, one window in memory at a time.
pub fn fit_online(cfg: &RunConfig, input: &Input, out: &Path, trace: Option<&Path>) -> Result<FitOutput> {
    let split = input.split(cfg)?;
    let horizon = train_horizon(cfg, &split);
    let online = cfg.online(horizon)?;
    let window = online.window;
    let mut learner = OnlineLearner::new(online, &split.edges, cfg.seed)?;
    let mut writer = TraceWriter::create(trace)?;
    for w in WindowStream::new(io::train_events(&input.source, split.t_split)?, window) {
        let w = w?;
        learner.process_window(w.index, &w.events, w.start, w.end)?;
        for r in learner.take_trace() {
            writer.record(&r)?;
        }
    }
    writer.finish()?;
    let fit = FitOutput::new("online", learner.params().clone(), &learner.state().pi, &learner.state().tau, cfg, &split);
    io::write_json(out, &fit)?;
    Ok(fit)
}

fn load_train(input: &Input, split: &Split) -> Result<Vec<Event>> {
    Ok(io::train_events(&input.source, split.t_split)?.collect::<Result<_, _>>()?)
}

pub fn fit_batch(cfg: &RunConfig, input: &Input, out: &Path, trace: Option<&Path>) -> Result<FitOutput> {
    let split = input.split(cfg)?;
    let horizon = train_horizon(cfg, &split);
    let events = load_train(input, &split)?;
    let report = batch_fit(&events, &split.edges, &cfg.batch(horizon)?, cfg.seed)?;
    let mut writer = TraceWriter::create(trace)?;
    let n = events.len().max(1) as f64;
    for (i, e) in report.elbo_trace.iter().enumerate() {
        writer.row(i + 1, events.len(), None, e / n, None)?;
    }
    writer.finish()?;
    let fit = FitOutput::new("batch", report.params, &report.pi, &report.tau, cfg, &split);
    io::write_json(out, &fit)?;
    Ok(fit)
}

/// Predicted and observed per-pair counts on the held-out period.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPrediction {
    pub pairs: Vec<(u32, u32)>,
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    /// Test events whose pair never appeared in training.
    pub unseen: usize,
}

impl LinkPrediction {
    pub fn rmse(&self) -> Result<f64> {
        Ok(rmse(&self.predicted, &self.observed)?)
    }
}

fn link_prediction(fit: &FitOutput, input: &Input, mode: PredictMode) -> Result<LinkPrediction> {
    let split = input.split(&fit.config)?;
    let tau = fit.tau_matrix()?;
    if tau.nrows() != split.edges.m() {
        bail!("fit has {} nodes but the input yields {}", tau.nrows(), split.edges.m());
    }
    let t_end = test_horizon(&fit.config, &split);
    let store = if fit.params.decay().is_some() {
        let radius = fit.config.online(train_horizon(&fit.config, &split))?.effective_trim_radius();
        let mut store = HistoryStore::queues(radius);
        let mut chunk = Vec::with_capacity(4096);
        for e in io::train_events(&input.source, split.t_split)? {
            chunk.push(e?);
            if chunk.len() == chunk.capacity() {
                store.absorb(chunk.last().map_or(0.0, |e| e.t), &chunk);
                chunk.clear();
            }
        }
        store.absorb(split.t_split, &chunk);
        Some(store)
    } else {
        None
    };
    let predicted = predict_counts(&fit.params, &tau, &split.edges, split.t_split, t_end, store.as_ref(), mode)?;
    let mut observed = vec![0.0; split.edges.len()];
    let mut unseen = 0;
    for e in io::test_events(&input.source, split.t_split)? {
        let e = e?;
        match split.edges.index_of(e.src, e.dst) {
            Some(p) => observed[p] += 1.0,
            None => unseen += 1,
        }
    }
    if unseen > 0 {
        log::warn!("{unseen} test events fall on pairs outside the training edge list and are ignored");
    }
    Ok(LinkPrediction {
        pairs: split.edges.pairs().to_vec(),
        predicted,
        observed,
        t_start: split.t_split,
        t_end,
        unseen,
    })
}

pub fn predict(fit_path: &Path, input: &Input, out: Option<&Path>, mode: PredictMode) -> Result<LinkPrediction> {
    let fit: FitOutput = io::read_json(fit_path)?;
    let lp = link_prediction(&fit, input, mode)?;
    if let Some(path) = out {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["src", "dst", "predicted", "observed"])?;
        for ((&(s, d), p), o) in lp.pairs.iter().zip(&lp.predicted).zip(&lp.observed) {
            w.write_record([s.to_string(), d.to_string(), p.to_string(), o.to_string()])?;
        }
        w.flush()?;
    }
    Ok(lp)
}

pub fn evaluate(fit_path: &Path, truth_path: Option<&Path>, input: Option<&Input>) -> Result<EvalReport> {
    let fit: FitOutput = io::read_json(fit_path)?;
    let mut report = EvalReport::default();
    if let Some(path) = truth_path {
        let truth: GroundTruth = io::read_json(path)?;
        report.nmi = Some(nmi(&fit.z_hat, &truth.z_star)?);
        report.intensity_recovery = Some(intensity_recovery(&truth.params.mean_baseline(), &fit.params.mean_baseline()));
        if truth.params.n_classes() == fit.params.n_classes() {
            report.aligned_mae = Some(aligned_mae(&truth.params, &fit.params, &fit.z_hat, &truth.z_star));
        }
        if !truth.dense_nodes.is_empty() {
            report.r_dense = Some(r_dense(&fit.z_hat, &truth.z_star, &truth.dense_nodes)?);
        }
    }
    if let Some(input) = input {
        let lp = link_prediction(&fit, input, PredictMode::Analytic)?;
        if lp.pairs.is_empty() || lp.t_end <= lp.t_start {
            log::warn!("no held-out period; link-prediction RMSE not reported");
        } else {
            report.rmse = Some(lp.rmse()?);
        }
    }
    Ok(report)
}

const DEFAULT_SIM_HORIZON: f64 = 500.0;

/// Options for `simulate` beyond the run configuration.
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub params: Option<PathBuf>,
    pub pi: Option<Vec<f64>>,
}

/// Writes `events.csv`, `edges.csv` and `truth.json` into `out_dir`.
pub fn simulate(cfg: &RunConfig, opts: &SimulateOptions, out_dir: &Path) -> Result<GroundTruth> {
    let kind = cfg.model()?;
    let params = match &opts.params {
        Some(p) => {
            let params: ModelParams = io::read_json(p)?;
            if params.kind() != kind {
                bail!("parameter file holds a {} model but `model` is {kind}", params.kind());
            }
            params
        }
        None => {
            if cfg.k.unwrap_or(3) != 3 {
                bail!("the built-in reference parameters have K = 3; pass --params for other K");
            }
            let basis = cfg.basis(cfg.t.unwrap_or(DEFAULT_SIM_HORIZON))?;
            reference_params(kind, basis.unwrap_or(blockstream::StepBasis::new(1, 1.0)?))
        }
    };
    let k = params.n_classes();
    if let Some(given) = cfg.k {
        if given != k {
            bail!("`k` = {given} but the parameters have {k} classes");
        }
    }
    let pi = match &opts.pi {
        Some(pi) => pi.clone(),
        None if k == 3 => reference_pi(),
        None => vec![1.0 / k as f64; k],
    };
    let m = cfg.m.unwrap_or(100);
    let horizon = cfg.t.unwrap_or(DEFAULT_SIM_HORIZON);
    let scenario = match cfg.dense {
        Some(n_dense) => DegreeScenario::uneven_default(m, n_dense),
        None => DegreeScenario::Even { degree: cfg.degree },
    };
    let truth = generate(params, &pi, m, scenario, horizon, cfg.seed)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    io::write_events(&out_dir.join("events.csv"), &truth.events)?;
    io::write_edges(&out_dir.join("edges.csv"), truth.edges.as_ref().expect("generate returns the edge list"))?;
    io::write_json(&out_dir.join("truth.json"), &truth)?;
    Ok(truth)
}

/// One method's row in the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    pub time_s: f64,
    pub link_pred_rmse: Option<f64>,
    pub loglik_norm: f64,
    /// `loglik_norm` relative to the batch fit.
    pub loglik_ratio: f64,
}

/// Fits online and batch on the same training split and reports time,
/// held-out RMSE and normalized complete-data log-likelihood.
pub fn compare(cfg: &RunConfig, input: &Input, out: &mut dyn Write) -> Result<Vec<CompareRow>> {
    let split = input.split(cfg)?;
    let horizon = train_horizon(cfg, &split);
    let events = load_train(input, &split)?;

    let clock = Instant::now();
    let online_cfg = cfg.online(horizon)?;
    let window = online_cfg.window;
    let mut learner = OnlineLearner::new(online_cfg, &split.edges, cfg.seed)?;
    for w in blockstream::window::partition_windows(&events, &window)? {
        learner.process_window(w.index, w.events, w.start, w.end)?;
    }
    let online_time = clock.elapsed().as_secs_f64();
    let online = FitOutput::new("online", learner.params().clone(), &learner.state().pi, &learner.state().tau, cfg, &split);

    let clock = Instant::now();
    let report = batch_fit(&events, &split.edges, &cfg.batch(horizon)?, cfg.seed)?;
    let batch_time = clock.elapsed().as_secs_f64();
    let batch = FitOutput::new("batch", report.params, &report.pi, &report.tau, cfg, &split);

    let n = events.len().max(1) as f64;
    let score = |fit: &FitOutput| -> Result<(f64, Option<f64>)> {
        let ll = complete_loglik(&fit.params, &fit.pi, &fit.z_hat, &events, &split.edges, horizon)? / n;
        let rmse = if split.n_test() > 0 {
            Some(link_prediction(fit, input, PredictMode::Analytic)?.rmse()?)
        } else {
            None
        };
        Ok((ll, rmse))
    };
    let (ll_online, rmse_online) = score(&online)?;
    let (ll_batch, rmse_batch) = score(&batch)?;
    let rows = vec![
        CompareRow {
            method: "online".into(),
            time_s: online_time,
            link_pred_rmse: rmse_online,
            loglik_norm: ll_online,
            loglik_ratio: ll_online / ll_batch,
        },
        CompareRow {
            method: "batch".into(),
            time_s: batch_time,
            link_pred_rmse: rmse_batch,
            loglik_norm: ll_batch,
            loglik_ratio: 1.0,
        },
    ];
    let mut w = csv::Writer::from_writer(out);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}
