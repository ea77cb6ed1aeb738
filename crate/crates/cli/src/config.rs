//! Run configuration: a flat `key = value` file whose keys can all be
//! overridden on the command line.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! model = hom-hawkes
//! k = 3
//! dt = 0.25
//! ```
//!
//! Blank lines and lines starting with `#` are ignored, keys are
//! case-insensitive and `-` is accepted for `_`. A repeated key keeps its last value.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use blockstream::model::DEFAULT_EPS_FLOOR;
use blockstream::online::{InitMode, OnlineConfig, StepSchedule};
use blockstream::batch::BatchConfig;
use blockstream::{ModelKind, StepBasis, WindowConfig};
use serde::{Deserialize, Serialize};

pub const KEYS: &[&str] = &[
    "model",
    "k",
    "dt",
    "t",
    "schedule",
    "alpha",
    "c",
    "h",
    "period",
    "r",
    "seed",
    "train_fraction",
    "freeze_pi",
    "eps_floor",
    "init",
    "step_ratio",
    "max_iters",
    "tol",
    "m",
    "degree",
    "dense",
];

/// Default number of windows when `dt` is not given.
pub const DEFAULT_WINDOWS: f64 = 400.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = RawConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`, got `{line}`", no + 1))?;
            out.set(key, value.trim()).with_context(|| format!("config line {}", no + 1))?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            bail!("unknown config key `{key}`");
        }
        self.0.insert(key, value.into());
        Ok(())
    }

    /// `key=value` as given to `--set`.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{pair}`"))?;
        self.set(k, v.trim())
    }

    pub fn merge(&mut self, other: RawConfig) {
        self.0.extend(other.0);
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key `{key}`: cannot parse `{v}`: {e}")))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: Option<ModelKind>,
    pub k: Option<usize>,
    pub dt: Option<f64>,
    pub t: Option<f64>,
    pub schedule: String,
    pub alpha: f64,
    pub c: f64,
    pub h: usize,
    /// Step-basis bin width; defaults to one window.
    pub period: Option<f64>,
    pub r: Option<f64>,
    pub seed: u64,
    pub train_fraction: f64,
    pub freeze_pi: bool,
    pub eps_floor: f64,
    pub init: InitMode,
    pub step_ratio: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: f64,
    pub m: Option<usize>,
    pub degree: usize,
    pub dense: Option<usize>,
}

impl TryFrom<&RawConfig> for RunConfig {
    type Error = anyhow::Error;

    fn try_from(raw: &RawConfig) -> Result<Self> {
        let model = raw.get::<ModelKind>("model")?;
        let init = match raw.0.get("init").map(String::as_str) {
            None | Some("one-hot") => InitMode::OneHot,
            Some("soft-jitter") => InitMode::SoftJitter,
            Some(other) => bail!("config key `init`: expected one-hot or soft-jitter, got `{other}`"),
        };
        let step_ratio = match raw.0.get("step_ratio").map(String::as_str) {
            None => Some(3.0),
            Some("none") => None,
            Some(_) => raw.get::<f64>("step_ratio")?,
        };
        let cfg = RunConfig {
            model,
            k: raw.get("k")?,
            dt: raw.get("dt")?,
            t: raw.get("t")?,
            schedule: raw.0.get("schedule").cloned().unwrap_or_else(|| "algorithm".into()),
            alpha: raw.get("alpha")?.unwrap_or(0.5),
            c: raw.get("c")?.unwrap_or(1.0),
            h: raw.get("h")?.unwrap_or(7),
            period: raw.get("period")?,
            r: raw.get("r")?,
            seed: raw.get("seed")?.unwrap_or(0),
            train_fraction: raw.get("train_fraction")?.unwrap_or(0.85),
            freeze_pi: raw.get("freeze_pi")?.unwrap_or(false),
            eps_floor: raw.get("eps_floor")?.unwrap_or(DEFAULT_EPS_FLOOR),
            init,
            step_ratio,
            max_iters: raw.get("max_iters")?,
            tol: raw.get("tol")?.unwrap_or(1e-3),
            m: raw.get("m")?,
            degree: raw.get("degree")?.unwrap_or(40),
            dense: raw.get("dense")?,
        };
        if !(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0) {
            bail!("train_fraction must lie in (0, 1], got {}", cfg.train_fraction);
        }
        cfg.step_schedule()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn model(&self) -> Result<ModelKind> {
        self.model.ok_or_else(|| anyhow!("`model` is required"))
    }

    pub fn k(&self) -> Result<usize> {
        self.k.ok_or_else(|| anyhow!("`k` is required"))
    }

    pub fn basis(&self, horizon: f64) -> Result<Option<StepBasis>> {
        Ok(if self.model()?.is_inhomogeneous() {
            let period = self.period.unwrap_or_else(|| self.window_length(horizon));
            Some(StepBasis::new(self.h, period)?)
        } else {
            None
        })
    }

    pub fn step_schedule(&self) -> Result<StepSchedule> {
        let s = match self.schedule.as_str() {
            "algorithm" => StepSchedule::AlgorithmDefault,
            "power-law" => StepSchedule::PowerLaw {
                alpha: self.alpha,
                c: self.c,
            },
            "flat-sqrt-t" => StepSchedule::FlatSqrtT { c: self.c },
            other => bail!("unknown schedule `{other}` (expected algorithm, power-law or flat-sqrt-t)"),
        };
        s.validate()?;
        Ok(s)
    }

    /// Window length for a fit over `[0, horizon]`.
    pub fn window_length(&self, horizon: f64) -> f64 {
        match self.dt {
            Some(dt) => dt,
            None if horizon > 0.0 => horizon / DEFAULT_WINDOWS,
            None => 1.0,
        }
    }

    pub fn online(&self, horizon: f64) -> Result<OnlineConfig> {
        let window = WindowConfig::new(self.window_length(horizon), horizon)?;
        let mut cfg = OnlineConfig::new(self.model()?, self.k()?, window);
        cfg.schedule = self.step_schedule()?;
        cfg.init = self.init;
        cfg.eps_floor = self.eps_floor;
        cfg.freeze_pi = self.freeze_pi;
        cfg.trim_radius = self.r;
        cfg.basis = self.basis(horizon)?;
        cfg.step_ratio = self.step_ratio;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Batch settings; the iteration cap defaults to the number of online windows.
    pub fn batch(&self, horizon: f64) -> Result<BatchConfig> {
        let windows = WindowConfig::new(self.window_length(horizon), horizon)?.n_windows;
        let mut cfg = BatchConfig::new(self.model()?, self.k()?, horizon, self.max_iters.unwrap_or(windows));
        cfg.tol = self.tol;
        cfg.init = self.init;
        cfg.eps_floor = self.eps_floor;
        cfg.basis = self.basis(horizon)?;
        Ok(cfg)
    }
}
