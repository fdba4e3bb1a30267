//! Experiment configuration: defaults, flat key=value config files, and
//! validation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fl::Strategy;

/// Fraction of each client's data reserved for local testing.
pub const LOCAL_TEST_FRACTION: f64 = 0.2;
/// Fraction of the source pool reserved as the held-out global test set.
pub const GLOBAL_TEST_FRACTION: f64 = 0.2;
/// Environment variable that re-roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "FEDKPER_OUTPUT_ROOT";

/// Every knob of an experiment. `Default` is the desk-scale preset: an
/// 8-class synthetic problem small enough for minutes-scale CI.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Load data from this file (FDS1 or CSV) instead of generating it.
    pub dataset: Option<PathBuf>,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub spread: f64,
    pub clients: usize,
    pub alpha: f64,
    pub min_per_client: usize,
    pub sample_fraction: f64,
    pub rounds: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub lambda_cap: f64,
    pub hidden: Vec<usize>,
    pub strategy: String,
    /// FedProx proximal coefficient.
    pub mu: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub strict_transmission: bool,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            classes: 8,
            dim: 16,
            per_class: 200,
            spread: 1.0,
            clients: 20,
            alpha: 0.1,
            min_per_client: 10,
            sample_fraction: 0.1,
            rounds: 50,
            epochs: 5,
            lr: 0.01,
            batch_size: 32,
            max_grad_norm: 5.0,
            lambda_cap: 10.0,
            hidden: vec![64, 64],
            strategy: "fedkper".to_string(),
            mu: 0.01,
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("runs"),
            strict_transmission: false,
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    /// The full-protocol preset: 100 rounds (sampling rate, epochs, learning
    /// rate, and alpha already sit at their protocol values by default).
    pub fn apply_paper_preset(&mut self) {
        self.rounds = 100;
        self.epochs = 5;
        self.lr = 0.01;
        self.sample_fraction = 0.1;
        self.alpha = 0.1;
    }

    pub fn strategy(&self) -> Result<Strategy> {
        let s: Strategy = self.strategy.parse()?;
        Ok(match s {
            Strategy::FedProx { .. } => Strategy::FedProx { mu: self.mu },
            other => other,
        })
    }

    /// Parse a flat `key = value` file over the defaults. `#` starts a
    /// comment; blank lines are skipped; unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_str_config(&text)
    }

    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                message: format!("expected key = value, got {raw:?}"),
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Apply one key/value pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::config(Some(key), format!("cannot parse {value:?}"))
            })
        }
        fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
            value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse().map_err(|_| {
                        Error::config(Some(key), format!("cannot parse list entry {s:?}"))
                    })
                })
                .collect()
        }
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "classes" => self.classes = parse(key, value)?,
            "dim" => self.dim = parse(key, value)?,
            "per_class" => self.per_class = parse(key, value)?,
            "spread" => self.spread = parse(key, value)?,
            "clients" => self.clients = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "min_per_client" => self.min_per_client = parse(key, value)?,
            "sample_fraction" => self.sample_fraction = parse(key, value)?,
            "rounds" => self.rounds = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "max_grad_norm" => self.max_grad_norm = parse(key, value)?,
            "lambda_cap" => self.lambda_cap = parse(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "strategy" => self.strategy = value.to_string(),
            "mu" => self.mu = parse(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "strict_transmission" => self.strict_transmission = parse(key, value)?,
            "parallel" => self.parallel = parse(key, value)?,
            other => {
                return Err(Error::config(Some(other), "unknown configuration key".to_string()))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("classes", self.classes as f64),
            ("dim", self.dim as f64),
            ("per_class", self.per_class as f64),
            ("clients", self.clients as f64),
            ("min_per_client", self.min_per_client as f64),
            ("rounds", self.rounds as f64),
            ("batch_size", self.batch_size as f64),
            ("lr", self.lr),
            ("max_grad_norm", self.max_grad_norm),
            ("lambda_cap", self.lambda_cap),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(Some(key), format!("{v} must be positive")));
            }
        }
        if self.classes < 2 {
            return Err(Error::config(Some("classes"), "need at least 2 classes".to_string()));
        }
        if self.clients < 2 {
            return Err(Error::config(Some("clients"), "need at least 2 clients".to_string()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(Some("alpha"), format!("{} must be > 0", self.alpha)));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::config(
                Some("sample_fraction"),
                format!("{} must lie in (0, 1]", self.sample_fraction),
            ));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(Error::config(Some("spread"), format!("{} must be >= 0", self.spread)));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::config(Some("mu"), format!("{} must be >= 0", self.mu)));
        }
        if self.seeds.is_empty() {
            return Err(Error::config(Some("seeds"), "need at least one seed".to_string()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config(Some("hidden"), "layer widths must be positive".to_string()));
        }
        self.strategy()?.validate()?;
        Ok(())
    }

    /// Output directory after the environment override: a relative
    /// `output_dir` is re-rooted under `FEDKPER_OUTPUT_ROOT` when that is set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if self.output_dir.is_relative() => {
                PathBuf::from(root).join(&self.output_dir)
            }
            _ => self.output_dir.clone(),
        }
    }

    /// The resolved configuration as the same flat key=value format it is
    /// parsed from.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        if let Some(path) = &self.dataset {
            let _ = writeln!(out, "dataset = {}", path.display());
        }
        let list =
            |xs: &[u64]| xs.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "classes = {}", self.classes);
        let _ = writeln!(out, "dim = {}", self.dim);
        let _ = writeln!(out, "per_class = {}", self.per_class);
        let _ = writeln!(out, "spread = {}", self.spread);
        let _ = writeln!(out, "clients = {}", self.clients);
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "min_per_client = {}", self.min_per_client);
        let _ = writeln!(out, "sample_fraction = {}", self.sample_fraction);
        let _ = writeln!(out, "rounds = {}", self.rounds);
        let _ = writeln!(out, "epochs = {}", self.epochs);
        let _ = writeln!(out, "lr = {}", self.lr);
        let _ = writeln!(out, "batch_size = {}", self.batch_size);
        let _ = writeln!(out, "max_grad_norm = {}", self.max_grad_norm);
        let _ = writeln!(out, "lambda_cap = {}", self.lambda_cap);
        let _ = writeln!(
            out,
            "hidden = {}",
            self.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(out, "strategy = {}", self.strategy);
        let _ = writeln!(out, "mu = {}", self.mu);
        let _ = writeln!(out, "seeds = {}", list(&self.seeds));
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(out, "strict_transmission = {}", self.strict_transmission);
        let _ = writeln!(out, "parallel = {}", self.parallel);
        out
    }
}
