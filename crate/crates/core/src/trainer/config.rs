// Copyright 2026 The semloss Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Training configuration as a flat `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use the same
//! kebab-case spelling as the command-line flags. Lists are comma-separated
//! and an empty value leaves an optional path unset.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::DEFAULT_CONTEXT_CAP;
use crate::objectives::DEFAULT_BASELINE_WINDOW;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitMode {
    #[default]
    Random,
    FromTable,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Random => "random",
            InitMode::FromTable => "from-table",
        })
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(InitMode::Random),
            "from-table" => Ok(InitMode::FromTable),
            other => Err(format!("expected `random` or `from-table`, got `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid configuration: {}", format_problems(.0))]
    Invalid(Vec<(String, String)>),
}

impl ConfigError {
    /// Keys the error refers to.
    pub fn keys(&self) -> Vec<&str> {
        match self {
            ConfigError::UnknownKeys(k) => k.iter().map(String::as_str).collect(),
            ConfigError::Invalid(p) => p.iter().map(|(k, _)| k.as_str()).collect(),
            _ => Vec::new(),
        }
    }
}

fn format_problems(problems: &[(String, String)]) -> String {
    problems
        .iter()
        .map(|(k, why)| format!("{k} ({why})"))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps; 0 means no cap.
    pub max_steps: u64,
    pub seeds: Vec<u64>,
    pub p_drop: f64,
    pub baseline_window: usize,
    pub eval_every: u64,
    pub embedding_file: Option<PathBuf>,
    pub init_mode: InitMode,
    /// Longest sampled or decoded response, EOS included.
    pub max_len: usize,
    pub context_cap: usize,
    pub min_count: usize,
    pub valid_fraction: f64,
    pub divergence_window: usize,
    pub divergence_factor: f64,
    pub corpus: Option<PathBuf>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            learning_rate: 4e-3,
            hidden_size: 128,
            embedding_size: 128,
            batch_size: 32,
            epochs: 10,
            max_steps: 0,
            seeds: vec![1, 2, 3, 4, 5],
            p_drop: 0.0,
            baseline_window: DEFAULT_BASELINE_WINDOW,
            eval_every: 100,
            embedding_file: None,
            init_mode: InitMode::Random,
            max_len: 30,
            context_cap: DEFAULT_CONTEXT_CAP,
            min_count: 1,
            valid_fraction: 0.1,
            divergence_window: 100,
            divergence_factor: 10.0,
            corpus: None,
        }
    }
}

/// Every recognised key, in file order.
pub const CONFIG_KEYS: [&str; 21] = [
    "alpha",
    "learning-rate",
    "hidden-size",
    "embedding-size",
    "batch-size",
    "epochs",
    "max-steps",
    "seeds",
    "p-drop",
    "baseline-window",
    "eval-every",
    "embedding-file",
    "init-mode",
    "max-len",
    "context-cap",
    "min-count",
    "valid-fraction",
    "divergence-window",
    "divergence-factor",
    "corpus",
    "out-dir",
];

fn parse_num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| format!("`{value}`: {e}"))
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl TrainingConfig {
    /// Set one key from its textual value. `out-dir` is accepted and ignored
    /// here so that a run's snapshot can carry it.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = |why: String| ConfigError::Invalid(vec![(key.to_string(), why)]);
        match key {
            "alpha" => self.alpha = parse_num(value).map_err(bad)?,
            "learning-rate" => self.learning_rate = parse_num(value).map_err(bad)?,
            "hidden-size" => self.hidden_size = parse_num(value).map_err(bad)?,
            "embedding-size" => self.embedding_size = parse_num(value).map_err(bad)?,
            "batch-size" => self.batch_size = parse_num(value).map_err(bad)?,
            "epochs" => self.epochs = parse_num(value).map_err(bad)?,
            "max-steps" => self.max_steps = parse_num(value).map_err(bad)?,
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_num)
                    .collect::<Result<_, _>>()
                    .map_err(bad)?
            }
            "p-drop" => self.p_drop = parse_num(value).map_err(bad)?,
            "baseline-window" => self.baseline_window = parse_num(value).map_err(bad)?,
            "eval-every" => self.eval_every = parse_num(value).map_err(bad)?,
            "embedding-file" => self.embedding_file = parse_path(value),
            "init-mode" => self.init_mode = value.parse().map_err(bad)?,
            "max-len" => self.max_len = parse_num(value).map_err(bad)?,
            "context-cap" => self.context_cap = parse_num(value).map_err(bad)?,
            "min-count" => self.min_count = parse_num(value).map_err(bad)?,
            "valid-fraction" => self.valid_fraction = parse_num(value).map_err(bad)?,
            "divergence-window" => self.divergence_window = parse_num(value).map_err(bad)?,
            "divergence-factor" => self.divergence_factor = parse_num(value).map_err(bad)?,
            "corpus" => self.corpus = parse_path(value),
            "out-dir" => {}
            other => return Err(ConfigError::UnknownKeys(vec![other.to_string()])),
        }
        Ok(())
    }

    /// Parse a config file body on top of the defaults, then validate.
    /// Unknown keys are all reported together.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse_unvalidated(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// [`TrainingConfig::parse`] without the final range checks, for callers
    /// that apply overrides first.
    pub fn parse_unvalidated(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut unknown = Vec::new();
        let mut invalid = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            match cfg.set(key.trim(), value) {
                Ok(()) => {}
                Err(ConfigError::UnknownKeys(k)) => unknown.extend(k),
                Err(ConfigError::Invalid(p)) => invalid.extend(p),
                Err(e) => return Err(e),
            }
        }
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        if !invalid.is_empty() {
            return Err(ConfigError::Invalid(invalid));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let cfg = Self::load_unvalidated(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_unvalidated(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_unvalidated(&text)
    }

    /// Rebuild from `(key, value)` entries such as a checkpoint's snapshot.
    pub fn from_entries(entries: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in entries {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// `(key, value)` for every key except `out-dir`, in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let seeds = self.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let values = [
            self.alpha.to_string(),
            self.learning_rate.to_string(),
            self.hidden_size.to_string(),
            self.embedding_size.to_string(),
            self.batch_size.to_string(),
            self.epochs.to_string(),
            self.max_steps.to_string(),
            seeds,
            self.p_drop.to_string(),
            self.baseline_window.to_string(),
            self.eval_every.to_string(),
            show_path(&self.embedding_file),
            self.init_mode.to_string(),
            self.max_len.to_string(),
            self.context_cap.to_string(),
            self.min_count.to_string(),
            self.valid_fraction.to_string(),
            self.divergence_window.to_string(),
            self.divergence_factor.to_string(),
            show_path(&self.corpus),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn to_file_string(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut problems: Vec<(String, String)> = Vec::new();
        let mut check = |ok: bool, key: &str, why: &str| {
            if !ok {
                problems.push((key.to_string(), why.to_string()));
            }
        };
        check(
            self.alpha.is_finite() && self.alpha >= 0.0,
            "alpha",
            "must be finite and >= 0",
        );
        check(
            self.learning_rate.is_finite() && self.learning_rate > 0.0,
            "learning-rate",
            "must be > 0",
        );
        check(self.hidden_size > 0, "hidden-size", "must be positive");
        check(self.embedding_size > 0, "embedding-size", "must be positive");
        check(self.batch_size > 0, "batch-size", "must be positive");
        check(self.epochs > 0, "epochs", "must be positive");
        check(!self.seeds.is_empty(), "seeds", "needs at least one seed");
        check((0.0..1.0).contains(&self.p_drop), "p-drop", "must lie in [0, 1)");
        check(self.baseline_window > 0, "baseline-window", "must be positive");
        check(self.eval_every > 0, "eval-every", "must be positive");
        check(self.max_len > 0, "max-len", "must be positive");
        check(self.context_cap > 0, "context-cap", "must be positive");
        check(self.min_count > 0, "min-count", "must be positive");
        check(
            self.valid_fraction > 0.0 && self.valid_fraction < 1.0,
            "valid-fraction",
            "must lie in (0, 1)",
        );
        check(self.divergence_window > 0, "divergence-window", "must be positive");
        check(self.divergence_factor > 1.0, "divergence-factor", "must exceed 1");
        let needs_table = self.alpha > 0.0 || self.init_mode == InitMode::FromTable;
        check(
            !needs_table || self.embedding_file.is_some(),
            "embedding-file",
            "required when alpha > 0 or init-mode = from-table",
        );
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}
