//! Experiment configuration: a flat `key = value` file, one experiment per file.
//!
//! Lines starting with `#` and blank lines are ignored. Lists are
//! comma-separated. Command-line flags are applied on top with [`ExperimentConfig::set`],
//! so both sources go through the same validation.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Kernel literal such as `10;11`; validated when a command loads it.
    pub kernel: String,
    /// BEC erasure probability.
    pub eps: f64,
    pub n: Vec<usize>,
    pub rate: Vec<f64>,
    /// Rate of the RM selection that other rules are compared against.
    pub rm_rate: f64,
    pub t: Vec<f64>,
    pub beta: Vec<f64>,
    pub hybrid_m: usize,
    pub hybrid_beta: f64,
    pub hybrid_t: f64,
    /// Breakpoints for the recursive hybrid rule; empty disables it.
    pub schedule: Vec<usize>,
    pub epsilon_slack: f64,
    pub seed: u64,
    pub trials: u64,
    /// Monte Carlo paths when a level is too large to enumerate.
    pub samples: u64,
    /// Largest number of leaves enumerated exactly.
    pub budget: u64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: "10;11".into(),
            eps: 0.5,
            n: vec![10],
            rate: vec![0.25],
            rm_rate: 0.5,
            t: vec![0.0],
            beta: vec![0.4, 0.6],
            hybrid_m: 4,
            hybrid_beta: 0.25,
            hybrid_t: 0.0,
            schedule: Vec::new(),
            epsilon_slack: 0.5,
            seed: 1,
            trials: 10_000,
            samples: 100_000,
            budget: 1 << 22,
            out: None,
        }
    }
}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), message: message.into() }
}

fn parse_one<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| value_err(key, format!("`{}`: {e}", s.trim())))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| parse_one(key, p)).collect()
}

fn finite(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(value_err(key, "must be finite"))
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses a config file; keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: k + 1, message: format!("expected `key = value`, got `{line}`") });
            };
            let key = key.trim();
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
            seen.push(key);
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "kernel" => {
                if value.trim().is_empty() {
                    return Err(value_err(key, "empty kernel literal"));
                }
                self.kernel = value.trim().to_string();
            }
            "eps" => self.eps = finite(key, parse_one(key, value)?)?,
            "n" => self.n = parse_list(key, value)?,
            "rate" => self.rate = parse_list(key, value)?,
            "rm_rate" => self.rm_rate = parse_one(key, value)?,
            "t" => self.t = parse_list::<f64>(key, value)?.into_iter().map(|x| finite(key, x)).collect::<Result<_, _>>()?,
            "beta" => self.beta = parse_list(key, value)?,
            "hybrid_m" => self.hybrid_m = parse_one(key, value)?,
            "hybrid_beta" => self.hybrid_beta = parse_one(key, value)?,
            "hybrid_t" => self.hybrid_t = finite(key, parse_one(key, value)?)?,
            "schedule" => self.schedule = parse_list(key, value)?,
            "epsilon_slack" => self.epsilon_slack = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "trials" => self.trials = parse_one(key, value)?,
            "samples" => self.samples = parse_one(key, value)?,
            "budget" => self.budget = parse_one(key, value)?,
            "out" => self.out = (!value.trim().is_empty()).then(|| PathBuf::from(value.trim())),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(value_err("eps", "must lie in (0, 1)"));
        }
        if self.n.is_empty() {
            return Err(value_err("n", "at least one depth is required"));
        }
        for (key, rates) in [("rate", &self.rate[..]), ("rm_rate", &[self.rm_rate][..])] {
            if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                return Err(value_err(key, "rates must lie in (0, 1]"));
            }
        }
        if self.beta.iter().chain([&self.hybrid_beta]).any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(value_err("beta", "must be positive and finite"));
        }
        if self.t.is_empty() {
            return Err(value_err("t", "at least one value is required"));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(value_err("schedule", "breakpoints must be strictly increasing"));
        }
        if self.epsilon_slack.is_nan() || self.epsilon_slack < 0.0 {
            return Err(value_err("epsilon_slack", "must be non-negative"));
        }
        for (key, v) in [("trials", self.trials), ("samples", self.samples), ("budget", self.budget)] {
            if v == 0 {
                return Err(value_err(key, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Writes every key, so parsing the result gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("kernel", self.kernel.clone());
        kv("eps", self.eps.to_string());
        kv("n", join(&self.n));
        kv("rate", join(&self.rate));
        kv("rm_rate", self.rm_rate.to_string());
        kv("t", join(&self.t));
        kv("beta", join(&self.beta));
        kv("hybrid_m", self.hybrid_m.to_string());
        kv("hybrid_beta", self.hybrid_beta.to_string());
        kv("hybrid_t", self.hybrid_t.to_string());
        kv("schedule", join(&self.schedule));
        kv("epsilon_slack", self.epsilon_slack.to_string());
        kv("seed", self.seed.to_string());
        kv("trials", self.trials.to_string());
        kv("samples", self.samples.to_string());
        kv("budget", self.budget.to_string());
        if let Some(out) = &self.out {
            kv("out", out.display().to_string());
        }
        s
    }
}
